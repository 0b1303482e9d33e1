"""SDK for .4mse multimodal sensor recordings.

The pieces, bottom up: :mod:`fmse.model` (domain types and SE(3) algebra),
:mod:`fmse.codec` (the binary container), :mod:`fmse.calib` (root-referenced
extrinsics), :mod:`fmse.assembler` (trigger-based frame association),
:mod:`fmse.geom` (rectification, projection, deskewing, hidden point
removal), :mod:`fmse.bag` (rosbag export), and :mod:`fmse.cli`.
"""

from . import assembler, bag, calib, codec, errors, fixtures, geom, model, ppm, rawdump
from .codec import DatasetReader, open_dataset, write_dataset
from .model import (
    Agent,
    CameraImage,
    CameraIntrinsics,
    DatasetMeta,
    Encoding,
    EgoMotionState,
    Frame,
    InsRecord,
    Modality,
    PointCloud,
    RigidTransform,
    SensorId,
    SensorSpec,
)

__version__ = "0.1.0"

__all__ = [
    "Agent",
    "CameraImage",
    "CameraIntrinsics",
    "DatasetMeta",
    "DatasetReader",
    "Encoding",
    "EgoMotionState",
    "Frame",
    "InsRecord",
    "Modality",
    "PointCloud",
    "RigidTransform",
    "SensorId",
    "SensorSpec",
    "__version__",
    "assembler",
    "bag",
    "calib",
    "codec",
    "errors",
    "fixtures",
    "geom",
    "model",
    "open_dataset",
    "ppm",
    "rawdump",
    "write_dataset",
]
