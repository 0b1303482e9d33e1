"""Reader/writer for the .4mse binary container."""

from .format import FORMAT_VERSION, INS_DTYPE, MAGIC
from .metadata import canonical_json, meta_from_json, meta_to_dict, meta_to_json
from .reader import (
    DatasetReader,
    IntegrityFailure,
    IntegrityReport,
    RecordSpan,
    open_dataset,
)
from .writer import WriteSummary, write_dataset

__all__ = [
    "DatasetReader",
    "FORMAT_VERSION",
    "INS_DTYPE",
    "IntegrityFailure",
    "IntegrityReport",
    "MAGIC",
    "RecordSpan",
    "WriteSummary",
    "canonical_json",
    "meta_from_json",
    "meta_to_dict",
    "meta_to_json",
    "open_dataset",
    "write_dataset",
]
