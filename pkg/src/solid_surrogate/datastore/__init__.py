"""
Datastore Package

Bit-exact persistence of datasets and trained models (JSON manifest plus raw
little-endian float64 blobs) and CSV/JSON report export.
"""

from .manifests import FORMAT_VERSION, DatasetManifest, ModelManifest
from .reports import to_jsonable, write_report, write_table
from .store import (
    read_autoencoder,
    read_dataset,
    read_dataset_config,
    read_model,
    read_model_manifest,
    write_dataset,
    write_model,
)

__all__ = [
    "FORMAT_VERSION",
    "DatasetManifest",
    "ModelManifest",
    "to_jsonable",
    "write_report",
    "write_table",
    "read_autoencoder",
    "read_dataset",
    "read_dataset_config",
    "read_model",
    "read_model_manifest",
    "write_dataset",
    "write_model",
]
