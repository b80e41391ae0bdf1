"""
Raw float64 blobs and manifest files.

Blobs are little-endian float64 in row-major order with no header; their
shapes live in the manifest.
"""

from __future__ import annotations

import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, Sequence, Type, TypeVar

import numpy as np
from pydantic import BaseModel, ValidationError

from ..core.errors import ChecksumMismatch, DataError, TruncatedBlob, VersionMismatch
from .manifests import FORMAT_VERSION

logger = logging.getLogger("surrogate.datastore")

BLOB_DTYPE = np.dtype("<f8")
MANIFEST_NAME = "manifest.json"

M = TypeVar("M", bound=BaseModel)


def to_bytes(array: np.ndarray) -> bytes:
    return np.ascontiguousarray(array, dtype=BLOB_DTYPE).tobytes(order="C")


def checksum(blobs: Iterable[bytes]) -> str:
    """SHA-256 over the concatenation of *blobs* in the given order."""
    digest = hashlib.sha256()
    for blob in blobs:
        digest.update(blob)
    return digest.hexdigest()


def write_bytes(path: Path, payload: bytes) -> None:
    path.write_bytes(payload)
    logger.debug("Wrote %d bytes to %s", len(payload), path)


def read_bytes(path: Path, expected_values: int) -> bytes:
    """Read a blob and check it holds exactly *expected_values* float64 numbers."""
    if not path.is_file():
        raise DataError(f"Missing blob {path}.")
    payload = path.read_bytes()
    expected = expected_values * BLOB_DTYPE.itemsize
    if len(payload) != expected:
        raise TruncatedBlob(f"{path.name} holds {len(payload)} bytes, manifest implies {expected}.")
    return payload


def from_bytes(payload: bytes, shape: Sequence[int]) -> np.ndarray:
    return np.frombuffer(payload, dtype=BLOB_DTYPE).reshape(tuple(shape)).astype(np.float64)


def verify_checksum(expected: str, blobs: Iterable[bytes], where: Path) -> None:
    actual = checksum(blobs)
    if actual != expected:
        raise ChecksumMismatch(f"Checksum mismatch in {where}: manifest {expected}, data {actual}.")


def write_manifest(directory: Path, manifest: BaseModel) -> Path:
    path = directory / MANIFEST_NAME
    text = json.dumps(manifest.model_dump(mode="json"), indent=2, sort_keys=True)
    path.write_text(text + "\n", encoding="utf-8")
    return path


def read_manifest(directory: Path, schema: Type[M]) -> M:
    """
    Load and validate ``manifest.json`` from *directory*.

    Raises
    ------
    DataError
        If the file is missing, not JSON or does not match *schema*.
    VersionMismatch
        If ``format_version`` differs from the supported version.
    """
    path = directory / MANIFEST_NAME
    if not path.is_file():
        raise DataError(f"No {MANIFEST_NAME} in {directory}.")
    try:
        raw: Dict[str, Any] = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise DataError(f"{path} must contain a JSON object.")

    version = raw.get("format_version")
    if version != FORMAT_VERSION:
        raise VersionMismatch(
            f"{path} has format_version {version!r}; this build reads {FORMAT_VERSION}."
        )
    try:
        return schema.model_validate(raw)
    except ValidationError as exc:
        raise DataError(f"{path} does not match the {schema.__name__} schema: {exc}") from exc
