"""
Container Manifests

Typed schemas of the ``manifest.json`` file written next to every binary
blob. Manifests are the human-readable half of a container: they describe
shapes, provenance and hyperparameters, while the blobs carry the float64
payload.

Design Goals
------------
- Strict schemas (unknown keys rejected) so a hand-edited manifest fails fast
- Every manifest carries ``format_version`` and the SHA-256 checksum of its blobs
- The resolved run configuration is embedded verbatim under ``config``
"""

from __future__ import annotations

from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field

FORMAT_VERSION = 1


# ---------------------------------------------------------------------
# Dataset
# ---------------------------------------------------------------------

class DatasetManifest(BaseModel):
    """Manifest of a force/displacement dataset container."""

    format_version: int = FORMAT_VERSION
    kind: Literal["dataset"] = "dataset"
    n_samples: int = Field(..., ge=0)
    input_dim: int = Field(..., ge=1)
    field_dim: int = Field(..., ge=1)
    load_kind: Literal["point", "body"]
    force_range: Optional[List[float]] = None
    material: Dict[str, Any] = Field(default_factory=dict)
    mesh: Dict[str, Any] = Field(default_factory=dict)
    solver: Dict[str, Any] = Field(default_factory=dict)
    seed: Optional[int] = None
    stream: Optional[int] = None
    failure_count: int = Field(default=0, ge=0)
    extra: Dict[str, Any] = Field(
        default_factory=dict,
        description="Other generation metadata (e.g. mask radius).",
    )
    checksum: str = Field(..., min_length=64, max_length=64)
    config: Optional[Dict[str, Any]] = None

    model_config = ConfigDict(extra="forbid")


# ---------------------------------------------------------------------
# Model archive
# ---------------------------------------------------------------------

class ParameterEntry(BaseModel):
    name: str
    shape: List[int]

    model_config = ConfigDict(extra="forbid")


class AutoencoderSection(BaseModel):
    """Architecture, normalizer and parameter layout of the autoencoder."""

    spec: Dict[str, Any]
    normalizer_scale: float = Field(..., gt=0)
    normalizer_offset: float = 0.0
    layout: List[ParameterEntry]
    parameter_count: int = Field(..., ge=1)
    training: Optional[Dict[str, Any]] = None

    model_config = ConfigDict(extra="forbid")


class GPComponentEntry(BaseModel):
    """Hyperparameters and standardizer of one latent GP."""

    variance: float = Field(..., gt=0)
    length_scale: float = Field(..., gt=0)
    noise: float = Field(..., gt=0)
    jitter: float = Field(default=0.0, ge=0)
    lml: Optional[float] = None
    target_mean: float
    target_std: float = Field(..., gt=0)
    degenerate: bool = False

    model_config = ConfigDict(extra="forbid")


class GPSection(BaseModel):
    """Shared training inputs description plus one entry per latent GP."""

    n_train: int = Field(..., ge=1)
    input_dim: int = Field(..., ge=1)
    latent_dim: int = Field(..., ge=1)
    input_lower: List[float]
    input_span: List[float]
    components: List[GPComponentEntry]

    model_config = ConfigDict(extra="forbid")


class ModelManifest(BaseModel):
    """Manifest of a trained surrogate archive."""

    format_version: int = FORMAT_VERSION
    kind: Literal["model"] = "model"
    autoencoder: AutoencoderSection
    gp: Optional[GPSection] = None
    sample_count: int = Field(default=300, ge=2)
    mc_seed: int = Field(default=0, ge=0)
    checksum: str = Field(..., min_length=64, max_length=64)
    config: Optional[Dict[str, Any]] = None

    model_config = ConfigDict(extra="forbid")
