"""
Run Configuration

This module defines the complete, authoritative configuration schema for a
surrogate run using Pydantic Settings.

Design Principles
-----------------
- Fail fast on misconfiguration: unknown keys and out-of-range values are
  rejected and surface as ConfigError (exit code 2)
- One section per module, each a frozen, strictly validated model
- Sources in increasing priority: field defaults, environment variables
  (``SURROGATE_`` prefix, ``__`` between nested names), a JSON config file,
  command-line overrides
- The fully resolved configuration is echoed into every manifest and report
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Dict, List, Literal, Mapping, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError
from pydantic_settings import BaseSettings, SettingsConfigDict

from .autoencoder import Activation, AutoencoderSpec, TrainConfig
from .core.errors import ConfigError
from .fem import BeamGeometry, LoadKind, MaterialParams, SolveSettings
from .gpr import GPConfig
from .surrogate import ExperimentConfig, SurrogateConfig


class DataConfig(BaseModel):
    """Load sampling and dataset sizes."""

    load_kind: LoadKind = Field(
        default=LoadKind.POINT,
        description="Point load at a top-edge node (fx, fy, d) or uniform body force (bx, by).",
    )

    force_half_range: float = Field(
        default=0.5,
        gt=0,
        description="Each force component is drawn uniformly from [-h, h].",
    )

    n_train: int = Field(default=600, ge=1, description="Training samples.")
    n_test: int = Field(default=60, ge=1, description="Test samples.")
    seed: int = Field(default=0, ge=0, description="Dataset generation seed.")

    model_config = ConfigDict(frozen=True, extra="forbid")

    @property
    def force_range(self) -> Tuple[float, float]:
        return (-self.force_half_range, self.force_half_range)


class ArchitectureConfig(BaseModel):
    """Autoencoder shape; the input dimension comes from the mesh."""

    encoder_widths: List[int] = Field(
        default_factory=lambda: [256, 128, 64, 32],
        description="Residual block widths from the input towards the latent layer.",
    )

    latent_dim: int = Field(default=4, ge=1, description="Latent dimension L.")

    hidden_activation: Activation = Field(
        default=Activation.RELU,
        description="Activation of the hidden layers.",
    )

    model_config = ConfigDict(frozen=True, extra="forbid")

    def spec(self, input_dim: int) -> AutoencoderSpec:
        return AutoencoderSpec(
            input_dim=input_dim,
            encoder_widths=list(self.encoder_widths),
            latent_dim=self.latent_dim,
            hidden_activation=self.hidden_activation,
        )


class RunConfig(BaseSettings):
    """
    Global run settings.

    Values come from defaults, ``SURROGATE_*`` environment variables, an
    optional JSON file and command-line overrides.
    """

    # ------------------------------------------------------------------
    # Physical problem
    # ------------------------------------------------------------------

    mesh: BeamGeometry = Field(default_factory=BeamGeometry)
    material: MaterialParams = Field(default_factory=MaterialParams)
    solver: SolveSettings = Field(default_factory=SolveSettings)

    # ------------------------------------------------------------------
    # Data and models
    # ------------------------------------------------------------------

    data: DataConfig = Field(default_factory=DataConfig)
    autoencoder: ArchitectureConfig = Field(default_factory=ArchitectureConfig)
    training: TrainConfig = Field(default_factory=TrainConfig)
    gp: GPConfig = Field(default_factory=GPConfig)
    surrogate: SurrogateConfig = Field(default_factory=SurrogateConfig)
    experiment: ExperimentConfig = Field(default_factory=ExperimentConfig)

    # ------------------------------------------------------------------
    # Execution
    # ------------------------------------------------------------------

    threads: int = Field(
        default=1,
        ge=1,
        description="Worker threads for data generation, GP fitting and prediction.",
    )

    out_dir: str = Field(default="runs", min_length=1, description="Output root directory.")

    log_level: Literal["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"] = Field(
        default="INFO",
        description="Logging level.",
    )

    # ------------------------------------------------------------------
    # Pydantic Settings Configuration
    # ------------------------------------------------------------------

    model_config = SettingsConfigDict(
        env_prefix="SURROGATE_",
        env_nested_delimiter="__",
        case_sensitive=False,
        extra="forbid",
        frozen=True,
    )

    # ------------------------------------------------------------------
    # Derived module settings
    # ------------------------------------------------------------------

    def ae_spec(self, input_dim: int) -> AutoencoderSpec:
        return self.autoencoder.spec(input_dim)

    def train_config(self) -> TrainConfig:
        return self.training.model_copy(update={"threads": self.threads})

    def gp_config(self) -> GPConfig:
        return self.gp.model_copy(update={"threads": self.threads})

    def echo(self) -> Dict[str, Any]:
        """Fully resolved configuration as JSON-ready data."""
        return self.model_dump(mode="json")


def _deep_merge(base: Dict[str, Any], override: Mapping[str, Any]) -> Dict[str, Any]:
    merged = dict(base)
    for key, value in override.items():
        if isinstance(value, Mapping) and isinstance(merged.get(key), Mapping):
            merged[key] = _deep_merge(dict(merged[key]), value)
        else:
            merged[key] = value
    return merged


def load_config(
    path: Optional[Path | str] = None,
    overrides: Optional[Mapping[str, Any]] = None,
) -> RunConfig:
    """
    Resolve the run configuration.

    Parameters
    ----------
    path : Path | str | None
        JSON config file; its values override the environment.
    overrides : Mapping[str, Any] | None
        Nested values from command-line flags (highest priority).

    Raises
    ------
    ConfigError
        If the file cannot be read or parsed, or validation fails.
    """
    values: Dict[str, Any] = {}
    if path is not None:
        cfg_path = Path(path)
        try:
            loaded = json.loads(cfg_path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"Cannot read config file {cfg_path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"Config file {cfg_path} is not valid JSON: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError(f"Config file {cfg_path} must contain a JSON object.")
        values = loaded
    if overrides:
        values = _deep_merge(values, overrides)

    try:
        return RunConfig(**values)
    except (ValidationError, ValueError) as exc:
        raise ConfigError(f"Invalid configuration: {exc}") from exc
