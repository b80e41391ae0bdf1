"""
Two-Stage Surrogate Pipeline

Stage 1 trains the autoencoder on displacements only. Stage 2 encodes the
training displacements and fits one GP per latent component on
(force, latent) pairs; the forces are passed through unchanged.

Prediction draws S latent samples from the independent Gaussian posteriors,
decodes each and summarizes the decoded fields by their sample mean and
corrected sample standard deviation.

Monte-Carlo draws use a counter-based Philox generator keyed by
(mc_seed, case index), so predictions over a test set are reproducible in any
evaluation order.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from ..autoencoder import (
    AutoencoderModel,
    AutoencoderSpec,
    LatentDataset,
    TrainConfig,
    TrainingHistory,
    decode,
    encode,
    encode_dataset,
    train,
)
from ..core.errors import ShapeError, SurrogateError
from ..fem.dataset import Dataset
from ..gpr import GPConfig, LatentGPBundle, fit_bundle, predict_bundle

logger = logging.getLogger("surrogate.pipeline")


class SurrogateConfig(BaseModel):
    """Monte-Carlo decoding settings."""

    sample_count: int = Field(default=300, ge=2, description="Latent samples S per prediction.")
    mc_seed: int = Field(default=0, ge=0, description="Key of the Monte-Carlo sample streams.")

    model_config = ConfigDict(frozen=True, extra="forbid")


@dataclass(frozen=True)
class SurrogateModel:
    """Trained autoencoder plus latent GP bundle."""

    autoencoder: AutoencoderModel
    bundle: LatentGPBundle
    sample_count: int = 300
    mc_seed: int = 0

    def __post_init__(self) -> None:
        if self.bundle.latent_dim != self.autoencoder.spec.latent_dim:
            raise ShapeError(
                f"GP bundle has {self.bundle.latent_dim} components, autoencoder latent "
                f"dimension is {self.autoencoder.spec.latent_dim}."
            )
        if self.sample_count < 2:
            raise ValueError("sample_count must be at least 2.")

    @property
    def input_dim(self) -> int:
        return self.bundle.input_dim

    @property
    def field_dim(self) -> int:
        return self.autoencoder.spec.input_dim


@dataclass(frozen=True)
class PredictionField:
    """Per-DOF predictive mean/std and the latent posterior they came from."""

    mean: np.ndarray
    std: np.ndarray
    latent_means: np.ndarray
    latent_vars: np.ndarray

    @property
    def variance(self) -> np.ndarray:
        return self.std**2

    @property
    def latent_std(self) -> np.ndarray:
        return np.sqrt(self.latent_vars)


@dataclass(frozen=True)
class TrainingReport:
    """Losses of stage 1 and per-latent GP fits of stage 2."""

    autoencoder_history: TrainingHistory | None = None
    gp_summary: List[Dict[str, Any]] = field(default_factory=list)

    def as_dict(self) -> Dict[str, Any]:
        hist = self.autoencoder_history
        return {
            "autoencoder": None if hist is None else {
                "final_loss": hist.final_loss,
                "final_validation_loss": hist.final_validation_loss,
                "reconstruction_error": hist.reconstruction_error,
                "epochs": len(hist.epoch_losses),
                "steps": hist.steps,
            },
            "gp": list(self.gp_summary),
        }


def _label_stage(exc: SurrogateError, stage: str) -> SurrogateError:
    if exc.stage is None:
        exc.stage = stage
    return exc


# ---------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------

def train_autoencoder_stage(
    dataset: Dataset,
    spec: AutoencoderSpec,
    config: TrainConfig,
) -> Tuple[AutoencoderModel, TrainingHistory]:
    """Stage 1: displacements only."""
    if len(dataset) == 0:
        raise ShapeError("Training dataset is empty.", stage="autoencoder")
    try:
        return train(dataset.displacements, spec, config)
    except SurrogateError as exc:
        raise _label_stage(exc, "autoencoder")


def train_gp_stage(
    autoencoder: AutoencoderModel,
    dataset: Dataset,
    gp_config: GPConfig,
) -> Tuple[LatentGPBundle, LatentDataset]:
    """Stage 2: encode the training displacements and fit the latent GPs."""
    try:
        latent_data = encode_dataset(autoencoder, dataset)
        return fit_bundle(latent_data, gp_config), latent_data
    except SurrogateError as exc:
        raise _label_stage(exc, "gp")


def train_pipeline(
    dataset: Dataset,
    ae_spec: AutoencoderSpec,
    ae_config: TrainConfig | None = None,
    gp_config: GPConfig | None = None,
    surrogate_config: SurrogateConfig | None = None,
) -> Tuple[SurrogateModel, TrainingReport]:
    """
    Run both training stages on a force-displacement dataset.

    Returns
    -------
    Tuple[SurrogateModel, TrainingReport]

    Raises
    ------
    SurrogateError
        Any stage failure, with ``stage`` set to ``autoencoder`` or ``gp``.
    """
    ae_config = ae_config or TrainConfig()
    gp_config = gp_config or GPConfig()
    surrogate_config = surrogate_config or SurrogateConfig()

    logger.info("Stage 1/2: training autoencoder on %d samples", len(dataset))
    autoencoder, history = train_autoencoder_stage(dataset, ae_spec, ae_config)

    logger.info("Stage 2/2: fitting %d latent GPs", ae_spec.latent_dim)
    bundle, _ = train_gp_stage(autoencoder, dataset, gp_config)

    model = SurrogateModel(
        autoencoder=autoencoder,
        bundle=bundle,
        sample_count=surrogate_config.sample_count,
        mc_seed=surrogate_config.mc_seed,
    )
    return model, TrainingReport(autoencoder_history=history, gp_summary=bundle.summary())


# ---------------------------------------------------------------------
# Prediction
# ---------------------------------------------------------------------

def sample_generator(mc_seed: int, case_index: int) -> np.random.Generator:
    """Counter-based stream dedicated to one prediction case."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([mc_seed, case_index])))


def propagate_latent_distribution(
    autoencoder: AutoencoderModel,
    latent_means: np.ndarray,
    latent_vars: np.ndarray,
    sample_count: int,
    rng: np.random.Generator,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Push independent Gaussian latents through the decoder by sampling.

    Returns
    -------
    Tuple[np.ndarray, np.ndarray]
        Per-DOF sample mean and (S - 1)-denominator sample std.
    """
    m = np.asarray(latent_means, dtype=float)
    v = np.asarray(latent_vars, dtype=float)
    if m.shape != v.shape or m.shape != (autoencoder.spec.latent_dim,):
        raise ShapeError("Latent means and variances must both have length L.")
    if np.any(v < 0):
        raise ValueError("Latent variances must be non-negative.")
    if sample_count < 2:
        raise ValueError("At least two samples are required for a sample std.")

    if not np.any(v):
        return decode(autoencoder, m), np.zeros(autoencoder.spec.input_dim)

    eps = rng.standard_normal((sample_count, m.size))
    decoded = decode(autoencoder, m + np.sqrt(v) * eps)
    return decoded.mean(axis=0), decoded.std(axis=0, ddof=1)


def predict_full(
    model: SurrogateModel,
    force: np.ndarray,
    case_index: int = 0,
) -> PredictionField:
    """
    Probabilistic full-field prediction for one force vector.

    Raises
    ------
    ShapeError
        If ``force`` does not match the bundle input dimension.
    """
    f = np.asarray(force, dtype=float)
    if f.shape != (model.input_dim,):
        raise ShapeError(f"Force vector must have shape ({model.input_dim},), got {f.shape}.")
    latent_means, latent_vars = predict_bundle(model.bundle, f)
    mean, std = propagate_latent_distribution(
        model.autoencoder,
        latent_means,
        latent_vars,
        model.sample_count,
        sample_generator(model.mc_seed, case_index),
    )
    return PredictionField(
        mean=mean,
        std=std,
        latent_means=np.asarray(latent_means),
        latent_vars=np.asarray(latent_vars),
    )


def predict_many(
    model: SurrogateModel,
    forces: np.ndarray,
    threads: int = 1,
) -> List[PredictionField]:
    """predict_full over a batch; case i always uses sample stream i."""
    batch = np.atleast_2d(np.asarray(forces, dtype=float))

    def run(i: int) -> PredictionField:
        return predict_full(model, batch[i], case_index=i)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(run, range(batch.shape[0])))
    return [run(i) for i in range(batch.shape[0])]


def reconstruct(model: SurrogateModel | AutoencoderModel, u: np.ndarray) -> np.ndarray:
    """u_r = decode(encode(u))."""
    ae = model.autoencoder if isinstance(model, SurrogateModel) else model
    return decode(ae, encode(ae, u))


def true_latents(model: SurrogateModel, displacements: np.ndarray) -> np.ndarray:
    """Latent coordinates of reference displacement fields."""
    return np.atleast_2d(encode(model.autoencoder, np.asarray(displacements, dtype=float)))
