"""
Independent GPs Per Latent Component

One GP per latent dimension, all sharing the same (scaled) force inputs.
Each force component is mapped affinely onto [0, 1] using the training range
before fitting, so a single isotropic length scale is meaningful even when
the inputs mix units (forces and a load position).
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from ..autoencoder.training import LatentDataset
from ..core.errors import CholeskyFailure, OptimizationFailure, ShapeError
from .model import NOISE_FLOOR, GPModel, fit, stack_predictions

logger = logging.getLogger("surrogate.gpr")


class GPConfig(BaseModel):
    """Hyperparameter search settings shared by every latent component."""

    restarts: int = Field(default=5, ge=0, description="Random restarts per latent GP.")
    noise_floor: float = Field(
        default=NOISE_FLOOR,
        gt=0,
        description="Lower bound on the noise variance (standardized units).",
    )
    max_iter: int = Field(default=500, ge=1, description="Optimizer iterations per restart.")
    scale_inputs: bool = Field(
        default=True,
        description="Map each input component to [0, 1] using the training range.",
    )
    seed: int = Field(default=0, ge=0, description="Seed for restart perturbations.")
    threads: int = Field(default=1, ge=1, description="Latent components fitted concurrently.")

    model_config = ConfigDict(frozen=True, extra="forbid")


@dataclass(frozen=True)
class InputScaler:
    """x_scaled = (x - lower) / span, with unit span for constant components."""

    lower: np.ndarray
    span: np.ndarray

    @classmethod
    def identity(cls, dim: int) -> InputScaler:
        return cls(lower=np.zeros(dim), span=np.ones(dim))

    @classmethod
    def fit(cls, inputs: np.ndarray) -> InputScaler:
        lo = inputs.min(axis=0)
        span = inputs.max(axis=0) - lo
        return cls(lower=lo, span=np.where(span > 0, span, 1.0))

    def transform(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.lower) / self.span


@dataclass(frozen=True)
class LatentGPBundle:
    """L independent GPs over the same inputs, in latent component order."""

    gps: Tuple[GPModel, ...]
    input_scaler: InputScaler

    def __post_init__(self) -> None:
        if not self.gps:
            raise ShapeError("A bundle needs at least one GP.")
        first = self.gps[0].train_inputs
        for gp in self.gps[1:]:
            if gp.train_inputs.shape != first.shape or not np.array_equal(gp.train_inputs, first):
                raise ShapeError("All bundle members must share identical training inputs.")

    @property
    def input_dim(self) -> int:
        return self.gps[0].input_dim

    @property
    def latent_dim(self) -> int:
        return len(self.gps)

    @property
    def degenerate_components(self) -> List[int]:
        return [i for i, gp in enumerate(self.gps) if gp.degenerate]

    def summary(self) -> List[dict]:
        """Per-latent hyperparameters and achieved log marginal likelihood."""
        return [
            {
                "component": i,
                "variance": gp.kernel.variance,
                "length_scale": gp.kernel.length_scale,
                "noise": gp.noise,
                "lml": gp.lml,
                "target_mean": gp.standardizer.mean,
                "target_std": gp.standardizer.std,
                "degenerate": gp.degenerate,
            }
            for i, gp in enumerate(self.gps)
        ]


def _component_seed(seed: int, component: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([seed, component])


def fit_bundle(latent_data: LatentDataset, config: GPConfig | None = None) -> LatentGPBundle:
    """
    Fit one GP per latent component on (forces, latents).

    Raises
    ------
    ShapeError
        On inconsistent or empty data.
    CholeskyFailure, OptimizationFailure
        Re-raised with the failing latent component index attached.
    """
    config = config or GPConfig()
    F = np.atleast_2d(np.asarray(latent_data.forces, dtype=float))
    Z = np.atleast_2d(np.asarray(latent_data.latents, dtype=float))
    if F.shape[0] != Z.shape[0] or F.shape[0] == 0:
        raise ShapeError("Latent dataset must be nonempty with matching force/latent rows.")

    scaler = InputScaler.fit(F) if config.scale_inputs else InputScaler.identity(F.shape[1])
    X = scaler.transform(F)

    def fit_component(l: int) -> GPModel:
        try:
            return fit(
                X,
                Z[:, l],
                restarts=config.restarts,
                seed=_component_seed(config.seed, l),
                noise_floor=config.noise_floor,
                max_iter=config.max_iter,
            )
        except CholeskyFailure as exc:
            raise CholeskyFailure(f"latent component {l}: {exc}", component=l) from exc
        except OptimizationFailure as exc:
            raise OptimizationFailure(f"latent component {l}: {exc}", component=l) from exc

    logger.info(
        "Fitting %d latent GPs on %d samples (restarts=%d, threads=%d)",
        Z.shape[1], F.shape[0], config.restarts, config.threads,
    )
    components = range(Z.shape[1])
    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            gps = tuple(pool.map(fit_component, components))
    else:
        gps = tuple(fit_component(l) for l in components)

    bundle = LatentGPBundle(gps=gps, input_scaler=scaler)
    for row in bundle.summary():
        logger.info(
            "latent %d: variance=%.3e length_scale=%.3e noise=%.3e lml=%.3f%s",
            row["component"], row["variance"], row["length_scale"], row["noise"], row["lml"],
            " (degenerate)" if row["degenerate"] else "",
        )
    return bundle


def predict_bundle(
    bundle: LatentGPBundle,
    forces: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Latent means and variances for one force vector (D,) -> (L,), (L,)
    or a batch (n, D) -> (n, L), (n, L).
    """
    arr = np.asarray(forces, dtype=float)
    single = arr.ndim == 1
    xs = arr[None, :] if single else arr
    if xs.ndim != 2 or xs.shape[1] != bundle.input_dim:
        raise ShapeError(
            f"Expected force vectors of dimension {bundle.input_dim}, got {arr.shape}."
        )
    means, variances = stack_predictions(bundle.gps, bundle.input_scaler.transform(xs))
    if single:
        return means[0], variances[0]
    return means, variances
