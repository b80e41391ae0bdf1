"""
Missing-Region Experiment

Training cases whose in-plane force magnitude ||(f_x, f_y)|| falls below a
mask radius are removed, the pipeline is retrained on the rest, and the
latent predictive uncertainty is recorded

- along a 1D force sweep that extends beyond the training range, with the
  true latents obtained by solving the FEM problem at every sweep point, and
- over a random scatter of forces inside the training range, split into
  points inside the masked disk and points in the supported annulus.

Standardized std divides each latent std by that latent GP's target std,
so components of different magnitude can be averaged.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Literal, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from ..autoencoder import AutoencoderSpec, TrainConfig, encode
from ..core.errors import InvertedElement, NonConvergence
from ..fem import LoadKind, LoadSpec, MaterialParams, Mesh2D, SolveSettings, solve_static
from ..fem.dataset import Dataset
from ..gpr import GPConfig, predict_bundle
from .pipeline import SurrogateConfig, SurrogateModel, train_pipeline

logger = logging.getLogger("surrogate.experiments")


class ExperimentConfig(BaseModel):
    """Masking and query settings of the missing-region experiment."""

    mask_ratio: float = Field(
        default=0.4,
        ge=0.0,
        le=1.0,
        description="Mask radius as a fraction of the force half-range.",
    )
    sweep_extension: float = Field(
        default=1.2,
        ge=1.0,
        description="Sweep half-length as a multiple of the force half-range.",
    )
    sweep_points: int = Field(default=25, ge=3, description="Points along the force sweep.")
    sweep_component: Literal["x", "y"] = Field(
        default="y",
        description="Force component varied along the sweep (the other is zero).",
    )
    sweep_position: float | None = Field(
        default=None,
        ge=0.0,
        description="Load position for point-load sweeps; None uses the farthest loadable node.",
    )
    scatter_points: int = Field(default=200, ge=1, description="Random query forces.")
    seed: int = Field(default=0, ge=0, description="Seed of the scatter query draw.")

    model_config = ConfigDict(frozen=True, extra="forbid")


def in_plane_magnitude(forces: np.ndarray) -> np.ndarray:
    """||(f_x, f_y)|| of each force row (the first two components)."""
    f = np.atleast_2d(np.asarray(forces, dtype=float))
    return np.linalg.norm(f[:, :2], axis=1)


def mask_dataset(dataset: Dataset, radius: float) -> Dataset:
    """Drop the cases whose in-plane force magnitude is below *radius*."""
    keep = np.flatnonzero(in_plane_magnitude(dataset.forces) >= radius)
    masked = dataset.subset(keep)
    return Dataset(
        forces=masked.forces,
        displacements=masked.displacements,
        load_kind=masked.load_kind,
        metadata={**masked.metadata, "mask_radius": radius},
    )


@dataclass(frozen=True)
class MissingRegionResult:
    """Sweep and scatter tables plus region summaries (standardized std)."""

    mask_radius: float
    force_half_range: float
    n_train: int
    n_removed: int
    sweep: List[Dict[str, Any]] = field(default_factory=list)
    scatter: List[Dict[str, Any]] = field(default_factory=list)
    summary: Dict[str, float] = field(default_factory=dict)


def _latent_spread(
    model: SurrogateModel, forces: np.ndarray
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    means, variances = predict_bundle(model.bundle, forces)
    target_std = np.array([gp.standardizer.std for gp in model.bundle.gps])
    std = np.sqrt(variances)
    return means, std, std / target_std


def _latent_columns(prefix: str, values: np.ndarray) -> Dict[str, float]:
    return {f"{prefix}_{l}": float(v) for l, v in enumerate(values)}


def _sweep_forces(
    load_kind: LoadKind,
    values: np.ndarray,
    component: str,
    position: float,
) -> np.ndarray:
    axis = 0 if component == "x" else 1
    rows = []
    for v in values:
        fxy = [0.0, 0.0]
        fxy[axis] = float(v)
        rows.append(fxy + [position] if load_kind is LoadKind.POINT else fxy)
    return np.asarray(rows)


def _scatter_forces(
    dataset: Dataset,
    mesh: Mesh2D,
    half_range: float,
    count: int,
    seed: int,
) -> np.ndarray:
    rng = np.random.default_rng([seed, 2])
    fxy = rng.uniform(-half_range, half_range, size=(count, 2))
    if dataset.load_kind is LoadKind.BODY:
        return fxy
    distances = mesh.loadable_distances()
    d = distances[rng.integers(distances.size, size=count)]
    return np.column_stack([fxy, d])


def missing_region_experiment(
    dataset: Dataset,
    mesh: Mesh2D,
    material: MaterialParams,
    ae_spec: AutoencoderSpec,
    ae_config: TrainConfig,
    gp_config: GPConfig,
    surrogate_config: SurrogateConfig | None = None,
    solver_settings: SolveSettings | None = None,
    config: ExperimentConfig | None = None,
    force_half_range: float | None = None,
) -> Tuple[MissingRegionResult, SurrogateModel]:
    """
    Retrain on a dataset with the low-magnitude force disk removed and query
    the latent uncertainty inside, around and beyond the training region.

    Parameters
    ----------
    dataset : Dataset
        Full training dataset (before masking).
    mesh, material : Mesh2D, MaterialParams
        Used to solve for the true latents along the sweep.
    ae_spec, ae_config, gp_config, surrogate_config
        Pipeline settings for the retrained model.
    solver_settings : SolveSettings | None
        Controls for the sweep FEM solves.
    config : ExperimentConfig | None
        Mask and query settings.
    force_half_range : float | None
        Half-width of the uniform force range; read from the dataset metadata
        when omitted.

    Returns
    -------
    Tuple[MissingRegionResult, SurrogateModel]
    """
    config = config or ExperimentConfig()
    solver_settings = solver_settings or SolveSettings()
    if force_half_range is None:
        low, high = dataset.metadata.get("force_range", [None, None])
        if high is None:
            raise ValueError("force_half_range is required when the dataset has no force_range.")
        force_half_range = max(abs(float(low)), abs(float(high)))
    radius = config.mask_ratio * force_half_range

    masked = mask_dataset(dataset, radius)
    removed = len(dataset) - len(masked)
    logger.info(
        "Missing-region experiment: radius %.4g removes %d of %d training cases",
        radius, removed, len(dataset),
    )
    model, _ = train_pipeline(masked, ae_spec, ae_config, gp_config, surrogate_config)

    # -- sweep -------------------------------------------------------
    position = config.sweep_position
    if position is None:
        position = float(mesh.loadable_distances().max())
    extent = config.sweep_extension * force_half_range
    sweep_values = np.linspace(-extent, extent, config.sweep_points)
    sweep_forces = _sweep_forces(dataset.load_kind, sweep_values, config.sweep_component, position)
    means, std, std_std = _latent_spread(model, sweep_forces)

    sweep_rows: List[Dict[str, Any]] = []
    for i, value in enumerate(sweep_values):
        try:
            load = LoadSpec.from_vector(dataset.load_kind, sweep_forces[i])
            solved = solve_static(mesh, material, load, solver_settings)
            z_true = encode(model.autoencoder, solved.values)
            error = np.abs(z_true - means[i])
        except (NonConvergence, InvertedElement) as exc:
            logger.warning("Sweep point %.4g has no FEM reference: %s", value, exc)
            z_true = np.full(means.shape[1], np.nan)
            error = np.full(means.shape[1], np.nan)
        magnitude = abs(float(value))
        region = (
            "masked" if magnitude < radius
            else "extrapolated" if magnitude > force_half_range
            else "supported"
        )
        sweep_rows.append({
            "force": float(value),
            "region": region,
            **_latent_columns("mean", means[i]),
            **_latent_columns("std", std[i]),
            **_latent_columns("variance", std[i] ** 2),
            **_latent_columns("std_standardized", std_std[i]),
            **_latent_columns("true", z_true),
            **_latent_columns("abs_error", error),
        })

    # -- scatter -----------------------------------------------------
    scatter_forces = _scatter_forces(
        dataset, mesh, force_half_range, config.scatter_points, config.seed
    )
    _, s_std, s_std_std = _latent_spread(model, scatter_forces)
    inside = in_plane_magnitude(scatter_forces) < radius
    scatter_rows = [
        {
            "fx": float(scatter_forces[i, 0]),
            "fy": float(scatter_forces[i, 1]),
            "inside_mask": bool(inside[i]),
            **_latent_columns("std", s_std[i]),
            **_latent_columns("variance", s_std[i] ** 2),
            **_latent_columns("std_standardized", s_std_std[i]),
        }
        for i in range(scatter_forces.shape[0])
    ]

    # -- summaries ---------------------------------------------------
    def region_mean(values: np.ndarray, mask: np.ndarray) -> float:
        return float(values[mask].mean()) if np.any(mask) else float("nan")

    sweep_regions = np.array([row["region"] for row in sweep_rows])
    sweep_level = std_std.mean(axis=1)
    scatter_level = s_std_std.mean(axis=1)
    supported = sweep_regions == "supported"
    extrapolated = sweep_regions == "extrapolated"
    summary = {
        "scatter_inside_mean_std": region_mean(scatter_level, inside),
        "scatter_annulus_mean_std": region_mean(scatter_level, ~inside),
        "sweep_supported_max_std": (
            float(sweep_level[supported].max()) if supported.any() else float("nan")
        ),
        "sweep_extrapolated_min_std": (
            float(min(sweep_level[0], sweep_level[-1])) if extrapolated.any() else float("nan")
        ),
        "sweep_masked_mean_std": region_mean(sweep_level, sweep_regions == "masked"),
    }
    inside_mean = summary["scatter_inside_mean_std"]
    annulus_mean = summary["scatter_annulus_mean_std"]
    summary["inside_to_annulus_ratio"] = (
        inside_mean / annulus_mean if annulus_mean and np.isfinite(inside_mean) else float("nan")
    )

    result = MissingRegionResult(
        mask_radius=radius,
        force_half_range=force_half_range,
        n_train=len(masked),
        n_removed=removed,
        sweep=sweep_rows,
        scatter=scatter_rows,
        summary=summary,
    )
    logger.info("Missing-region summary: %s", summary)
    return result, model
