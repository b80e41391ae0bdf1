"""
Error Decomposition, Latent Health and Test-Set Metrics

Per DOF, the prediction error splits into an autoencoder part and a GP part:

    e_f  = |mean - u|     (framework)
    e_r  = |u_r - u|      (reconstruction, u_r = decode(encode(u)))
    e_gp = |mean - u_r|   (GP)

so e_f <= e_r + e_gp holds elementwise. A latent component is healthy when
its true value (the encoded reference solution) lies within two predictive
standard deviations of the predicted mean, boundary included; a case is
correct when all of its latent components are healthy.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Tuple

import numpy as np

from ..core.errors import ContractViolation, ShapeError
from ..fem.dataset import Dataset
from .pipeline import PredictionField, SurrogateModel, predict_many, reconstruct, true_latents

logger = logging.getLogger("surrogate.metrics")

HEALTH_SIGMAS = 2.0


# ---------------------------------------------------------------------
# Error decomposition
# ---------------------------------------------------------------------

@dataclass(frozen=True)
class ErrorReport:
    """Per-DOF framework, reconstruction and GP errors."""

    e_f: np.ndarray
    e_r: np.ndarray
    e_gp: np.ndarray

    def triangle_holds(self, tol: float = 1e-12) -> bool:
        return bool(np.all(self.e_f <= self.e_r + self.e_gp + tol))


def error_decompose(
    pred: PredictionField | np.ndarray,
    u_fem: np.ndarray,
    u_r: np.ndarray,
) -> ErrorReport:
    """Split the prediction error of one case into reconstruction and GP parts."""
    mean = np.asarray(pred.mean if isinstance(pred, PredictionField) else pred, dtype=float)
    u = np.asarray(u_fem, dtype=float)
    ur = np.asarray(u_r, dtype=float)
    if not (mean.shape == u.shape == ur.shape):
        raise ShapeError(
            f"Prediction {mean.shape}, reference {u.shape} and reconstruction {ur.shape} differ."
        )
    return ErrorReport(e_f=np.abs(mean - u), e_r=np.abs(ur - u), e_gp=np.abs(mean - ur))


# ---------------------------------------------------------------------
# Latent health
# ---------------------------------------------------------------------

@dataclass(frozen=True)
class HealthEntry:
    healthy: np.ndarray
    z_scores: np.ndarray

    @property
    def correct(self) -> bool:
        return bool(np.all(self.healthy))

    @property
    def healthy_fraction(self) -> float:
        return float(np.mean(self.healthy)) if self.healthy.size else 1.0


def classify_latent_health(
    latent_means: np.ndarray,
    latent_vars: np.ndarray,
    latent_true: np.ndarray,
) -> HealthEntry:
    """
    Flag each latent component as healthy when |true - mean| <= 2 sqrt(var).

    Raises
    ------
    ShapeError
        If the three vectors differ in length.
    ContractViolation
        If any variance is negative.
    """
    m = np.asarray(latent_means, dtype=float).reshape(-1)
    v = np.asarray(latent_vars, dtype=float).reshape(-1)
    t = np.asarray(latent_true, dtype=float).reshape(-1)
    if not (m.shape == v.shape == t.shape):
        raise ShapeError("latent means, variances and true values must have equal length.")
    if np.any(v < 0):
        raise ContractViolation("Latent variances must be non-negative.")

    dev = np.abs(t - m)
    sd = np.sqrt(v)
    healthy = dev <= HEALTH_SIGMAS * sd
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(sd > 0, dev / sd, np.where(dev > 0, np.inf, 0.0))
    return HealthEntry(healthy=healthy, z_scores=z)


@dataclass(frozen=True)
class HealthReport:
    """Health entries for a set of cases and their aggregates."""

    entries: Tuple[HealthEntry, ...] = ()

    @property
    def n_cases(self) -> int:
        return len(self.entries)

    @property
    def healthy_percent(self) -> float:
        """Share of healthy latent components over all cases, in percent."""
        if not self.entries:
            return 0.0
        flags = np.concatenate([e.healthy for e in self.entries])
        return 100.0 * float(np.mean(flags)) if flags.size else 100.0

    @property
    def correct_percent(self) -> float:
        """Share of cases whose latents are all healthy, in percent."""
        if not self.entries:
            return 0.0
        return 100.0 * sum(e.correct for e in self.entries) / len(self.entries)

    def per_component_percent(self) -> np.ndarray:
        if not self.entries:
            return np.zeros(0)
        return 100.0 * np.mean(np.stack([e.healthy for e in self.entries]), axis=0)


# ---------------------------------------------------------------------
# Test-set metrics
# ---------------------------------------------------------------------

@dataclass(frozen=True)
class TestMetrics:
    """Mean error per case, its average, corrected std and the max per-DOF error."""

    __test__ = False

    case_errors: np.ndarray
    mean_error: float
    std_error: float
    max_error: float
    max_displacement: float

    @property
    def n_cases(self) -> int:
        return int(self.case_errors.size)

    @property
    def relative_mean_error(self) -> float:
        """Average error as a fraction of the largest nodal displacement."""
        return self.mean_error / self.max_displacement if self.max_displacement > 0 else 0.0

    def as_dict(self) -> Dict[str, Any]:
        return {
            "n_cases": self.n_cases,
            "mean_error": self.mean_error,
            "std_error": self.std_error,
            "max_error": self.max_error,
            "max_displacement": self.max_displacement,
            "relative_mean_error": self.relative_mean_error,
        }


def max_nodal_displacement(displacements: np.ndarray) -> float:
    """Largest nodal displacement magnitude over interleaved (u_x, u_y) fields."""
    u = np.atleast_2d(np.asarray(displacements, dtype=float))
    if u.size == 0:
        return 0.0
    if u.shape[1] % 2:
        return float(np.max(np.abs(u)))
    return float(np.max(np.linalg.norm(u.reshape(u.shape[0], -1, 2), axis=2)))


def compute_test_metrics(pred_means: np.ndarray, u_fem: np.ndarray) -> TestMetrics:
    """
    Aggregate error metrics over M test cases.

    Parameters
    ----------
    pred_means : np.ndarray
        (M, F) predicted mean fields.
    u_fem : np.ndarray
        (M, F) reference fields.

    Returns
    -------
    TestMetrics
        e_m = mean_i |pred - u| per case; average, (M - 1)-denominator std
        (0 when M = 1) and the max per-DOF error over all cases.
    """
    pred = np.atleast_2d(np.asarray(pred_means, dtype=float))
    ref = np.atleast_2d(np.asarray(u_fem, dtype=float))
    if pred.shape != ref.shape:
        raise ShapeError(f"Predictions {pred.shape} and references {ref.shape} differ.")
    if pred.shape[0] == 0:
        raise ShapeError("Test metrics need at least one case.")

    abs_err = np.abs(pred - ref)
    case_errors = abs_err.mean(axis=1)
    std = float(np.std(case_errors, ddof=1)) if case_errors.size > 1 else 0.0
    return TestMetrics(
        case_errors=case_errors,
        mean_error=float(case_errors.mean()),
        std_error=std,
        max_error=float(abs_err.max()),
        max_displacement=max_nodal_displacement(ref),
    )


@dataclass(frozen=True)
class Evaluation:
    """Everything produced by evaluating a surrogate on a dataset."""

    metrics: TestMetrics
    health: HealthReport
    errors: Tuple[ErrorReport, ...]
    predictions: Tuple[PredictionField, ...]
    latent_true: np.ndarray = field(repr=False, default_factory=lambda: np.zeros((0, 0)))

    def triangle_violations(self) -> int:
        return sum(not e.triangle_holds() for e in self.errors)


def evaluate_testset(model: SurrogateModel, dataset: Dataset, threads: int = 1) -> Evaluation:
    """
    Predict every case of *dataset* and compare with its reference solution.

    Health is judged against the encoded reference displacements.
    """
    if len(dataset) == 0:
        raise ShapeError("Cannot evaluate an empty dataset.")
    if dataset.input_dim != model.input_dim or dataset.field_dim != model.field_dim:
        raise ShapeError(
            f"Dataset dimensions ({dataset.input_dim}, {dataset.field_dim}) do not match "
            f"the model ({model.input_dim}, {model.field_dim})."
        )

    predictions = predict_many(model, dataset.forces, threads=threads)
    u_fem = dataset.displacements
    u_r = np.atleast_2d(reconstruct(model, u_fem))
    z_true = true_latents(model, u_fem)

    errors = tuple(
        error_decompose(p, u_fem[i], u_r[i]) for i, p in enumerate(predictions)
    )
    health = HealthReport(tuple(
        classify_latent_health(p.latent_means, p.latent_vars, z_true[i])
        for i, p in enumerate(predictions)
    ))
    metrics = compute_test_metrics(np.stack([p.mean for p in predictions]), u_fem)

    logger.info(
        "Evaluated %d cases: mean error %.3e (std %.3e, max %.3e), healthy %.1f%%, correct %.1f%%",
        metrics.n_cases, metrics.mean_error, metrics.std_error, metrics.max_error,
        health.healthy_percent, health.correct_percent,
    )
    return Evaluation(
        metrics=metrics,
        health=health,
        errors=errors,
        predictions=tuple(predictions),
        latent_true=z_true,
    )


# ---------------------------------------------------------------------
# Showcase of the largest-displacement case
# ---------------------------------------------------------------------

def _nodal_norm(values: np.ndarray) -> np.ndarray:
    return np.linalg.norm(np.asarray(values).reshape(-1, 2), axis=1)


@dataclass(frozen=True)
class ShowcaseReport:
    """Node-wise fields of the test case with the largest reference displacement."""

    case_index: int
    force: np.ndarray
    nodal: Dict[str, np.ndarray]
    gp_error_within_band: float

    def rows(self) -> List[Dict[str, float]]:
        n = next(iter(self.nodal.values())).size
        return [
            {"node": i, **{k: float(v[i]) for k, v in self.nodal.items()}}
            for i in range(n)
        ]


def showcase_case(evaluation: Evaluation, dataset: Dataset) -> ShowcaseReport:
    """
    Pick the case with the largest nodal FEM displacement and tabulate its
    prediction, reference, error components and uncertainty per node.

    ``gp_error_within_band`` is the share of DOFs with e_gp <= 2 std.
    """
    if dataset.field_dim % 2:
        raise ShapeError("Showcase needs interleaved 2D nodal displacements.")
    peaks = [max_nodal_displacement(u) for u in dataset.displacements]
    idx = int(np.argmax(peaks))
    pred = evaluation.predictions[idx]
    err = evaluation.errors[idx]
    band = HEALTH_SIGMAS * pred.std
    nodal = {
        "predicted": _nodal_norm(pred.mean),
        "reference": _nodal_norm(dataset.displacements[idx]),
        "e_f": _nodal_norm(err.e_f),
        "e_r": _nodal_norm(err.e_r),
        "e_gp": _nodal_norm(err.e_gp),
        "two_std": _nodal_norm(band),
        "variance": _nodal_norm(pred.variance),
    }
    return ShowcaseReport(
        case_index=idx,
        force=dataset.forces[idx].copy(),
        nodal=nodal,
        gp_error_within_band=float(np.mean(err.e_gp <= band)),
    )
