"""
Exact Gaussian-Process Regression

Single-output GP with a zero prior mean, a stationary kernel and Gaussian
observation noise. Targets are standardized before fitting; hyperparameters
(signal variance, length scale, noise variance) maximize the log marginal
likelihood in log space with analytic gradients, from a fixed initial point
plus seeded random restarts.

Design Goals
------------
- Every quantity goes through the Cholesky factor of K + sigma^2 I; no
  explicit inverse is formed outside the gradient trace term.
- When the factorization fails, a diagonal jitter is escalated from 1e-10 to
  1e-6 before giving up with CholeskyFailure.
- A fitted model is immutable and caches the factor and alpha, so
  predictions are pure functions safe to call from many threads.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
import scipy.linalg as la
from scipy.optimize import minimize

from ..core.errors import CholeskyFailure, OptimizationFailure, ShapeError
from .kernels import Matern52Kernel, StationaryKernel, pairwise_distances

logger = logging.getLogger("surrogate.gpr")

NOISE_FLOOR = 1e-8
JITTER_LADDER = (0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6)
LOG_2PI = math.log(2.0 * math.pi)

INITIAL_VARIANCE = 1.0
INITIAL_NOISE = 0.1
RESTART_SPREAD = 2.0


# ---------------------------------------------------------------------
# Standardization
# ---------------------------------------------------------------------

@dataclass(frozen=True)
class Standardizer:
    """Affine map of raw targets to zero mean and unit variance."""

    mean: float = 0.0
    std: float = 1.0

    @classmethod
    def fit(cls, targets: np.ndarray) -> Standardizer:
        y = np.asarray(targets, dtype=float)
        std = float(np.std(y))
        return cls(mean=float(np.mean(y)), std=std if std > 0 else 1.0)

    def transform(self, y: np.ndarray) -> np.ndarray:
        return (np.asarray(y, dtype=float) - self.mean) / self.std

    def inverse_mean(self, y_s: np.ndarray) -> np.ndarray:
        return np.asarray(y_s) * self.std + self.mean

    def inverse_variance(self, v_s: np.ndarray) -> np.ndarray:
        return np.asarray(v_s) * self.std**2


# ---------------------------------------------------------------------
# Cholesky factorization with jitter escalation
# ---------------------------------------------------------------------

def _factorize(K_noisy: np.ndarray) -> Tuple[np.ndarray, float]:
    """Lower Cholesky factor of K_noisy (+ escalating jitter) and the jitter used."""
    eye = np.eye(K_noisy.shape[0])
    for jitter in JITTER_LADDER:
        try:
            L = la.cholesky(K_noisy + jitter * eye, lower=True, check_finite=True)
        except (la.LinAlgError, ValueError):
            continue
        if jitter:
            logger.warning("Cholesky needed diagonal jitter %.0e", jitter)
        return L, jitter
    raise CholeskyFailure(
        f"K + sigma^2 I is not positive definite even with jitter {JITTER_LADDER[-1]:.0e}."
    )


def _check_training_data(inputs: np.ndarray, targets: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    X = np.atleast_2d(np.asarray(inputs, dtype=float))
    y = np.asarray(targets, dtype=float).reshape(-1)
    if X.shape[0] != y.shape[0]:
        raise ShapeError(f"{X.shape[0]} inputs but {y.shape[0]} targets.")
    if X.shape[0] == 0:
        raise ShapeError("At least one training point is required.")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ShapeError("Training inputs and targets must be finite.")
    return X, y


def _lml_terms(
    r: np.ndarray,
    y: np.ndarray,
    kernel: StationaryKernel,
    noise: float,
    with_gradient: bool,
) -> Tuple[float, np.ndarray | None]:
    n = y.shape[0]
    K = kernel.of_distance(r)
    L, jitter = _factorize(K + noise * np.eye(n))
    alpha = la.cho_solve((L, True), y)
    lml = -0.5 * float(y @ alpha) - float(np.sum(np.log(np.diag(L)))) - 0.5 * n * LOG_2PI
    if not with_gradient:
        return lml, None

    K_inv = la.cho_solve((L, True), np.eye(n))
    W = np.outer(alpha, alpha) - K_inv
    dKs: List[np.ndarray] = list(kernel.log_param_gradients(r))
    grad = [0.5 * float(np.sum(W * dK)) for dK in dKs]
    grad.append(0.5 * noise * float(np.trace(W)))
    return lml, np.asarray(grad)


def log_marginal_likelihood(
    inputs: np.ndarray,
    targets: np.ndarray,
    kernel: StationaryKernel,
    noise: float,
) -> float:
    """
    log p(y | X, theta, sigma^2) evaluated through the Cholesky factor.

    ``targets`` are used as given (no standardization is applied here).

    Raises
    ------
    CholeskyFailure
        If the covariance stays indefinite after jitter escalation.
    """
    X, y = _check_training_data(inputs, targets)
    return _lml_terms(pairwise_distances(X), y, kernel, noise, with_gradient=False)[0]


def lml_gradient(
    inputs: np.ndarray,
    targets: np.ndarray,
    kernel: StationaryKernel,
    noise: float,
) -> np.ndarray:
    """
    Gradient of the log marginal likelihood in log-parameter space.

    Returns
    -------
    np.ndarray
        (d/dlog variance, d/dlog length_scale, d/dlog noise).
    """
    X, y = _check_training_data(inputs, targets)
    grad = _lml_terms(pairwise_distances(X), y, kernel, noise, with_gradient=True)[1]
    assert grad is not None
    return grad


# ---------------------------------------------------------------------
# Model
# ---------------------------------------------------------------------

@dataclass(frozen=True)
class GPModel:
    """
    Conditioned GP ready for prediction.

    ``train_targets`` are standardized; ``chol`` and ``alpha`` belong to
    K + (noise + jitter) I. A ``degenerate`` model was fitted to constant
    targets: it predicts the constant with variance ``noise``.
    """

    kernel: Matern52Kernel
    noise: float
    train_inputs: np.ndarray
    train_targets: np.ndarray
    chol: np.ndarray
    alpha: np.ndarray
    standardizer: Standardizer
    jitter: float = 0.0
    lml: float = float("nan")
    degenerate: bool = False

    @property
    def input_dim(self) -> int:
        return int(self.train_inputs.shape[1])

    @property
    def n_train(self) -> int:
        return int(self.train_inputs.shape[0])


def condition(
    inputs: np.ndarray,
    targets: np.ndarray,
    kernel: Matern52Kernel,
    noise: float,
    standardizer: Standardizer | None = None,
) -> GPModel:
    """
    Condition a GP on data with fixed hyperparameters.

    Parameters
    ----------
    inputs : np.ndarray
        (N, D) training inputs.
    targets : np.ndarray
        (N,) raw targets.
    kernel : Matern52Kernel
        Covariance function (standardized units).
    noise : float
        Observation noise variance (standardized units).
    standardizer : Standardizer | None
        Target transform; fitted to *targets* if None.
    """
    X, y_raw = _check_training_data(inputs, targets)
    std = standardizer or Standardizer.fit(y_raw)
    return condition_standardized(X, std.transform(y_raw), kernel, noise, std)


def condition_standardized(
    inputs: np.ndarray,
    standardized_targets: np.ndarray,
    kernel: Matern52Kernel,
    noise: float,
    standardizer: Standardizer,
) -> GPModel:
    """Condition on targets that are already standardized (used when loading archives)."""
    X, y = _check_training_data(inputs, standardized_targets)
    if not noise > 0:
        raise ValueError(f"Noise variance must be positive, got {noise}.")
    r = pairwise_distances(X)
    K = kernel.of_distance(r)
    L, jitter = _factorize(K + noise * np.eye(X.shape[0]))
    alpha = la.cho_solve((L, True), y)
    lml = (
        -0.5 * float(y @ alpha)
        - float(np.sum(np.log(np.diag(L))))
        - 0.5 * X.shape[0] * LOG_2PI
    )
    return GPModel(
        kernel=kernel,
        noise=float(noise),
        train_inputs=X,
        train_targets=y,
        chol=L,
        alpha=alpha,
        standardizer=standardizer,
        jitter=jitter,
        lml=lml,
    )


def constant_model(
    inputs: np.ndarray,
    value: float,
    kernel: Matern52Kernel,
    noise: float,
) -> GPModel:
    """Degenerate model for constant targets: predicts *value* with variance *noise*."""
    X = np.atleast_2d(np.asarray(inputs, dtype=float))
    n = X.shape[0]
    return GPModel(
        kernel=kernel,
        noise=float(noise),
        train_inputs=X,
        train_targets=np.zeros(n),
        chol=np.eye(n),
        alpha=np.zeros(n),
        standardizer=Standardizer(mean=float(value), std=1.0),
        degenerate=True,
    )


def _median_distance(X: np.ndarray) -> float:
    r = pairwise_distances(X)
    off = r[np.triu_indices_from(r, k=1)]
    off = off[off > 0]
    return float(np.median(off)) if off.size else 1.0


def initial_log_params(inputs: np.ndarray) -> np.ndarray:
    """Starting point: variance 1, length scale = median pairwise distance, noise 0.1."""
    X = np.atleast_2d(np.asarray(inputs, dtype=float))
    return np.log([INITIAL_VARIANCE, _median_distance(X), INITIAL_NOISE])


def _bounds(inputs: np.ndarray, noise_floor: float) -> List[Tuple[float, float]]:
    med = _median_distance(inputs)
    return [
        (math.log(1e-6), math.log(1e6)),
        (math.log(med * 1e-3), math.log(med * 1e3)),
        (math.log(noise_floor), math.log(10.0)),
    ]


def fit(
    inputs: np.ndarray,
    targets: np.ndarray,
    restarts: int = 5,
    seed: int | np.random.SeedSequence = 0,
    noise_floor: float = NOISE_FLOOR,
    max_iter: int = 500,
) -> GPModel:
    """
    Fit a GP by maximizing the log marginal likelihood.

    The optimizer (L-BFGS-B, analytic gradient) starts from the fixed initial
    point and from ``restarts`` points perturbed uniformly by +-2 in log space.
    The best likelihood seen over every start point and every optimizer result
    is kept, so the fitted LML never falls below any start point's LML.

    Parameters
    ----------
    inputs : np.ndarray
        (N, D) training inputs, N >= 2.
    targets : np.ndarray
        (N,) raw targets.
    restarts : int
        Number of random restarts in addition to the initial point.
    seed : int | np.random.SeedSequence
        Seed for the restart perturbations.
    noise_floor : float
        Lower bound on the noise variance (standardized units).
    max_iter : int
        Iteration cap per optimizer run.

    Returns
    -------
    GPModel
        Conditioned model. Constant targets yield a ``degenerate`` model.

    Raises
    ------
    ShapeError
        If fewer than two points are given or shapes disagree.
    OptimizationFailure
        If no start point admits a Cholesky factorization.
    """
    X, y_raw = _check_training_data(inputs, targets)
    if X.shape[0] < 2:
        raise ShapeError("GP fitting needs at least two training points.")

    std = Standardizer.fit(y_raw)
    y = std.transform(y_raw)
    x0 = initial_log_params(X)

    if float(np.std(y_raw)) <= 1e-12 * max(1.0, abs(std.mean)):
        logger.warning("Targets have zero variance; returning a degenerate constant model")
        return constant_model(X, std.mean, Matern52Kernel().with_log_params(x0[:2]), noise_floor)

    r = pairwise_distances(X)
    bounds = _bounds(X, noise_floor)
    lower = np.array([b[0] for b in bounds])
    upper = np.array([b[1] for b in bounds])

    rng = np.random.default_rng(seed)
    starts = [np.clip(x0, lower, upper)]
    for _ in range(restarts):
        starts.append(np.clip(x0 + rng.uniform(-RESTART_SPREAD, RESTART_SPREAD, 3), lower, upper))

    def negative(theta: np.ndarray) -> Tuple[float, np.ndarray]:
        kernel = Matern52Kernel().with_log_params(theta[:2])
        lml, grad = _lml_terms(r, y, kernel, math.exp(theta[2]), with_gradient=True)
        assert grad is not None
        return -lml, -grad

    best_theta: np.ndarray | None = None
    best_lml = -math.inf
    for i, start in enumerate(starts):
        candidates: List[np.ndarray] = [start]
        try:
            result = minimize(
                negative,
                start,
                jac=True,
                method="L-BFGS-B",
                bounds=bounds,
                options={"maxiter": max_iter, "gtol": 1e-9, "ftol": 1e-14},
            )
            candidates.append(np.asarray(result.x, dtype=float))
        except CholeskyFailure as exc:
            logger.debug("Restart %d abandoned: %s", i, exc)

        for theta in candidates:
            try:
                value = -negative(theta)[0]
            except CholeskyFailure:
                continue
            if math.isfinite(value) and value > best_lml:
                best_lml, best_theta = value, theta

    if best_theta is None:
        raise OptimizationFailure(
            "No hyperparameter start point admitted a Cholesky factorization."
        )

    kernel = Matern52Kernel().with_log_params(best_theta[:2])
    model = condition(X, y_raw, kernel, math.exp(best_theta[2]), standardizer=std)
    logger.debug(
        "GP fit: variance=%.3e length_scale=%.3e noise=%.3e lml=%.4f",
        kernel.variance, kernel.length_scale, model.noise, model.lml,
    )
    return model


def predict(model: GPModel, x: np.ndarray) -> Tuple[np.ndarray | float, np.ndarray | float]:
    """
    Posterior mean and variance of the latent function (noise excluded).

    Accepts a single input (D,) or a batch (n, D); scalars are returned for a
    single input. Results are in raw (un-standardized) target units.

    Raises
    ------
    ShapeError
        If the input dimension does not match the training inputs.
    """
    arr = np.asarray(x, dtype=float)
    single = arr.ndim == 1
    xs = arr[None, :] if single else arr
    if xs.ndim != 2 or xs.shape[1] != model.input_dim:
        raise ShapeError(f"Expected inputs of dimension {model.input_dim}, got {arr.shape}.")

    if model.degenerate:
        mean = np.full(xs.shape[0], model.standardizer.mean)
        var = np.full(xs.shape[0], model.noise)
    else:
        k_star = model.kernel.matrix(xs, model.train_inputs)
        mean_s = k_star @ model.alpha
        v = la.solve_triangular(model.chol, k_star.T, lower=True)
        var_s = np.maximum(model.kernel.variance - np.sum(v * v, axis=0), 0.0)
        mean = model.standardizer.inverse_mean(mean_s)
        var = model.standardizer.inverse_variance(var_s)

    if single:
        return float(mean[0]), float(var[0])
    return mean, var


def stack_predictions(
    models: Sequence[GPModel],
    x: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray]:
    """Predict with several models on a batch; columns follow *models* order."""
    xs = np.atleast_2d(np.asarray(x, dtype=float))
    means, variances = zip(*(predict(m, xs) for m in models))
    return np.column_stack(means), np.column_stack(variances)
