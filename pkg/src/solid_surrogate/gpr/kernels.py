"""
Covariance Functions

Stationary kernels are expressed as functions of the Euclidean distance r
between inputs. Each kernel exposes its hyperparameters in log space together
with the matching derivatives, which is what the marginal-likelihood
optimizer consumes.

Only the Matérn-5/2 kernel is provided:

    k(r) = variance * (1 + a + a^2 / 3) * exp(-a),   a = sqrt(5) r / length_scale
"""

from __future__ import annotations

import abc
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy.spatial.distance import cdist, pdist, squareform

SQRT5 = math.sqrt(5.0)


def pairwise_distances(a: np.ndarray, b: np.ndarray | None = None) -> np.ndarray:
    """Euclidean distance matrix; exactly symmetric with a zero diagonal when *b* is None."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if b is None:
        if a.shape[0] < 2:
            return np.zeros((a.shape[0], a.shape[0]))
        return squareform(pdist(a))
    return cdist(a, np.atleast_2d(np.asarray(b, dtype=float)))


class StationaryKernel(abc.ABC):
    """Interface shared by distance-based covariance functions."""

    variance: float

    @abc.abstractmethod
    def of_distance(self, r: np.ndarray) -> np.ndarray:
        """Covariance for distances *r* (any shape)."""

    @abc.abstractmethod
    def log_params(self) -> np.ndarray:
        """Hyperparameters in log space."""

    @abc.abstractmethod
    def with_log_params(self, log_params: np.ndarray) -> StationaryKernel:
        """New kernel with the given log-space hyperparameters."""

    @abc.abstractmethod
    def log_param_gradients(self, r: np.ndarray) -> Tuple[np.ndarray, ...]:
        """d k / d log(theta) for each hyperparameter, evaluated at *r*."""

    def matrix(self, a: np.ndarray, b: np.ndarray | None = None) -> np.ndarray:
        return self.of_distance(pairwise_distances(a, b))


@dataclass(frozen=True)
class Matern52Kernel(StationaryKernel):
    """Matérn-5/2 covariance with signal variance and a single length scale."""

    variance: float = 1.0
    length_scale: float = 1.0

    def __post_init__(self) -> None:
        if not (self.variance > 0 and math.isfinite(self.variance)):
            raise ValueError(f"Kernel variance must be positive and finite, got {self.variance}.")
        if not (self.length_scale > 0 and math.isfinite(self.length_scale)):
            raise ValueError(
                f"Kernel length scale must be positive and finite, got {self.length_scale}."
            )

    def of_distance(self, r: np.ndarray) -> np.ndarray:
        a = SQRT5 * np.asarray(r, dtype=float) / self.length_scale
        return self.variance * (1.0 + a + a * a / 3.0) * np.exp(-a)

    def log_params(self) -> np.ndarray:
        return np.log([self.variance, self.length_scale])

    def with_log_params(self, log_params: np.ndarray) -> Matern52Kernel:
        log_var, log_len = (float(v) for v in log_params)
        return Matern52Kernel(variance=math.exp(log_var), length_scale=math.exp(log_len))

    def log_param_gradients(self, r: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        a = SQRT5 * np.asarray(r, dtype=float) / self.length_scale
        e = np.exp(-a)
        d_log_variance = self.variance * (1.0 + a + a * a / 3.0) * e
        d_log_length = self.variance * (a * a / 3.0) * (1.0 + a) * e
        return d_log_variance, d_log_length


def matern52(r: float | np.ndarray, kernel: Matern52Kernel) -> float | np.ndarray:
    """Matérn-5/2 covariance at distance *r* (r >= 0); underflows to 0 for r >> length scale."""
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0):
        raise ValueError("Distances must be non-negative.")
    value = kernel.of_distance(r_arr)
    return float(value) if value.ndim == 0 else value


def covariance_matrix(
    inputs: np.ndarray,
    kernel: StationaryKernel,
    jitter: float = 0.0,
) -> np.ndarray:
    """
    Gram matrix K_ij = k(|x_i - x_j|) with *jitter* added to the diagonal.

    Parameters
    ----------
    inputs : np.ndarray
        (N, D) finite inputs.
    kernel : StationaryKernel
        Covariance function.
    jitter : float
        Non-negative diagonal offset.
    """
    x = np.atleast_2d(np.asarray(inputs, dtype=float))
    if not np.all(np.isfinite(x)):
        raise ValueError("Inputs must be finite.")
    K = kernel.matrix(x)
    if jitter:
        K[np.diag_indices_from(K)] += jitter
    return K
