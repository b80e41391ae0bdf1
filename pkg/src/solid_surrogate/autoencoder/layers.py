"""
Dense Building Blocks

Fully-connected layers and equal-width residual blocks with hand-written
forward and backward passes. Inputs are batches of row vectors, shape
(batch, features).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Tuple

import numpy as np


class Activation(str, enum.Enum):
    RELU = "relu"
    LINEAR = "linear"

    def apply(self, z: np.ndarray) -> np.ndarray:
        if self is Activation.RELU:
            return np.maximum(z, 0.0)
        return z

    def derivative(self, z: np.ndarray) -> np.ndarray:
        if self is Activation.RELU:
            return (z > 0.0).astype(z.dtype)
        return np.ones_like(z)


@dataclass(frozen=True)
class DenseLayer:
    """h = act(x W^T + b) with W of shape (out_dim, in_dim)."""

    weights: np.ndarray
    bias: np.ndarray
    activation: Activation = Activation.LINEAR

    def __post_init__(self) -> None:
        W = np.asarray(self.weights, dtype=float)
        b = np.asarray(self.bias, dtype=float)
        if W.ndim != 2 or b.shape != (W.shape[0],):
            raise ValueError(f"Inconsistent layer shapes: weights {W.shape}, bias {b.shape}.")
        if not (np.all(np.isfinite(W)) and np.all(np.isfinite(b))):
            raise ValueError("Layer parameters must be finite.")
        object.__setattr__(self, "weights", W)
        object.__setattr__(self, "bias", b)
        object.__setattr__(self, "activation", Activation(self.activation))

    @property
    def in_dim(self) -> int:
        return int(self.weights.shape[1])

    @property
    def out_dim(self) -> int:
        return int(self.weights.shape[0])

    @classmethod
    def glorot(
        cls,
        in_dim: int,
        out_dim: int,
        activation: Activation,
        rng: np.random.Generator,
    ) -> DenseLayer:
        limit = np.sqrt(6.0 / (in_dim + out_dim))
        return cls(
            weights=rng.uniform(-limit, limit, size=(out_dim, in_dim)),
            bias=np.zeros(out_dim),
            activation=activation,
        )

    def forward(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Return (output, pre-activation)."""
        z = x @ self.weights.T + self.bias
        return self.activation.apply(z), z

    def backward(
        self,
        grad_out: np.ndarray,
        x: np.ndarray,
        z: np.ndarray,
    ) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Return (grad wrt input, grad wrt weights, grad wrt bias)."""
        grad_z = grad_out * self.activation.derivative(z)
        return grad_z @ self.weights, grad_z.T @ x, grad_z.sum(axis=0)

    def parameters(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.weights, self.bias

    def replace(self, weights: np.ndarray, bias: np.ndarray) -> DenseLayer:
        return DenseLayer(weights=weights, bias=bias, activation=self.activation)


@dataclass(frozen=True)
class ResidualBlock:
    """
    Two equal-width dense layers whose outputs are summed:

        a = act(x Wa^T + ba);  out = a + act(a Wb^T + bb)
    """

    layer_a: DenseLayer
    layer_b: DenseLayer

    def __post_init__(self) -> None:
        w = self.layer_a.out_dim
        if self.layer_b.in_dim != w or self.layer_b.out_dim != w:
            raise ValueError(
                f"Residual block widths disagree: a.out={w}, "
                f"b=({self.layer_b.in_dim} -> {self.layer_b.out_dim})."
            )

    @property
    def width(self) -> int:
        return self.layer_a.out_dim

    @classmethod
    def glorot(
        cls,
        in_dim: int,
        width: int,
        activation: Activation,
        rng: np.random.Generator,
    ) -> ResidualBlock:
        return cls(
            layer_a=DenseLayer.glorot(in_dim, width, activation, rng),
            layer_b=DenseLayer.glorot(width, width, activation, rng),
        )

    def forward(self, x: np.ndarray) -> Tuple[np.ndarray, Tuple[np.ndarray, ...]]:
        a, z_a = self.layer_a.forward(x)
        b, z_b = self.layer_b.forward(a)
        return a + b, (x, z_a, a, z_b)

    def backward(
        self,
        grad_out: np.ndarray,
        cache: Tuple[np.ndarray, ...],
    ) -> Tuple[np.ndarray, Tuple[np.ndarray, ...]]:
        x, z_a, a, z_b = cache
        grad_a_via_b, gWb, gbb = self.layer_b.backward(grad_out, a, z_b)
        grad_x, gWa, gba = self.layer_a.backward(grad_out + grad_a_via_b, x, z_a)
        return grad_x, (gWa, gba, gWb, gbb)

    def parameters(self) -> Tuple[np.ndarray, ...]:
        return (*self.layer_a.parameters(), *self.layer_b.parameters())

    def replace(self, params: Tuple[np.ndarray, ...]) -> ResidualBlock:
        Wa, ba, Wb, bb = params
        return ResidualBlock(self.layer_a.replace(Wa, ba), self.layer_b.replace(Wb, bb))
