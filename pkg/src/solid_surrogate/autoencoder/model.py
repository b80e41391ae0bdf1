"""
Fully-Connected Residual Autoencoder

Architecture (hidden activation configurable, latent and output layers linear):

    u --normalize--> [ResidualBlock(w) for w in encoder_widths]
      --> Dense(L) = latent
      --> [ResidualBlock(w) for w in reversed(encoder_widths)]
      --> Dense(input_dim) --denormalize--> u_r

The loss and its gradients are evaluated in normalized space. Parameters are
enumerated in a fixed order (encoder blocks, latent layer, decoder blocks,
output layer; weights before bias inside each layer) shared by gradients,
the optimizer and the on-disk layout.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..core.errors import ShapeError
from .layers import Activation, DenseLayer, ResidualBlock


# ---------------------------------------------------------------------
# Architecture description
# ---------------------------------------------------------------------

class AutoencoderSpec(BaseModel):
    """Shape of the network; the decoder always mirrors the encoder."""

    input_dim: int = Field(..., ge=2, description="Full-field dimension (mesh dof_count).")
    encoder_widths: List[int] = Field(
        default_factory=lambda: [256, 128, 64, 32],
        description="Residual block widths from input towards the latent layer.",
    )
    latent_dim: int = Field(default=4, ge=1, description="Latent dimension L.")
    hidden_activation: Activation = Field(
        default=Activation.RELU,
        description="Activation of every hidden layer (latent/output stay linear).",
    )

    model_config = ConfigDict(frozen=True, extra="forbid")

    @model_validator(mode="after")
    def _check_widths(self) -> AutoencoderSpec:
        if self.latent_dim >= self.input_dim:
            raise ValueError(
                f"latent_dim ({self.latent_dim}) must be smaller than input_dim ({self.input_dim})."
            )
        if any(w <= 0 for w in self.encoder_widths):
            raise ValueError("Encoder widths must be strictly positive.")
        return self

    @property
    def decoder_widths(self) -> List[int]:
        return list(reversed(self.encoder_widths))


@dataclass(frozen=True)
class Normalizer:
    """Global affine map u_n = (u - offset) / scale shared by every DOF."""

    scale: float = 1.0
    offset: float = 0.0

    def __post_init__(self) -> None:
        if not self.scale > 0:
            raise ValueError(f"Normalizer scale must be positive, got {self.scale}.")

    @classmethod
    def fit(cls, displacements: np.ndarray) -> Normalizer:
        peak = float(np.max(np.abs(displacements))) if np.size(displacements) else 0.0
        return cls(scale=peak if peak > 0 else 1.0, offset=0.0)

    def normalize(self, u: np.ndarray) -> np.ndarray:
        return (u - self.offset) / self.scale

    def denormalize(self, u_n: np.ndarray) -> np.ndarray:
        return u_n * self.scale + self.offset


# ---------------------------------------------------------------------
# Model
# ---------------------------------------------------------------------

@dataclass(frozen=True)
class AutoencoderModel:
    """Trained encoder/decoder stacks plus the input normalizer."""

    spec: AutoencoderSpec
    encoder_blocks: Tuple[ResidualBlock, ...]
    latent_layer: DenseLayer
    decoder_blocks: Tuple[ResidualBlock, ...]
    output_layer: DenseLayer
    normalizer: Normalizer = field(default_factory=Normalizer)

    def __post_init__(self) -> None:
        if self.latent_layer.out_dim != self.spec.latent_dim:
            raise ShapeError("Latent layer width does not match spec.latent_dim.")
        if self.output_layer.out_dim != self.spec.input_dim:
            raise ShapeError("Output layer width does not match spec.input_dim.")
        if self.output_layer.activation is not Activation.LINEAR:
            raise ValueError("Output layer must be linear (displacements are signed).")
        if [b.width for b in self.encoder_blocks] != list(self.spec.encoder_widths):
            raise ShapeError("Encoder blocks do not match spec.encoder_widths.")
        if [b.width for b in self.decoder_blocks] != self.spec.decoder_widths:
            raise ShapeError("Decoder blocks must mirror the encoder.")

    # -- parameters ---------------------------------------------------

    def parameters(self) -> List[np.ndarray]:
        params: List[np.ndarray] = []
        for block in self.encoder_blocks:
            params.extend(block.parameters())
        params.extend(self.latent_layer.parameters())
        for block in self.decoder_blocks:
            params.extend(block.parameters())
        params.extend(self.output_layer.parameters())
        return params

    def parameter_layout(self) -> List[Dict[str, object]]:
        """Name and shape of every parameter array, in enumeration order."""
        names: List[str] = []
        for i, _ in enumerate(self.encoder_blocks):
            names += [f"encoder.{i}.a.weight", f"encoder.{i}.a.bias",
                      f"encoder.{i}.b.weight", f"encoder.{i}.b.bias"]
        names += ["latent.weight", "latent.bias"]
        for i, _ in enumerate(self.decoder_blocks):
            names += [f"decoder.{i}.a.weight", f"decoder.{i}.a.bias",
                      f"decoder.{i}.b.weight", f"decoder.{i}.b.bias"]
        names += ["output.weight", "output.bias"]
        return [
            {"name": name, "shape": list(p.shape)}
            for name, p in zip(names, self.parameters())
        ]

    def with_parameters(self, params: Sequence[np.ndarray]) -> AutoencoderModel:
        """Rebuild the model with *params* in enumeration order."""
        it = iter(params)

        def take(n: int) -> Tuple[np.ndarray, ...]:
            return tuple(next(it) for _ in range(n))

        encoder = tuple(b.replace(take(4)) for b in self.encoder_blocks)
        latent = self.latent_layer.replace(*take(2))
        decoder = tuple(b.replace(take(4)) for b in self.decoder_blocks)
        output = self.output_layer.replace(*take(2))
        if next(it, None) is not None:
            raise ShapeError("More parameter arrays supplied than the model holds.")
        return AutoencoderModel(self.spec, encoder, latent, decoder, output, self.normalizer)

    def parameter_count(self) -> int:
        return int(sum(p.size for p in self.parameters()))


def init_model(
    spec: AutoencoderSpec,
    seed: int,
    normalizer: Normalizer | None = None,
) -> AutoencoderModel:
    """Glorot-uniform weights and zero biases drawn from a seeded generator."""
    rng = np.random.default_rng(seed)
    act = spec.hidden_activation

    encoder: List[ResidualBlock] = []
    width_in = spec.input_dim
    for w in spec.encoder_widths:
        encoder.append(ResidualBlock.glorot(width_in, w, act, rng))
        width_in = w
    latent = DenseLayer.glorot(width_in, spec.latent_dim, Activation.LINEAR, rng)

    decoder: List[ResidualBlock] = []
    width_in = spec.latent_dim
    for w in spec.decoder_widths:
        decoder.append(ResidualBlock.glorot(width_in, w, act, rng))
        width_in = w
    output = DenseLayer.glorot(width_in, spec.input_dim, Activation.LINEAR, rng)

    return AutoencoderModel(
        spec=spec,
        encoder_blocks=tuple(encoder),
        latent_layer=latent,
        decoder_blocks=tuple(decoder),
        output_layer=output,
        normalizer=normalizer or Normalizer(),
    )


# ---------------------------------------------------------------------
# Forward passes
# ---------------------------------------------------------------------

def _as_batch(x: np.ndarray, dim: int, what: str) -> Tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=float)
    single = arr.ndim == 1
    batch = arr[None, :] if single else arr
    if batch.ndim != 2 or batch.shape[1] != dim:
        raise ShapeError(f"{what} must have trailing dimension {dim}, got {arr.shape}.")
    return batch, single


def _encode_normalized(model: AutoencoderModel, x_n: np.ndarray) -> np.ndarray:
    h = x_n
    for block in model.encoder_blocks:
        h, _ = block.forward(h)
    z, _ = model.latent_layer.forward(h)
    return z


def _decode_normalized(model: AutoencoderModel, z: np.ndarray) -> np.ndarray:
    h = z
    for block in model.decoder_blocks:
        h, _ = block.forward(h)
    y, _ = model.output_layer.forward(h)
    return y


def encode(model: AutoencoderModel, u: np.ndarray) -> np.ndarray:
    """
    Map full-field vector(s) to latent vector(s).

    Accepts a single vector (input_dim,) or a batch (n, input_dim).

    Raises
    ------
    ShapeError
        On a dimension mismatch.
    """
    batch, single = _as_batch(u, model.spec.input_dim, "Full-field input")
    z = _encode_normalized(model, model.normalizer.normalize(batch))
    return z[0] if single else z


def decode(model: AutoencoderModel, z: np.ndarray) -> np.ndarray:
    """
    Map latent vector(s) back to full-field displacement(s).

    Raises
    ------
    ShapeError
        On a dimension mismatch.
    """
    batch, single = _as_batch(z, model.spec.latent_dim, "Latent input")
    u = model.normalizer.denormalize(_decode_normalized(model, batch))
    return u[0] if single else u


# ---------------------------------------------------------------------
# Loss and gradients
# ---------------------------------------------------------------------

def loss_and_gradients(
    model: AutoencoderModel,
    batch: np.ndarray,
) -> Tuple[float, List[np.ndarray]]:
    """Reconstruction MSE of *batch* and its gradient for every parameter."""
    u, _ = _as_batch(batch, model.spec.input_dim, "Batch")
    n = u.shape[0]
    if n == 0:
        raise ShapeError("Batch must not be empty.")
    x = model.normalizer.normalize(u)

    # forward with caches
    h = x
    enc_caches = []
    for block in model.encoder_blocks:
        h, cache = block.forward(h)
        enc_caches.append(cache)
    h_latent_in = h
    z, z_pre = model.latent_layer.forward(h)
    h = z
    dec_caches = []
    for block in model.decoder_blocks:
        h, cache = block.forward(h)
        dec_caches.append(cache)
    h_out_in = h
    y, y_pre = model.output_layer.forward(h)

    residual = y - x
    loss = float(np.sum(residual**2) / n)

    # backward
    grad = 2.0 * residual / n
    grad, gWo, gbo = model.output_layer.backward(grad, h_out_in, y_pre)
    dec_grads = []
    for block, cache in zip(reversed(model.decoder_blocks), reversed(dec_caches)):
        grad, g = block.backward(grad, cache)
        dec_grads.append(g)
    grad, gWl, gbl = model.latent_layer.backward(grad, h_latent_in, z_pre)
    enc_grads = []
    for block, cache in zip(reversed(model.encoder_blocks), reversed(enc_caches)):
        grad, g = block.backward(grad, cache)
        enc_grads.append(g)

    grads: List[np.ndarray] = []
    for g in reversed(enc_grads):
        grads.extend(g)
    grads += [gWl, gbl]
    for g in reversed(dec_grads):
        grads.extend(g)
    grads += [gWo, gbo]
    return loss, grads


def mse_loss(model: AutoencoderModel, batch: np.ndarray) -> float:
    """(1/N) sum_i ||U(u_i) - u_i||^2 evaluated in normalized space."""
    u, _ = _as_batch(batch, model.spec.input_dim, "Batch")
    if u.shape[0] == 0:
        raise ShapeError("Batch must not be empty.")
    x = model.normalizer.normalize(u)
    y = _decode_normalized(model, _encode_normalized(model, x))
    return float(np.sum((y - x) ** 2) / u.shape[0])


def backprop(model: AutoencoderModel, batch: np.ndarray) -> List[np.ndarray]:
    """Gradients of mse_loss with respect to every parameter (enumeration order)."""
    return loss_and_gradients(model, batch)[1]
