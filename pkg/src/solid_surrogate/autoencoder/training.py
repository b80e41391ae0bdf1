"""
Autoencoder Training

Mini-batch Adam on the reconstruction MSE with a learning rate that decays
linearly from ``lr_start`` to ``lr_end`` over every optimizer step. Training
runs a fixed number of epochs; a held-out validation slice is only reported.

Single-threaded training is bit-for-bit reproducible for a fixed seed. With
``threads > 1`` each batch is split into chunks whose gradients are combined
after evaluation, which changes summation order.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..core.errors import ShapeError, TrainingDivergence
from ..fem.dataset import Dataset
from ..fem.mesh import LoadKind
from .model import (
    AutoencoderModel,
    AutoencoderSpec,
    Normalizer,
    decode,
    encode,
    init_model,
    loss_and_gradients,
    mse_loss,
)

logger = logging.getLogger("surrogate.autoencoder")


class TrainConfig(BaseModel):
    """Optimizer and schedule settings for autoencoder training."""

    batch_size: int = Field(default=16, ge=1, description="Mini-batch size.")
    epochs: int = Field(default=2000, ge=1, description="Fixed number of training epochs.")
    lr_start: float = Field(default=1e-4, gt=0, description="Learning rate at the first step.")
    lr_end: float = Field(default=1e-6, gt=0, description="Learning rate at the last step.")
    adam_betas: Tuple[float, float] = Field(
        default=(0.9, 0.999),
        description="Adam first/second moment decay rates.",
    )
    adam_eps: float = Field(default=1e-8, gt=0, description="Adam denominator offset.")
    seed: int = Field(default=0, ge=0, description="Initialization and shuffling seed.")
    validation_fraction: float = Field(
        default=0.05,
        ge=0.0,
        lt=1.0,
        description="Share of samples held out for reporting only.",
    )
    threads: int = Field(default=1, ge=1, description="Worker threads per batch evaluation.")
    log_every: int = Field(default=100, ge=1, description="Epoch interval between INFO logs.")

    model_config = ConfigDict(frozen=True, extra="forbid")

    @model_validator(mode="after")
    def _check_schedule(self) -> TrainConfig:
        if self.lr_end > self.lr_start:
            raise ValueError("lr_start must be >= lr_end.")
        b1, b2 = self.adam_betas
        if not (0.0 <= b1 < 1.0 and 0.0 <= b2 < 1.0):
            raise ValueError("Adam betas must lie in [0, 1).")
        return self


# ---------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------

@dataclass(frozen=True)
class AdamState:
    """First and second moment estimates plus the schedule length."""

    m: Tuple[np.ndarray, ...]
    v: Tuple[np.ndarray, ...]
    total_steps: int = 1

    @classmethod
    def zeros_like(cls, params: Sequence[np.ndarray], total_steps: int) -> AdamState:
        return cls(
            m=tuple(np.zeros_like(p) for p in params),
            v=tuple(np.zeros_like(p) for p in params),
            total_steps=max(int(total_steps), 1),
        )


def learning_rate(step_index: int, total_steps: int, config: TrainConfig) -> float:
    """Linear schedule: lr_start at step 1, lr_end at step ``total_steps``."""
    span = max(total_steps - 1, 1)
    frac = min(max(step_index - 1, 0), span) / span
    return config.lr_start + (config.lr_end - config.lr_start) * frac


def adam_step(
    params: Sequence[np.ndarray],
    grads: Sequence[np.ndarray],
    step_index: int,
    config: TrainConfig,
    state: AdamState,
) -> Tuple[List[np.ndarray], AdamState]:
    """
    One bias-corrected Adam update.

    Parameters
    ----------
    params, grads : Sequence[np.ndarray]
        Parameter arrays and matching gradients.
    step_index : int
        1-based optimizer step counter.
    config : TrainConfig
        Betas, epsilon and learning-rate schedule.
    state : AdamState
        Moment estimates from the previous step.

    Returns
    -------
    Tuple[List[np.ndarray], AdamState]
        Updated parameters and moments.
    """
    if step_index < 1:
        raise ValueError("step_index is 1-based.")
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ShapeError("params, grads and optimizer state differ in length.")

    b1, b2 = config.adam_betas
    lr = learning_rate(step_index, state.total_steps, config)
    c1 = 1.0 - b1**step_index
    c2 = 1.0 - b2**step_index

    new_params: List[np.ndarray] = []
    new_m: List[np.ndarray] = []
    new_v: List[np.ndarray] = []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * g * g
        new_params.append(p - lr * (m / c1) / (np.sqrt(v / c2) + config.adam_eps))
        new_m.append(m)
        new_v.append(v)
    return new_params, AdamState(tuple(new_m), tuple(new_v), state.total_steps)


# ---------------------------------------------------------------------
# Training loop
# ---------------------------------------------------------------------

@dataclass(frozen=True)
class TrainingHistory:
    """Per-epoch losses (normalized space) and end-of-training summary."""

    epoch_losses: Tuple[float, ...] = ()
    validation_losses: Tuple[float, ...] = ()
    final_loss: float = float("nan")
    final_validation_loss: float | None = None
    reconstruction_error: float = float("nan")
    steps: int = 0
    train_indices: Tuple[int, ...] = field(default=(), repr=False)

    def smoothed(self, window: int = 10) -> np.ndarray:
        """Non-overlapping window means of the epoch losses."""
        losses = np.asarray(self.epoch_losses)
        n = losses.size // window
        if n == 0:
            return losses.copy()
        return losses[: n * window].reshape(n, window).mean(axis=1)


def relative_reconstruction_error(model: AutoencoderModel, displacements: np.ndarray) -> float:
    """||U(u) - u||_F / ||u||_F over a batch (absolute error if the batch is all zero)."""
    u = np.atleast_2d(np.asarray(displacements, dtype=float))
    if u.shape[0] == 0:
        return 0.0
    diff = float(np.linalg.norm(decode(model, encode(model, u)) - u))
    ref = float(np.linalg.norm(u))
    return diff / ref if ref > 0 else diff


def _split_indices(n: int, fraction: float, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    n_val = int(math.floor(n * fraction))
    if n_val == 0 or n_val >= n:
        return np.arange(n), np.arange(0)
    perm = np.random.default_rng([seed, 0]).permutation(n)
    return np.sort(perm[n_val:]), np.sort(perm[:n_val])


def _batch_gradients(
    model: AutoencoderModel,
    batch: np.ndarray,
    pool: ThreadPoolExecutor | None,
    threads: int,
) -> Tuple[float, List[np.ndarray]]:
    if pool is None or batch.shape[0] < 2 * threads:
        return loss_and_gradients(model, batch)

    n = batch.shape[0]
    chunks = [c for c in np.array_split(batch, threads) if c.shape[0]]
    parts = list(pool.map(lambda c: loss_and_gradients(model, c), chunks))
    loss = sum(c.shape[0] / n * part[0] for c, part in zip(chunks, parts))
    grads = [
        sum(c.shape[0] / n * part[1][i] for c, part in zip(chunks, parts))
        for i in range(len(parts[0][1]))
    ]
    return float(loss), grads


def train(
    displacements: np.ndarray,
    spec: AutoencoderSpec,
    config: TrainConfig | None = None,
) -> Tuple[AutoencoderModel, TrainingHistory]:
    """
    Train the autoencoder on full-field displacement vectors.

    Parameters
    ----------
    displacements : np.ndarray
        (N, input_dim) training displacements.
    spec : AutoencoderSpec
        Network shape.
    config : TrainConfig | None
        Optimizer settings.

    Returns
    -------
    Tuple[AutoencoderModel, TrainingHistory]

    Raises
    ------
    ShapeError
        If the data is empty or does not match ``spec.input_dim``.
    TrainingDivergence
        If the loss or any parameter becomes non-finite.
    """
    config = config or TrainConfig()
    data = np.atleast_2d(np.asarray(displacements, dtype=float))
    if data.shape[0] == 0:
        raise ShapeError("Cannot train on an empty dataset.")
    if data.shape[1] != spec.input_dim:
        raise ShapeError(
            f"Displacements have dimension {data.shape[1]}, spec expects {spec.input_dim}."
        )

    train_idx, val_idx = _split_indices(data.shape[0], config.validation_fraction, config.seed)
    train_data, val_data = data[train_idx], data[val_idx]

    model = init_model(spec, config.seed, Normalizer.fit(train_data))
    params = model.parameters()

    n_train = train_data.shape[0]
    steps_per_epoch = math.ceil(n_train / config.batch_size)
    state = AdamState.zeros_like(params, config.epochs * steps_per_epoch)
    shuffle_rng = np.random.default_rng([config.seed, 1])

    logger.info(
        "Training autoencoder: %d samples (%d held out), %d parameters, %d epochs x %d steps",
        n_train, val_data.shape[0], model.parameter_count(), config.epochs, steps_per_epoch,
    )

    epoch_losses: List[float] = []
    val_losses: List[float] = []
    step = 0
    pool = ThreadPoolExecutor(max_workers=config.threads) if config.threads > 1 else None
    try:
        for epoch in range(1, config.epochs + 1):
            order = shuffle_rng.permutation(n_train)
            running = 0.0
            for start in range(0, n_train, config.batch_size):
                batch = train_data[order[start:start + config.batch_size]]
                loss, grads = _batch_gradients(model, batch, pool, config.threads)
                if not math.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads):
                    raise TrainingDivergence(
                        f"Non-finite loss or gradient at epoch {epoch}, step {step + 1}.",
                        stage="autoencoder",
                    )
                step += 1
                params, state = adam_step(params, grads, step, config, state)
                if not all(np.all(np.isfinite(p)) for p in params):
                    raise TrainingDivergence(
                        f"Parameters became non-finite at step {step}.", stage="autoencoder"
                    )
                model = model.with_parameters(params)
                running += loss * batch.shape[0]

            epoch_losses.append(running / n_train)
            if val_data.shape[0]:
                val_losses.append(mse_loss(model, val_data))
            if epoch % config.log_every == 0 or epoch == config.epochs:
                logger.info(
                    "epoch %d/%d loss=%.4e%s", epoch, config.epochs, epoch_losses[-1],
                    f" val={val_losses[-1]:.4e}" if val_losses else "",
                )
    finally:
        if pool is not None:
            pool.shutdown()

    history = TrainingHistory(
        epoch_losses=tuple(epoch_losses),
        validation_losses=tuple(val_losses),
        final_loss=mse_loss(model, train_data),
        final_validation_loss=val_losses[-1] if val_losses else None,
        reconstruction_error=relative_reconstruction_error(model, train_data),
        steps=step,
        train_indices=tuple(int(i) for i in train_idx),
    )
    logger.info(
        "Autoencoder trained: final loss %.4e, relative reconstruction error %.4e",
        history.final_loss, history.reconstruction_error,
    )
    return model, history


# ---------------------------------------------------------------------
# Latent dataset
# ---------------------------------------------------------------------

@dataclass(frozen=True)
class LatentDataset:
    """Forces paired with encoded displacements; forces are copied unchanged."""

    forces: np.ndarray
    latents: np.ndarray
    load_kind: LoadKind = LoadKind.POINT

    def __post_init__(self) -> None:
        if self.forces.shape[0] != self.latents.shape[0]:
            raise ShapeError("forces and latents differ in length.")

    def __len__(self) -> int:
        return int(self.forces.shape[0])

    @property
    def input_dim(self) -> int:
        return int(self.forces.shape[1])

    @property
    def latent_dim(self) -> int:
        return int(self.latents.shape[1])


def encode_dataset(model: AutoencoderModel, dataset: Dataset) -> LatentDataset:
    """Encode every displacement of *dataset*; an empty dataset yields an empty result."""
    if dataset.field_dim != model.spec.input_dim:
        raise ShapeError(
            f"Dataset field dimension {dataset.field_dim} does not match "
            f"autoencoder input {model.spec.input_dim}."
        )
    if len(dataset) == 0:
        latents = np.zeros((0, model.spec.latent_dim))
    else:
        latents = encode(model, dataset.displacements)
    return LatentDataset(
        forces=dataset.forces.copy(),
        latents=np.asarray(latents, dtype=float),
        load_kind=dataset.load_kind,
    )
