"""
Autoencoder Package

Residual fully-connected autoencoder that compresses full-field displacement
vectors to a small latent representation.
"""

from .layers import Activation, DenseLayer, ResidualBlock
from .model import (
    AutoencoderModel,
    AutoencoderSpec,
    Normalizer,
    backprop,
    decode,
    encode,
    init_model,
    loss_and_gradients,
    mse_loss,
)
from .training import (
    AdamState,
    LatentDataset,
    TrainConfig,
    TrainingHistory,
    adam_step,
    encode_dataset,
    learning_rate,
    relative_reconstruction_error,
    train,
)

__all__ = [
    "Activation",
    "DenseLayer",
    "ResidualBlock",
    "AutoencoderModel",
    "AutoencoderSpec",
    "Normalizer",
    "backprop",
    "decode",
    "encode",
    "init_model",
    "loss_and_gradients",
    "mse_loss",
    "AdamState",
    "LatentDataset",
    "TrainConfig",
    "TrainingHistory",
    "adam_step",
    "encode_dataset",
    "learning_rate",
    "relative_reconstruction_error",
    "train",
]
