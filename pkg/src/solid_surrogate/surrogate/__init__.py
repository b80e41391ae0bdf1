"""
Surrogate Package

Two-stage training, Monte-Carlo full-field prediction, error
decomposition, latent health checks and the missing-region experiment.
"""

from .experiments import (
    ExperimentConfig,
    MissingRegionResult,
    in_plane_magnitude,
    mask_dataset,
    missing_region_experiment,
)
from .metrics import (
    ErrorReport,
    Evaluation,
    HealthEntry,
    HealthReport,
    ShowcaseReport,
    TestMetrics,
    classify_latent_health,
    compute_test_metrics,
    error_decompose,
    evaluate_testset,
    max_nodal_displacement,
    showcase_case,
)
from .pipeline import (
    PredictionField,
    SurrogateConfig,
    SurrogateModel,
    TrainingReport,
    predict_full,
    predict_many,
    propagate_latent_distribution,
    reconstruct,
    sample_generator,
    train_autoencoder_stage,
    train_gp_stage,
    train_pipeline,
    true_latents,
)

__all__ = [
    "ExperimentConfig",
    "MissingRegionResult",
    "in_plane_magnitude",
    "mask_dataset",
    "missing_region_experiment",
    "ErrorReport",
    "Evaluation",
    "HealthEntry",
    "HealthReport",
    "ShowcaseReport",
    "TestMetrics",
    "classify_latent_health",
    "compute_test_metrics",
    "error_decompose",
    "evaluate_testset",
    "max_nodal_displacement",
    "showcase_case",
    "PredictionField",
    "SurrogateConfig",
    "SurrogateModel",
    "TrainingReport",
    "predict_full",
    "predict_many",
    "propagate_latent_distribution",
    "reconstruct",
    "sample_generator",
    "train_autoencoder_stage",
    "train_gp_stage",
    "train_pipeline",
    "true_latents",
]
