"""
Surrogate Tests

Tests for Monte-Carlo decoding, the two-stage pipeline, error
decomposition, latent health, test-set metrics and the missing-region
experiment.
"""

import logging
import math
from unittest.mock import patch

import numpy as np
import pytest

from solid_surrogate.autoencoder import (
    Activation,
    AutoencoderModel,
    AutoencoderSpec,
    DenseLayer,
    LatentDataset,
    TrainConfig,
    decode,
)
from solid_surrogate.config import RunConfig
from solid_surrogate.core.errors import (
    ContractViolation,
    OptimizationFailure,
    ShapeError,
    TrainingDivergence,
)
from solid_surrogate.fem import Dataset, LoadKind, build_cantilever_mesh, generate_dataset
from solid_surrogate.gpr import GPConfig, fit_bundle
from solid_surrogate.surrogate import (
    ExperimentConfig,
    HealthReport,
    SurrogateConfig,
    SurrogateModel,
    classify_latent_health,
    compute_test_metrics,
    error_decompose,
    evaluate_testset,
    in_plane_magnitude,
    mask_dataset,
    max_nodal_displacement,
    missing_region_experiment,
    predict_full,
    predict_many,
    propagate_latent_distribution,
    sample_generator,
    showcase_case,
    train_autoencoder_stage,
    train_gp_stage,
    train_pipeline,
)

DECODER = np.array([[1.0, 0.5], [-2.0, 0.0], [0.3, 3.0]])
OFFSET = np.array([0.1, -0.2, 0.0])


def _affine_autoencoder():
    """No residual blocks: decode(z) = DECODER z + OFFSET."""
    spec = AutoencoderSpec(
        input_dim=3, encoder_widths=[], latent_dim=2, hidden_activation=Activation.LINEAR
    )
    return AutoencoderModel(
        spec=spec,
        encoder_blocks=(),
        latent_layer=DenseLayer(np.linalg.pinv(DECODER), np.zeros(2)),
        decoder_blocks=(),
        output_layer=DenseLayer(DECODER, OFFSET),
    )


def _affine_surrogate(sample_count=300, mc_seed=0):
    rng = np.random.default_rng(5)
    forces = rng.uniform(-1, 1, (15, 2))
    latents = np.column_stack([np.sin(forces[:, 0]), forces[:, 0] * forces[:, 1]])
    bundle = fit_bundle(LatentDataset(forces=forces, latents=latents), GPConfig(restarts=0))
    return SurrogateModel(
        autoencoder=_affine_autoencoder(),
        bundle=bundle,
        sample_count=sample_count,
        mc_seed=mc_seed,
    )


# ---------------------------------------------------------------------
# Monte-Carlo decoding
# ---------------------------------------------------------------------

class TestPropagation:

    def test_zero_variance_is_exact(self):
        ae = _affine_autoencoder()
        m = np.array([0.4, -1.1])
        mean, std = propagate_latent_distribution(ae, m, np.zeros(2), 50, sample_generator(0, 0))
        np.testing.assert_array_equal(mean, decode(ae, m))
        assert np.all(std == 0.0)

    def test_affine_decoder_moments(self):
        ae = _affine_autoencoder()
        m = np.array([0.2, 0.7])
        v = np.array([0.04, 0.01])
        exact_std = np.sqrt((DECODER**2) @ v)
        mean, std = propagate_latent_distribution(ae, m, v, 300, sample_generator(1, 0))
        assert np.all(np.abs(mean - (DECODER @ m + OFFSET)) <= 5 * exact_std / math.sqrt(300))
        np.testing.assert_allclose(std, exact_std, rtol=0.15)

    @pytest.mark.slow
    def test_affine_decoder_moments_many_samples(self):
        ae = _affine_autoencoder()
        m = np.array([0.2, 0.7])
        v = np.array([0.04, 0.01])
        _, std = propagate_latent_distribution(ae, m, v, 100_000, sample_generator(1, 0))
        np.testing.assert_allclose(std, np.sqrt((DECODER**2) @ v), rtol=0.01)

    def test_same_stream_same_result(self):
        ae = _affine_autoencoder()
        args = (ae, np.zeros(2), np.ones(2), 40)
        a = propagate_latent_distribution(*args, sample_generator(7, 3))
        b = propagate_latent_distribution(*args, sample_generator(7, 3))
        np.testing.assert_array_equal(a[1], b[1])

    def test_streams_differ_by_case(self):
        x = sample_generator(7, 0).standard_normal(4)
        y = sample_generator(7, 1).standard_normal(4)
        assert not np.array_equal(x, y)

    def test_rejects_bad_inputs(self):
        ae = _affine_autoencoder()
        rng = sample_generator(0, 0)
        with pytest.raises(ShapeError):
            propagate_latent_distribution(ae, np.zeros(3), np.zeros(3), 10, rng)
        with pytest.raises(ValueError):
            propagate_latent_distribution(ae, np.zeros(2), np.array([1.0, -1.0]), 10, rng)
        with pytest.raises(ValueError):
            propagate_latent_distribution(ae, np.zeros(2), np.ones(2), 1, rng)


class TestPredictFull:

    def test_fields(self):
        model = _affine_surrogate(sample_count=100)
        pred = predict_full(model, np.array([0.1, 0.2]))
        assert pred.mean.shape == (3,) and pred.std.shape == (3,)
        assert pred.latent_means.shape == (2,)
        np.testing.assert_allclose(pred.variance, pred.std**2)
        assert np.all(pred.latent_std >= 0)

    def test_batch_matches_single_cases_in_any_thread_count(self):
        model = _affine_surrogate(sample_count=50, mc_seed=4)
        forces = np.random.default_rng(0).uniform(-1, 1, (5, 2))
        serial = predict_many(model, forces)
        pooled = predict_many(model, forces, threads=3)
        single = predict_full(model, forces[2], case_index=2)
        for a, b in zip(serial, pooled):
            np.testing.assert_array_equal(a.mean, b.mean)
            np.testing.assert_array_equal(a.std, b.std)
        np.testing.assert_array_equal(serial[2].std, single.std)

    def test_wrong_force_shape(self):
        with pytest.raises(ShapeError):
            predict_full(_affine_surrogate(), np.zeros(3))

    def test_latent_dimension_must_match(self):
        model = _affine_surrogate()
        one = fit_bundle(
            LatentDataset(forces=model.bundle.gps[0].train_inputs,
                          latents=np.arange(15.0)[:, None]),
            GPConfig(restarts=0),
        )
        with pytest.raises(ShapeError):
            SurrogateModel(autoencoder=model.autoencoder, bundle=one)


# ---------------------------------------------------------------------
# Pipeline
# ---------------------------------------------------------------------

class TestPipeline:

    def test_deterministic(self, smooth_dataset, small_ae_spec, quick_train_config,
                           quick_gp_config):
        spec = small_ae_spec(8)
        runs = [
            train_pipeline(
                smooth_dataset, spec, quick_train_config, quick_gp_config,
                SurrogateConfig(sample_count=20),
            )
            for _ in range(2)
        ]
        a = predict_full(runs[0][0], np.array([0.3, -0.4]))
        b = predict_full(runs[1][0], np.array([0.3, -0.4]))
        np.testing.assert_array_equal(a.mean, b.mean)
        np.testing.assert_array_equal(a.std, b.std)

    def test_report(self, smooth_dataset, small_ae_spec, quick_train_config, quick_gp_config):
        _, report = train_pipeline(
            smooth_dataset, small_ae_spec(8), quick_train_config, quick_gp_config
        )
        payload = report.as_dict()
        assert payload["autoencoder"]["epochs"] == quick_train_config.epochs
        assert [row["component"] for row in payload["gp"]] == [0, 1]

    def test_gp_stage_passes_forces_through(self, smooth_dataset, small_ae_spec,
                                            quick_train_config, quick_gp_config):
        ae, _ = train_autoencoder_stage(smooth_dataset, small_ae_spec(8), quick_train_config)
        bundle, latent_data = train_gp_stage(ae, smooth_dataset, quick_gp_config)
        np.testing.assert_array_equal(latent_data.forces, smooth_dataset.forces)
        assert bundle.latent_dim == 2

    def test_empty_dataset_labelled_autoencoder(self, small_ae_spec, quick_train_config):
        empty = Dataset(forces=np.zeros((0, 2)), displacements=np.zeros((0, 8)))
        with pytest.raises(ShapeError) as excinfo:
            train_autoencoder_stage(empty, small_ae_spec(8), quick_train_config)
        assert excinfo.value.stage == "autoencoder"

    def test_divergence_labelled_autoencoder(self, smooth_dataset, small_ae_spec,
                                             quick_train_config):
        with patch(
            "solid_surrogate.surrogate.pipeline.train",
            side_effect=TrainingDivergence("loss is nan"),
        ):
            with pytest.raises(TrainingDivergence) as excinfo:
                train_pipeline(smooth_dataset, small_ae_spec(8), quick_train_config)
        assert excinfo.value.stage == "autoencoder"

    def test_gp_failure_labelled_gp(self, smooth_dataset, small_ae_spec, quick_train_config):
        with patch(
            "solid_surrogate.surrogate.pipeline.fit_bundle",
            side_effect=OptimizationFailure("latent component 0", component=0),
        ):
            with pytest.raises(OptimizationFailure) as excinfo:
                train_pipeline(smooth_dataset, small_ae_spec(8), quick_train_config)
        assert excinfo.value.stage == "gp"
        assert excinfo.value.component == 0


# ---------------------------------------------------------------------
# Error decomposition and metrics
# ---------------------------------------------------------------------

class TestErrorDecompose:

    def test_scalar_example(self):
        report = error_decompose(np.array([1.2]), np.array([1.0]), np.array([0.9]))
        assert report.e_f[0] == pytest.approx(0.2)
        assert report.e_r[0] == pytest.approx(0.1)
        assert report.e_gp[0] == pytest.approx(0.3)

    def test_triangle_inequality(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            pred, u, ur = rng.standard_normal((3, 12))
            assert error_decompose(pred, u, ur).triangle_holds()

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            error_decompose(np.zeros(3), np.zeros(3), np.zeros(4))


class TestTestMetrics:

    def test_two_cases(self):
        pred = np.array([[0.1, 0.1], [0.3, 0.3]])
        metrics = compute_test_metrics(pred, np.zeros((2, 2)))
        assert metrics.mean_error == pytest.approx(0.2)
        assert metrics.std_error == pytest.approx(math.sqrt(0.02))
        assert metrics.max_error == pytest.approx(0.3)
        assert metrics.relative_mean_error == 0.0

    def test_single_case_has_zero_std(self):
        metrics = compute_test_metrics(np.array([[1.0, 2.0]]), np.array([[0.0, 0.0]]))
        assert metrics.std_error == 0.0
        assert metrics.mean_error == pytest.approx(1.5)

    def test_empty_and_mismatched(self):
        with pytest.raises(ShapeError):
            compute_test_metrics(np.zeros((0, 2)), np.zeros((0, 2)))
        with pytest.raises(ShapeError):
            compute_test_metrics(np.zeros((2, 2)), np.zeros((2, 3)))

    def test_max_nodal_displacement(self):
        u = np.array([[3.0, 4.0, 0.0, 1.0], [0.0, 0.0, 0.0, -2.0]])
        assert max_nodal_displacement(u) == pytest.approx(5.0)


class TestLatentHealth:

    def test_two_sigma_boundary_is_healthy(self):
        entry = classify_latent_health([0.0], [1.0], [2.0])
        assert entry.healthy.tolist() == [True]
        assert entry.z_scores[0] == pytest.approx(2.0)

    def test_just_outside_is_unhealthy(self):
        assert not classify_latent_health([0.0], [1.0], [2.01]).correct

    def test_negative_variance(self):
        with pytest.raises(ContractViolation):
            classify_latent_health([0.0], [-1e-3], [0.0])

    def test_zero_variance(self):
        entry = classify_latent_health([1.0, 1.0], [0.0, 0.0], [1.0, 1.5])
        assert entry.healthy.tolist() == [True, False]
        assert entry.z_scores[0] == 0.0 and math.isinf(entry.z_scores[1])

    def test_invariant_to_common_scaling(self):
        rng = np.random.default_rng(1)
        m, t = rng.standard_normal((2, 10))
        v = rng.uniform(0.1, 2.0, 10)
        base = classify_latent_health(m, v, t)
        scaled = classify_latent_health(4.0 * m, 16.0 * v, 4.0 * t)
        np.testing.assert_array_equal(base.healthy, scaled.healthy)
        np.testing.assert_allclose(base.z_scores, scaled.z_scores, rtol=1e-12)

    def test_report_percentages(self):
        report = HealthReport((
            classify_latent_health([0.0, 0.0], [1.0, 1.0], [0.5, 1.0]),
            classify_latent_health([0.0, 0.0], [1.0, 1.0], [0.5, 3.0]),
        ))
        assert report.healthy_percent == pytest.approx(75.0)
        assert report.correct_percent == pytest.approx(50.0)
        np.testing.assert_allclose(report.per_component_percent(), [100.0, 50.0])

    def test_length_mismatch(self):
        with pytest.raises(ShapeError):
            classify_latent_health([0.0], [1.0, 1.0], [0.0])


# ---------------------------------------------------------------------
# End-to-end on the tiny beam
# ---------------------------------------------------------------------

@pytest.fixture(scope="module")
def beam_surrogate(tiny_dataset):
    spec = AutoencoderSpec(input_dim=tiny_dataset.field_dim, encoder_widths=[8, 6], latent_dim=2)
    model, _ = train_pipeline(
        tiny_dataset,
        spec,
        TrainConfig(batch_size=8, epochs=40, lr_start=1e-3, lr_end=1e-4, log_every=20),
        GPConfig(restarts=1, max_iter=200),
        SurrogateConfig(sample_count=30),
    )
    return model


class TestEvaluation:

    def test_evaluate_testset(self, beam_surrogate, tiny_testset):
        evaluation = evaluate_testset(beam_surrogate, tiny_testset)
        assert evaluation.metrics.n_cases == len(tiny_testset)
        assert evaluation.health.n_cases == len(tiny_testset)
        assert evaluation.triangle_violations() == 0
        assert evaluation.latent_true.shape == (len(tiny_testset), 2)
        assert np.all(np.isfinite(evaluation.metrics.case_errors))

    def test_showcase_picks_largest_case(self, beam_surrogate, tiny_testset):
        evaluation = evaluate_testset(beam_surrogate, tiny_testset)
        showcase = showcase_case(evaluation, tiny_testset)
        peaks = [max_nodal_displacement(u) for u in tiny_testset.displacements]
        assert showcase.case_index == int(np.argmax(peaks))
        rows = showcase.rows()
        assert len(rows) == tiny_testset.field_dim // 2
        assert {"node", "predicted", "reference", "e_gp", "two_std"} <= set(rows[0])
        assert 0.0 <= showcase.gp_error_within_band <= 1.0

    def test_training_cases_at_least_as_healthy(
        self, beam_surrogate, tiny_dataset, tiny_mesh, beam_material, solve_settings
    ):
        held_out = generate_dataset(
            tiny_mesh, beam_material, LoadKind.POINT, (-0.5, 0.5), 40, seed=3,
            settings=solve_settings, stream=2,
        )
        train_health = evaluate_testset(beam_surrogate, tiny_dataset).health
        test_health = evaluate_testset(beam_surrogate, held_out).health
        assert train_health.healthy_percent >= test_health.healthy_percent

    def test_summary_logged_under_metrics(self, beam_surrogate, tiny_testset, caplog):
        with caplog.at_level(logging.INFO, logger="surrogate.metrics"):
            evaluate_testset(beam_surrogate, tiny_testset)
        names = {record.name for record in caplog.records}
        assert "surrogate.metrics" in names

    def test_dimension_mismatch(self, beam_surrogate, smooth_dataset):
        with pytest.raises(ShapeError):
            evaluate_testset(beam_surrogate, smooth_dataset)


# ---------------------------------------------------------------------
# Missing-region experiment
# ---------------------------------------------------------------------

class TestMasking:

    def test_zero_radius_keeps_everything(self, tiny_dataset):
        masked = mask_dataset(tiny_dataset, 0.0)
        np.testing.assert_array_equal(masked.forces, tiny_dataset.forces)
        np.testing.assert_array_equal(masked.displacements, tiny_dataset.displacements)

    def test_radius_removes_inner_disk(self, tiny_dataset):
        masked = mask_dataset(tiny_dataset, 0.3)
        assert np.all(in_plane_magnitude(masked.forces) >= 0.3)
        expected = int(np.sum(in_plane_magnitude(tiny_dataset.forces) >= 0.3))
        assert len(masked) == expected
        assert masked.metadata["mask_radius"] == 0.3

    def test_in_plane_magnitude_ignores_position(self):
        assert in_plane_magnitude(np.array([[3.0, 4.0, 1.7]]))[0] == pytest.approx(5.0)


class TestMissingRegionExperiment:

    def test_small_run(self, tiny_dataset, tiny_mesh, beam_material, solve_settings):
        result, model = missing_region_experiment(
            tiny_dataset,
            tiny_mesh,
            beam_material,
            AutoencoderSpec(input_dim=tiny_dataset.field_dim, encoder_widths=[8], latent_dim=2),
            _quick_train(),
            GPConfig(restarts=0, max_iter=100),
            SurrogateConfig(sample_count=10),
            solve_settings,
            ExperimentConfig(sweep_points=5, scatter_points=20, mask_ratio=0.4),
        )
        assert result.force_half_range == pytest.approx(0.5)
        assert result.mask_radius == pytest.approx(0.2)
        assert result.n_train + result.n_removed == len(tiny_dataset)
        assert [row["region"] for row in result.sweep] == [
            "extrapolated", "supported", "masked", "supported", "extrapolated",
        ]
        assert len(result.scatter) == 20
        assert {"std_standardized_0", "std_standardized_1"} <= set(result.scatter[0])
        assert "inside_to_annulus_ratio" in result.summary
        assert model.bundle.gps[0].n_train == result.n_train

    def test_requires_force_range(self, smooth_dataset, tiny_mesh, beam_material):
        with pytest.raises(ValueError):
            missing_region_experiment(
                smooth_dataset,
                tiny_mesh,
                beam_material,
                AutoencoderSpec(input_dim=8, encoder_widths=[4], latent_dim=2),
                _quick_train(),
                GPConfig(restarts=0),
            )

    @pytest.mark.slow
    def test_masked_disk_is_more_uncertain(self, tiny_mesh, beam_material, solve_settings):
        data = generate_dataset(
            tiny_mesh, beam_material, LoadKind.POINT, (-0.5, 0.5), 200, seed=21,
            settings=solve_settings,
        )
        result, _ = missing_region_experiment(
            data,
            tiny_mesh,
            beam_material,
            AutoencoderSpec(input_dim=data.field_dim, encoder_widths=[16, 8], latent_dim=2),
            _quick_train(epochs=200),
            GPConfig(restarts=2),
            SurrogateConfig(sample_count=20),
            solve_settings,
            ExperimentConfig(mask_ratio=0.4, sweep_extension=1.2, sweep_points=13,
                             scatter_points=300),
        )
        summary = result.summary
        assert summary["inside_to_annulus_ratio"] >= 2.0
        assert summary["sweep_extrapolated_min_std"] >= summary["sweep_supported_max_std"]


# ---------------------------------------------------------------------
# Desk-scale run (default configuration)
# ---------------------------------------------------------------------

class TestDeskScale:

    @pytest.mark.slow
    def test_end_to_end_accuracy_and_health(self):
        cfg = RunConfig()
        mesh = build_cantilever_mesh(cfg.mesh)
        datasets = [
            generate_dataset(
                mesh, cfg.material, cfg.data.load_kind, cfg.data.force_range, n,
                cfg.data.seed, cfg.solver, stream=stream,
            )
            for stream, n in ((0, cfg.data.n_train), (1, cfg.data.n_test))
        ]
        train, test = datasets
        assert cfg.mesh.nx == 16 and cfg.mesh.ny == 4 and cfg.autoencoder.latent_dim == 4

        model, _ = train_pipeline(
            train, cfg.ae_spec(train.field_dim), cfg.train_config(), cfg.gp_config(),
            cfg.surrogate,
        )
        on_test = evaluate_testset(model, test)
        on_train = evaluate_testset(model, train)

        assert on_test.metrics.relative_mean_error <= 0.01
        assert on_test.health.healthy_percent >= 85.0
        assert on_train.health.healthy_percent >= on_test.health.healthy_percent
        assert on_test.triangle_violations() == 0


def _quick_train(epochs=20):
    return TrainConfig(batch_size=8, epochs=epochs, lr_start=1e-3, lr_end=1e-4, log_every=10)
