"""
Datastore Tests

Tests for dataset and model containers (bit-exact round trips and
corruption detection) and for CSV/JSON report export.
"""

import csv
import json

import numpy as np
import pytest

from solid_surrogate.autoencoder import AutoencoderSpec, LatentDataset, encode, init_model
from solid_surrogate.core.errors import (
    ChecksumMismatch,
    DataError,
    TruncatedBlob,
    VersionMismatch,
)
from solid_surrogate.datastore import (
    read_autoencoder,
    read_dataset,
    read_dataset_config,
    read_model,
    read_model_manifest,
    to_jsonable,
    write_dataset,
    write_model,
    write_report,
    write_table,
)
from solid_surrogate.datastore.store import DISPLACEMENTS_BLOB, GP_BLOB, WEIGHTS_BLOB
from solid_surrogate.fem import LoadKind
from solid_surrogate.gpr import GPConfig, fit_bundle
from solid_surrogate.surrogate import SurrogateModel, predict_full


@pytest.fixture
def surrogate(smooth_dataset):
    spec = AutoencoderSpec(input_dim=8, encoder_widths=[8, 6], latent_dim=2)
    ae = init_model(spec, 0)
    latents = encode(ae, smooth_dataset.displacements)
    bundle = fit_bundle(
        LatentDataset(forces=smooth_dataset.forces, latents=latents),
        GPConfig(restarts=1, max_iter=100),
    )
    return SurrogateModel(autoencoder=ae, bundle=bundle, sample_count=25, mc_seed=3)


def _edit_manifest(directory, **changes):
    path = directory / "manifest.json"
    raw = json.loads(path.read_text())
    raw.update(changes)
    path.write_text(json.dumps(raw))


# ---------------------------------------------------------------------
# Datasets
# ---------------------------------------------------------------------

class TestDatasetContainer:

    def test_round_trip_is_bit_exact(self, tmp_path, tiny_dataset):
        write_dataset(tmp_path, tiny_dataset, config={"seed": 3})
        loaded = read_dataset(tmp_path)
        assert loaded.forces.tobytes() == tiny_dataset.forces.tobytes()
        assert loaded.displacements.tobytes() == tiny_dataset.displacements.tobytes()
        assert loaded.load_kind is LoadKind.POINT
        assert loaded.metadata["force_range"] == [-0.5, 0.5]
        assert loaded.metadata["seed"] == 3
        assert read_dataset_config(tmp_path) == {"seed": 3}

    def test_extra_metadata_survives(self, tmp_path, smooth_dataset):
        smooth = smooth_dataset.subset(range(5))
        smooth.metadata["mask_radius"] = 0.25
        write_dataset(tmp_path, smooth)
        loaded = read_dataset(tmp_path)
        assert loaded.metadata["mask_radius"] == 0.25
        assert loaded.load_kind is LoadKind.BODY

    def test_identical_data_identical_checksum(self, tmp_path, tiny_dataset):
        write_dataset(tmp_path / "a", tiny_dataset)
        write_dataset(tmp_path / "b", tiny_dataset)
        a = json.loads((tmp_path / "a" / "manifest.json").read_text())["checksum"]
        b = json.loads((tmp_path / "b" / "manifest.json").read_text())["checksum"]
        assert a == b

    def test_corrupted_byte(self, tmp_path, tiny_dataset):
        write_dataset(tmp_path, tiny_dataset)
        blob = tmp_path / DISPLACEMENTS_BLOB
        payload = bytearray(blob.read_bytes())
        payload[17] ^= 0x01
        blob.write_bytes(bytes(payload))
        with pytest.raises(ChecksumMismatch):
            read_dataset(tmp_path)

    def test_truncated_blob(self, tmp_path, tiny_dataset):
        write_dataset(tmp_path, tiny_dataset)
        blob = tmp_path / DISPLACEMENTS_BLOB
        blob.write_bytes(blob.read_bytes()[:-8])
        with pytest.raises(TruncatedBlob):
            read_dataset(tmp_path)

    def test_version_mismatch(self, tmp_path, tiny_dataset):
        write_dataset(tmp_path, tiny_dataset)
        _edit_manifest(tmp_path, format_version=2)
        with pytest.raises(VersionMismatch):
            read_dataset(tmp_path)

    def test_unknown_manifest_key(self, tmp_path, tiny_dataset):
        write_dataset(tmp_path, tiny_dataset)
        _edit_manifest(tmp_path, surprise=True)
        with pytest.raises(DataError):
            read_dataset(tmp_path)

    def test_missing_directory(self, tmp_path):
        with pytest.raises(DataError):
            read_dataset(tmp_path / "nowhere")

    def test_manifest_not_json(self, tmp_path):
        (tmp_path / "manifest.json").write_text("{not json")
        with pytest.raises(DataError):
            read_dataset(tmp_path)


# ---------------------------------------------------------------------
# Model archives
# ---------------------------------------------------------------------

class TestModelArchive:

    def test_round_trip_predictions_are_bit_exact(self, tmp_path, surrogate):
        write_model(tmp_path, surrogate, config={"note": "x"})
        loaded = read_model(tmp_path)
        force = np.array([0.2, -0.6])
        a = predict_full(surrogate, force)
        b = predict_full(loaded, force)
        assert a.mean.tobytes() == b.mean.tobytes()
        assert a.std.tobytes() == b.std.tobytes()
        assert loaded.sample_count == 25 and loaded.mc_seed == 3

    def test_manifest_describes_gps(self, tmp_path, surrogate):
        write_model(tmp_path, surrogate)
        manifest = read_model_manifest(tmp_path)
        assert manifest.gp is not None
        assert manifest.gp.latent_dim == 2
        assert manifest.gp.n_train == len(surrogate.bundle.gps[0].train_inputs)
        assert manifest.autoencoder.parameter_count == surrogate.autoencoder.parameter_count()

    def test_degenerate_component_round_trip(self, tmp_path, smooth_dataset):
        spec = AutoencoderSpec(input_dim=8, encoder_widths=[4], latent_dim=2)
        ae = init_model(spec, 1)
        latents = encode(ae, smooth_dataset.displacements)
        latents[:, 0] = 1.25
        bundle = fit_bundle(
            LatentDataset(forces=smooth_dataset.forces, latents=latents), GPConfig(restarts=0)
        )
        model = SurrogateModel(autoencoder=ae, bundle=bundle, sample_count=10)
        write_model(tmp_path, model)
        loaded = read_model(tmp_path)
        assert loaded.bundle.degenerate_components == [0]
        force = np.array([0.1, 0.1])
        assert predict_full(loaded, force).mean.tobytes() == predict_full(
            model, force
        ).mean.tobytes()

    def test_autoencoder_only_archive(self, tmp_path, surrogate):
        write_model(tmp_path, surrogate)
        write_model(tmp_path, surrogate.autoencoder)
        assert not (tmp_path / GP_BLOB).exists()
        assert read_model_manifest(tmp_path).gp is None
        ae = read_autoencoder(tmp_path)
        for p, q in zip(ae.parameters(), surrogate.autoencoder.parameters()):
            assert p.tobytes() == q.tobytes()
        with pytest.raises(DataError):
            read_model(tmp_path)

    def test_autoencoder_read_from_full_archive(self, tmp_path, surrogate):
        write_model(tmp_path, surrogate)
        ae = read_autoencoder(tmp_path)
        assert ae.normalizer == surrogate.autoencoder.normalizer

    def test_corrupted_weights(self, tmp_path, surrogate):
        write_model(tmp_path, surrogate)
        blob = tmp_path / WEIGHTS_BLOB
        payload = bytearray(blob.read_bytes())
        payload[0] ^= 0x80
        blob.write_bytes(bytes(payload))
        with pytest.raises(ChecksumMismatch):
            read_model(tmp_path)

    def test_truncated_gp_blob(self, tmp_path, surrogate):
        write_model(tmp_path, surrogate)
        blob = tmp_path / GP_BLOB
        blob.write_bytes(blob.read_bytes() + b"\x00" * 8)
        with pytest.raises(TruncatedBlob):
            read_model(tmp_path)

    def test_version_mismatch(self, tmp_path, surrogate):
        write_model(tmp_path, surrogate)
        _edit_manifest(tmp_path, format_version=0)
        with pytest.raises(VersionMismatch):
            read_model(tmp_path)


# ---------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------

class TestReports:

    def test_table_header_is_union_of_keys(self, tmp_path):
        path = write_table(tmp_path / "t.csv", [{"a": 1, "b": 0.1}, {"b": 2.5, "c": "x,y"}])
        with path.open(newline="") as handle:
            rows = list(csv.reader(handle))
        assert rows[0] == ["a", "b", "c"]
        assert rows[1] == ["1", "0.1", ""]
        assert rows[2] == ["", "2.5", "x,y"]

    def test_floats_round_trip_exactly(self, tmp_path):
        value = 1 / 3
        path = write_table(tmp_path / "f.csv", [{"v": value}, {"v": np.float64(2 / 7)}])
        with path.open(newline="") as handle:
            rows = list(csv.DictReader(handle))
        assert float(rows[0]["v"]) == value
        assert float(rows[1]["v"]) == 2 / 7

    def test_nan_written_as_empty_cell(self, tmp_path):
        path = write_table(tmp_path / "n.csv", [{"v": float("nan"), "w": 1}])
        assert path.read_text().splitlines()[1] == ",1"

    def test_report_json(self, tmp_path):
        paths = write_report(
            tmp_path,
            "demo",
            [{"x": 1.0}],
            summary={"arr": np.array([1.0, 2.0]), "bad": float("inf"), "n": np.int64(3)},
            config={"seed": 0},
        )
        payload = json.loads(paths["json"].read_text())
        assert payload["report"] == "demo"
        assert payload["rows"] == 1
        assert payload["summary"] == {"arr": [1.0, 2.0], "bad": None, "n": 3}
        assert payload["config"] == {"seed": 0}
        assert paths["csv"].exists()

    def test_to_jsonable_nested(self):
        value = {"a": (np.float64(0.5), [np.nan]), 1: np.zeros(2)}
        assert to_jsonable(value) == {"a": [0.5, [None]], "1": [0.0, 0.0]}
