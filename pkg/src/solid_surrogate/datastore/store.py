"""
Dataset and Model Containers

One directory per artifact with fixed file names:

    dataset/  manifest.json  forces.bin  displacements.bin
    model/    manifest.json  weights.bin  [gp.bin]

``forces.bin`` is (n_samples, D) and ``displacements.bin`` (n_samples, F).
``weights.bin`` concatenates every autoencoder parameter in layout order.
``gp.bin`` holds the scaled GP training inputs (N, D) followed by the
standardized latent targets (N, L). Reading a container verifies the
format version, the blob lengths and the SHA-256 checksum before any array
is returned.
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np

from ..autoencoder import AutoencoderModel, AutoencoderSpec, Normalizer, init_model
from ..core.errors import DataError
from ..fem.dataset import Dataset
from ..gpr import (
    InputScaler,
    LatentGPBundle,
    Matern52Kernel,
    Standardizer,
    condition_standardized,
    constant_model,
)
from ..surrogate.pipeline import SurrogateModel, TrainingReport
from .blobs import (
    checksum,
    from_bytes,
    read_bytes,
    read_manifest,
    to_bytes,
    verify_checksum,
    write_bytes,
    write_manifest,
)
from .manifests import (
    AutoencoderSection,
    DatasetManifest,
    GPComponentEntry,
    GPSection,
    ModelManifest,
    ParameterEntry,
)

logger = logging.getLogger("surrogate.datastore")

FORCES_BLOB = "forces.bin"
DISPLACEMENTS_BLOB = "displacements.bin"
WEIGHTS_BLOB = "weights.bin"
GP_BLOB = "gp.bin"

_DATASET_KEYS = ("force_range", "material", "mesh", "solver", "seed", "stream", "failure_count")


# ---------------------------------------------------------------------
# Datasets
# ---------------------------------------------------------------------

def write_dataset(
    directory: Path | str,
    dataset: Dataset,
    config: Optional[Dict[str, Any]] = None,
) -> Path:
    """Write *dataset* into *directory* (created if needed); returns the manifest path."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    forces = to_bytes(dataset.forces)
    displacements = to_bytes(dataset.displacements)

    meta = dict(dataset.metadata)
    manifest = DatasetManifest(
        n_samples=len(dataset),
        input_dim=dataset.input_dim,
        field_dim=dataset.field_dim,
        load_kind=dataset.load_kind.value,
        force_range=meta.get("force_range"),
        material=meta.get("material", {}),
        mesh=meta.get("mesh", {}),
        solver=meta.get("solver", {}),
        seed=meta.get("seed"),
        stream=meta.get("stream"),
        failure_count=meta.get("failure_count", 0),
        extra={k: v for k, v in meta.items() if k not in _DATASET_KEYS and k != "n_samples"},
        checksum=checksum([forces, displacements]),
        config=config,
    )
    write_bytes(out / FORCES_BLOB, forces)
    write_bytes(out / DISPLACEMENTS_BLOB, displacements)
    path = write_manifest(out, manifest)
    logger.info("Dataset with %d samples written to %s", len(dataset), out)
    return path


def read_dataset(directory: Path | str) -> Dataset:
    """
    Read a dataset container.

    Raises
    ------
    VersionMismatch, TruncatedBlob, ChecksumMismatch, DataError
    """
    src = Path(directory)
    manifest = read_manifest(src, DatasetManifest)
    n = manifest.n_samples
    forces = read_bytes(src / FORCES_BLOB, n * manifest.input_dim)
    displacements = read_bytes(src / DISPLACEMENTS_BLOB, n * manifest.field_dim)
    verify_checksum(manifest.checksum, [forces, displacements], src)

    metadata: Dict[str, Any] = {
        "n_samples": n,
        **{k: getattr(manifest, k) for k in _DATASET_KEYS},
        **manifest.extra,
    }
    return Dataset(
        forces=from_bytes(forces, (n, manifest.input_dim)),
        displacements=from_bytes(displacements, (n, manifest.field_dim)),
        load_kind=manifest.load_kind,
        metadata=metadata,
    )


def read_dataset_config(directory: Path | str) -> Optional[Dict[str, Any]]:
    """Configuration echo stored with a dataset, if any."""
    return read_manifest(Path(directory), DatasetManifest).config


# ---------------------------------------------------------------------
# Models
# ---------------------------------------------------------------------

def _training_section(
    report: TrainingReport | Dict[str, Any] | None,
) -> Optional[Dict[str, Any]]:
    if report is None:
        return None
    if isinstance(report, dict):
        return dict(report)
    return report.as_dict()


def write_model(
    directory: Path | str,
    model: SurrogateModel | AutoencoderModel,
    report: TrainingReport | Dict[str, Any] | None = None,
    config: Optional[Dict[str, Any]] = None,
) -> Path:
    """
    Write a surrogate (or a stage-1 autoencoder alone) into *directory*.

    *report* may be a TrainingReport or its already serialized form, which
    lets a later stage carry the stage-1 losses forward.

    Returns
    -------
    Path
        Path of the written manifest.
    """
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    surrogate = model if isinstance(model, SurrogateModel) else None
    ae = surrogate.autoencoder if surrogate else model
    assert isinstance(ae, AutoencoderModel)

    weights = b"".join(to_bytes(p) for p in ae.parameters())
    blobs: List[bytes] = [weights]
    ae_section = AutoencoderSection(
        spec=ae.spec.model_dump(mode="json"),
        normalizer_scale=ae.normalizer.scale,
        normalizer_offset=ae.normalizer.offset,
        layout=[ParameterEntry(**entry) for entry in ae.parameter_layout()],
        parameter_count=ae.parameter_count(),
        training=_training_section(report),
    )

    gp_section: Optional[GPSection] = None
    if surrogate is not None:
        bundle = surrogate.bundle
        X = bundle.gps[0].train_inputs
        Y = np.column_stack([gp.train_targets for gp in bundle.gps])
        blobs.append(to_bytes(X) + to_bytes(Y))
        gp_section = GPSection(
            n_train=X.shape[0],
            input_dim=X.shape[1],
            latent_dim=bundle.latent_dim,
            input_lower=[float(v) for v in bundle.input_scaler.lower],
            input_span=[float(v) for v in bundle.input_scaler.span],
            components=[
                GPComponentEntry(
                    variance=gp.kernel.variance,
                    length_scale=gp.kernel.length_scale,
                    noise=gp.noise,
                    jitter=gp.jitter,
                    lml=None if gp.degenerate else gp.lml,
                    target_mean=gp.standardizer.mean,
                    target_std=gp.standardizer.std,
                    degenerate=gp.degenerate,
                )
                for gp in bundle.gps
            ],
        )

    manifest = ModelManifest(
        autoencoder=ae_section,
        gp=gp_section,
        sample_count=surrogate.sample_count if surrogate else 300,
        mc_seed=surrogate.mc_seed if surrogate else 0,
        checksum=checksum(blobs),
        config=config,
    )
    write_bytes(out / WEIGHTS_BLOB, blobs[0])
    if len(blobs) > 1:
        write_bytes(out / GP_BLOB, blobs[1])
    elif (out / GP_BLOB).exists():
        (out / GP_BLOB).unlink()
    path = write_manifest(out, manifest)
    kind = "surrogate" if surrogate else "autoencoder"
    logger.info("Model archive written to %s (%s)", out, kind)
    return path


def _load_autoencoder(manifest: ModelManifest, weights: bytes) -> AutoencoderModel:
    section = manifest.autoencoder
    spec = AutoencoderSpec.model_validate(section.spec)
    normalizer = Normalizer(scale=section.normalizer_scale, offset=section.normalizer_offset)
    skeleton = init_model(spec, seed=0, normalizer=normalizer)
    expected = skeleton.parameter_layout()
    if [e.model_dump() for e in section.layout] != expected:
        raise DataError("Parameter layout in manifest does not match the declared architecture.")

    params: List[np.ndarray] = []
    offset = 0
    for entry in section.layout:
        count = int(np.prod(entry.shape))
        chunk = weights[offset * 8:(offset + count) * 8]
        params.append(from_bytes(chunk, entry.shape))
        offset += count
    return skeleton.with_parameters(params)


def _load_bundle(section: GPSection, payload: bytes) -> LatentGPBundle:
    n, d, l_dim = section.n_train, section.input_dim, section.latent_dim
    if len(section.components) != l_dim:
        raise DataError("GP manifest lists a different number of components than latent_dim.")
    X = from_bytes(payload[: n * d * 8], (n, d))
    Y = from_bytes(payload[n * d * 8:], (n, l_dim))

    gps = []
    for l, entry in enumerate(section.components):
        kernel = Matern52Kernel(variance=entry.variance, length_scale=entry.length_scale)
        if entry.degenerate:
            gps.append(constant_model(X, entry.target_mean, kernel, entry.noise))
            continue
        standardizer = Standardizer(mean=entry.target_mean, std=entry.target_std)
        gps.append(condition_standardized(X, Y[:, l], kernel, entry.noise, standardizer))
    scaler = InputScaler(
        lower=np.asarray(section.input_lower, dtype=float),
        span=np.asarray(section.input_span, dtype=float),
    )
    return LatentGPBundle(gps=tuple(gps), input_scaler=scaler)


def _read_archive(src: Path) -> tuple[ModelManifest, bytes, Optional[bytes]]:
    manifest = read_manifest(src, ModelManifest)
    weights = read_bytes(src / WEIGHTS_BLOB, manifest.autoencoder.parameter_count)
    gp_payload = None
    blobs = [weights]
    if manifest.gp is not None:
        g = manifest.gp
        gp_payload = read_bytes(src / GP_BLOB, g.n_train * (g.input_dim + g.latent_dim))
        blobs.append(gp_payload)
    verify_checksum(manifest.checksum, blobs, src)
    return manifest, weights, gp_payload


def read_autoencoder(directory: Path | str) -> AutoencoderModel:
    """Load only the autoencoder of an archive (stage 1 or complete)."""
    manifest, weights, _ = _read_archive(Path(directory))
    return _load_autoencoder(manifest, weights)


def read_model(directory: Path | str) -> SurrogateModel:
    """
    Load a complete surrogate archive.

    Raises
    ------
    DataError
        If the archive holds only a stage-1 autoencoder.
    VersionMismatch, TruncatedBlob, ChecksumMismatch
    """
    src = Path(directory)
    manifest, weights, gp_payload = _read_archive(src)
    if manifest.gp is None or gp_payload is None:
        raise DataError(f"{src} contains no GP bundle; run the gp training stage first.")
    return SurrogateModel(
        autoencoder=_load_autoencoder(manifest, weights),
        bundle=_load_bundle(manifest.gp, gp_payload),
        sample_count=manifest.sample_count,
        mc_seed=manifest.mc_seed,
    )


def read_model_manifest(directory: Path | str) -> ModelManifest:
    return read_manifest(Path(directory), ModelManifest)
