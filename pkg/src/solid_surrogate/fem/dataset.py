"""
Force-Displacement Dataset Generation

Each sample draws a random load, solves the hyperelastic problem and records
the pair (f, u). Every sample owns an RNG stream keyed by
(seed, stream, sample index), so the corpus is identical whether samples are
solved sequentially or on a thread pool. Load cases that fail to converge are
redrawn from the same stream.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, Sequence, Tuple

import numpy as np

from ..core.errors import InvertedElement, NonConvergence, ShapeError, TooManyFailures
from .material import MaterialParams
from .mesh import LoadKind, LoadSpec, Mesh2D
from .solver import SolveSettings, solve_static

logger = logging.getLogger("surrogate.fem")

MAX_ATTEMPTS_PER_SAMPLE = 10


@dataclass(frozen=True)
class Dataset:
    """
    Paired force/displacement arrays.

    Attributes
    ----------
    forces : np.ndarray
        (N, D) compressed load vectors.
    displacements : np.ndarray
        (N, F) full-field displacement vectors.
    load_kind : LoadKind
        Interpretation of the force columns.
    metadata : Dict[str, Any]
        Generation record (ranges, seed, failures, material, mesh).
    """

    forces: np.ndarray
    displacements: np.ndarray
    load_kind: LoadKind = LoadKind.POINT
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        forces = np.atleast_2d(np.asarray(self.forces, dtype=float))
        disp = np.atleast_2d(np.asarray(self.displacements, dtype=float))
        if forces.shape[0] != disp.shape[0]:
            raise ShapeError(
                f"forces ({forces.shape[0]}) and displacements ({disp.shape[0]}) differ in length."
            )
        object.__setattr__(self, "forces", forces)
        object.__setattr__(self, "displacements", disp)
        object.__setattr__(self, "load_kind", LoadKind(self.load_kind))

    def __len__(self) -> int:
        return int(self.forces.shape[0])

    @property
    def input_dim(self) -> int:
        return int(self.forces.shape[1])

    @property
    def field_dim(self) -> int:
        return int(self.displacements.shape[1])

    def subset(self, indices: Sequence[int] | np.ndarray) -> Dataset:
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(
            forces=self.forces[idx],
            displacements=self.displacements[idx],
            load_kind=self.load_kind,
            metadata={**self.metadata, "n_samples": int(idx.size)},
        )


def _draw_load(
    rng: np.random.Generator,
    mesh: Mesh2D,
    load_kind: LoadKind,
    force_range: Tuple[float, float],
) -> LoadSpec:
    low, high = force_range
    fx, fy = rng.uniform(low, high, size=2)
    if load_kind is LoadKind.BODY:
        return LoadSpec.body(fx, fy)
    distances = mesh.loadable_distances()
    d = distances[rng.integers(distances.size)]
    return LoadSpec.point(fx, fy, d)


def _solve_sample(
    index: int,
    mesh: Mesh2D,
    mat: MaterialParams,
    load_kind: LoadKind,
    force_range: Tuple[float, float],
    seed: int,
    stream: int,
    settings: SolveSettings,
) -> Tuple[np.ndarray, np.ndarray, int]:
    rng = np.random.default_rng([seed, stream, index])
    failures = 0
    for _ in range(MAX_ATTEMPTS_PER_SAMPLE):
        load = _draw_load(rng, mesh, load_kind, force_range)
        try:
            field_ = solve_static(mesh, mat, load, settings)
        except (NonConvergence, InvertedElement) as exc:
            failures += 1
            logger.warning(
                "Sample %d: load %s failed (%s); resampling", index, load.components, exc
            )
            continue
        return load.as_vector(), field_.values, failures

    raise TooManyFailures(
        f"Sample {index} failed {MAX_ATTEMPTS_PER_SAMPLE} consecutive load draws.",
        failures=failures,
    )


def generate_dataset(
    mesh: Mesh2D,
    mat: MaterialParams,
    load_kind: LoadKind | str,
    force_range: Tuple[float, float],
    n_samples: int,
    seed: int,
    settings: SolveSettings | None = None,
    *,
    stream: int = 0,
    threads: int = 1,
) -> Dataset:
    """
    Generate a force-displacement corpus by repeated FEM solves.

    Parameters
    ----------
    mesh, mat : Mesh2D, MaterialParams
        Body and material.
    load_kind : LoadKind | str
        ``point`` (f = (fx, fy, d)) or ``body`` (f = (bx, by)).
    force_range : Tuple[float, float]
        Uniform range applied independently to each force component.
    n_samples : int
        Number of converged samples to return (>= 1).
    seed : int
        Generator seed.
    settings : SolveSettings | None
        Solver controls.
    stream : int
        Independent stream index (0 for training data, 1 for test data, ...).
    threads : int
        Worker threads; results do not depend on this value.

    Raises
    ------
    TooManyFailures
        If more than half of all attempted load cases fail.
    """
    kind = LoadKind(load_kind)
    settings = settings or SolveSettings()
    low, high = float(force_range[0]), float(force_range[1])
    if high < low:
        raise ValueError(f"force_range must be (low, high) with low <= high, got {force_range}.")
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1.")

    def run(i: int) -> Tuple[np.ndarray, np.ndarray, int]:
        return _solve_sample(i, mesh, mat, kind, (low, high), seed, stream, settings)

    logger.info(
        "Generating %d %s-load samples (range [%g, %g], seed=%d, stream=%d, threads=%d)",
        n_samples, kind.value, low, high, seed, stream, threads,
    )
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, range(n_samples)))
    else:
        results = [run(i) for i in range(n_samples)]

    failures = sum(r[2] for r in results)
    if failures > n_samples:
        raise TooManyFailures(
            f"{failures} of {failures + n_samples} load cases failed to converge (> 50%).",
            failures=failures,
        )
    if failures:
        logger.warning("%d load cases were resampled after solver failure", failures)

    return Dataset(
        forces=np.stack([r[0] for r in results]),
        displacements=np.stack([r[1] for r in results]),
        load_kind=kind,
        metadata={
            "n_samples": n_samples,
            "force_range": [low, high],
            "seed": seed,
            "stream": stream,
            "failure_count": failures,
            "material": mat.model_dump(),
            "mesh": dict(mesh.descriptor),
            "solver": settings.model_dump(),
        },
    )
