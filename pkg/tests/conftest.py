"""
Shared fixtures: small meshes, materials and datasets that keep the
suite fast while still exercising the full pipeline.
"""

import numpy as np
import pytest

from solid_surrogate.autoencoder import AutoencoderSpec, TrainConfig
from solid_surrogate.fem import (
    BeamGeometry,
    Dataset,
    LoadKind,
    MaterialParams,
    SolveSettings,
    build_cantilever_mesh,
    generate_dataset,
)
from solid_surrogate.gpr import GPConfig


@pytest.fixture(scope="session")
def tiny_geometry():
    """4 x 1 elements on a 2 m x 0.5 m beam (10 nodes, 20 DOFs)."""
    return BeamGeometry(length=2.0, height=0.5, nx=4, ny=1)


@pytest.fixture(scope="session")
def tiny_mesh(tiny_geometry):
    return build_cantilever_mesh(tiny_geometry)


@pytest.fixture(scope="session")
def unit_material():
    """E = 2.5, nu = 0.25 gives mu = lambda = 1."""
    return MaterialParams(youngs_modulus=2.5, poisson_ratio=0.25)


@pytest.fixture(scope="session")
def beam_material():
    return MaterialParams()


@pytest.fixture(scope="session")
def solve_settings():
    return SolveSettings(load_increments=4)


@pytest.fixture(scope="session")
def tiny_dataset(tiny_mesh, beam_material, solve_settings):
    """40 point-load samples on the tiny beam."""
    return generate_dataset(
        tiny_mesh, beam_material, LoadKind.POINT, (-0.5, 0.5), 40, seed=3,
        settings=solve_settings,
    )


@pytest.fixture(scope="session")
def tiny_testset(tiny_mesh, beam_material, solve_settings):
    return generate_dataset(
        tiny_mesh, beam_material, LoadKind.POINT, (-0.5, 0.5), 6, seed=3,
        settings=solve_settings, stream=1,
    )


@pytest.fixture
def smooth_dataset():
    """Synthetic 2-input dataset whose 8-dim fields live on a 2-dim manifold."""
    rng = np.random.default_rng(11)
    forces = rng.uniform(-1.0, 1.0, size=(30, 2))
    basis = rng.standard_normal((2, 8))
    displacements = np.tanh(forces) @ basis * 0.1
    return Dataset(forces=forces, displacements=displacements, load_kind=LoadKind.BODY)


@pytest.fixture
def small_ae_spec():
    def build(input_dim, latent_dim=2):
        return AutoencoderSpec(
            input_dim=input_dim, encoder_widths=[8, 6], latent_dim=latent_dim
        )
    return build


@pytest.fixture
def quick_train_config():
    return TrainConfig(
        batch_size=8, epochs=30, lr_start=1e-3, lr_end=1e-4, seed=0, validation_fraction=0.1,
        log_every=10,
    )


@pytest.fixture
def quick_gp_config():
    return GPConfig(restarts=1, max_iter=200, seed=0)
