"""
Incremental Newton-Raphson Static Solver

Drives the load factor from 0 to 1 in uniform increments and solves each
increment with full Newton iterations on the consistent tangent. A failed
increment (no convergence, element inversion or a singular tangent) is retried
from the last converged state with half the step; after a successful retry the
step is allowed to grow back towards its nominal size.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Literal, Tuple

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from pydantic import BaseModel, ConfigDict, Field

from ..core.errors import InvertedElement, NonConvergence
from .assembly import assemble, external_force, internal_force_scale
from .material import MaterialParams
from .mesh import LoadSpec, Mesh2D

logger = logging.getLogger("surrogate.fem")

# Residual norms below this many ulps of the internal-force scale are round-off.
ROUNDOFF_ULPS = 1e3


class SolveSettings(BaseModel):
    """Controls for the incremental Newton solve."""

    load_increments: int = Field(
        default=10,
        ge=1,
        description="Nominal number of uniform load increments.",
    )

    newton_tol: float = Field(
        default=1e-8,
        gt=0,
        description=(
            "Relative residual tolerance ||R|| / ||lambda f_ext||; residuals at the "
            "round-off level of the internal force also count as converged."
        ),
    )

    max_newton_iters: int = Field(
        default=20,
        ge=1,
        description="Newton iterations allowed per increment before halving.",
    )

    max_step_halvings: int = Field(
        default=8,
        ge=0,
        description="Maximum depth of step halving before giving up.",
    )

    gauss_points: Literal[2] = Field(
        default=2,
        description="Gauss points per direction (full 2x2 integration only).",
    )

    linear_solver: Literal["dense", "sparse"] = Field(
        default="dense",
        description="Backend for the Newton correction solve.",
    )

    model_config = ConfigDict(frozen=True, extra="forbid")


@dataclass(frozen=True)
class DisplacementField:
    """
    Nodal displacements ordered (u_x node0, u_y node0, u_x node1, ...).

    The diagnostic fields describe how the solve finished.
    """

    values: np.ndarray
    newton_iterations: int = 0
    residual_norm: float = 0.0
    residual_history: Tuple[float, ...] = ()

    def nodal(self) -> np.ndarray:
        """Displacements reshaped to (n_nodes, 2)."""
        return self.values.reshape(-1, 2)


class _IncrementFailed(Exception):
    pass


def _solve_linear(K, rhs: np.ndarray) -> np.ndarray:
    if sp.issparse(K):
        du = spla.spsolve(K.tocsc(), rhs)
    else:
        du = la.solve(K, rhs, assume_a="sym")
    if not np.all(np.isfinite(du)):
        raise _IncrementFailed("non-finite Newton correction")
    return du


def _newton(
    mesh: Mesh2D,
    mat: MaterialParams,
    load: LoadSpec,
    f_ext: np.ndarray,
    u0: np.ndarray,
    load_factor: float,
    settings: SolveSettings,
) -> Tuple[np.ndarray, int, List[float]]:
    free = mesh.free_dofs
    ref = load_factor * np.linalg.norm(f_ext[free])
    floor = ROUNDOFF_ULPS * np.finfo(float).eps * internal_force_scale(mesh, mat)
    u = u0.copy()
    history: List[float] = []

    for iteration in range(settings.max_newton_iters + 1):
        R, K = assemble(
            mesh, mat, u, load, load_factor,
            sparse=settings.linear_solver == "sparse",
            f_ext=f_ext,
        )
        rel = np.linalg.norm(R) / ref
        history.append(float(rel))
        logger.debug("lambda=%.4f iter=%d |R|/|f|=%.3e", load_factor, iteration, rel)
        if rel < settings.newton_tol or (iteration > 0 and np.linalg.norm(R) <= floor):
            return u, iteration + 1, history
        if iteration == settings.max_newton_iters or not np.isfinite(rel):
            break
        try:
            u = u + _solve_linear(K, -R)
        except (la.LinAlgError, RuntimeError, ValueError) as exc:
            raise _IncrementFailed(str(exc)) from exc

    raise _IncrementFailed(f"no convergence after {settings.max_newton_iters} iterations")


def solve_static(
    mesh: Mesh2D,
    mat: MaterialParams,
    load: LoadSpec,
    settings: SolveSettings | None = None,
) -> DisplacementField:
    """
    Solve the hyperelastic boundary-value problem for *load* at full magnitude.

    Parameters
    ----------
    mesh : Mesh2D
        Discretised body.
    mat : MaterialParams
        Neo-Hookean constants.
    load : LoadSpec
        External load descriptor.
    settings : SolveSettings | None
        Increment and Newton controls (defaults if None).

    Returns
    -------
    DisplacementField
        Converged displacements with zero entries at every fixed DOF.

    Raises
    ------
    NonConvergence
        When step halving is exhausted; carries the last converged load factor.
    """
    settings = settings or SolveSettings()
    f_ext = external_force(mesh, mat, load)
    u = np.zeros(mesh.dof_count)

    if not np.any(f_ext[mesh.free_dofs]):
        # Unloaded: the reference configuration is the exact solution.
        return DisplacementField(values=u, newton_iterations=1, residual_norm=0.0)

    nominal = 1.0 / settings.load_increments
    step = nominal
    depth = 0
    load_factor = 0.0
    total_iterations = 0
    history: List[float] = []

    while load_factor < 1.0:
        target = load_factor + step
        if target > 1.0 - 1e-12:
            target = 1.0
        try:
            u_new, iterations, history = _newton(mesh, mat, load, f_ext, u, target, settings)
        except (_IncrementFailed, InvertedElement) as exc:
            depth += 1
            if depth > settings.max_step_halvings:
                raise NonConvergence(
                    f"Newton failed at load factor {target:.4f} after "
                    f"{settings.max_step_halvings} step halvings: {exc}",
                    load_factor=load_factor,
                ) from exc
            step *= 0.5
            logger.debug("Increment to %.4f failed (%s); halving step to %.4g", target, exc, step)
            continue

        u = u_new
        load_factor = target
        total_iterations += iterations
        if depth > 0:
            depth -= 1
            step = min(step * 2.0, nominal)

    u[mesh.fixed_dofs] = 0.0
    return DisplacementField(
        values=u,
        newton_iterations=total_iterations,
        residual_norm=history[-1],
        residual_history=tuple(history),
    )
