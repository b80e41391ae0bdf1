"""
Total-Lagrangian Assembly

Residual and consistent tangent of the discretised virtual-work statement

    R(u) = f_int(u) - load_factor * f_ext

for bilinear quads with full 2x2 Gauss integration (unit thickness). Fixed
DOFs are eliminated by zeroing their rows and columns and placing a unit
diagonal, which keeps the tangent symmetric and exactly enforces u = 0 there.
"""

from __future__ import annotations

import logging
from typing import Tuple, Union

import numpy as np
import scipy.sparse as sp

from ..core.errors import InvertedElement, ShapeError
from .material import DeformationState, MaterialParams, material_tangent, piola_stress
from .mesh import GAUSS_WEIGHTS, LoadKind, LoadSpec, Mesh2D

logger = logging.getLogger("surrogate.fem")

Matrix = Union[np.ndarray, sp.csr_matrix]


def _check_field(mesh: Mesh2D, u: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.shape != (mesh.dof_count,):
        raise ShapeError(f"Displacement must have {mesh.dof_count} entries, got {u.shape}.")
    return u


def deformation_gradients(mesh: Mesh2D, u: np.ndarray) -> DeformationState:
    """
    Deformation gradient at every element quadrature point.

    Raises
    ------
    InvertedElement
        With the index of the first element that has J <= 0.
    """
    u = _check_field(mesh, u)
    u_el = u[mesh.element_dofs].reshape(mesh.n_elements, 4, 2)      # (e, a, i)
    grad_u = np.einsum("eai,egaJ->egiJ", u_el, mesh.dN_dX)
    state = DeformationState.from_gradient(grad_u + np.eye(2))
    if np.any(state.J <= 0):
        element = int(np.argwhere(state.J <= 0)[0, 0])
        raise InvertedElement(
            f"Element {element} inverted (det F <= 0).",
            element=element,
        )
    return state


def internal_force(mesh: Mesh2D, mat: MaterialParams, u: np.ndarray) -> np.ndarray:
    """Unconstrained internal force vector f_int = int P : grad(delta u) dV."""
    return _internal_force(mesh, mat, deformation_gradients(mesh, u))


def _internal_force(mesh: Mesh2D, mat: MaterialParams, state: DeformationState) -> np.ndarray:
    P = piola_stress(state, mat)
    wdet = mesh.det_J0 * GAUSS_WEIGHTS                                  # (e, g)
    f_el = np.einsum("egiJ,egaJ,eg->eai", P, mesh.dN_dX, wdet)
    f = np.zeros(mesh.dof_count)
    np.add.at(f, mesh.element_dofs, f_el.reshape(mesh.n_elements, 8))
    return f


def internal_force_scale(mesh: Mesh2D, mat: MaterialParams) -> float:
    """Norm of the internal force produced by a unit-magnitude stress, times the moduli."""
    wdet = mesh.det_J0 * GAUSS_WEIGHTS
    f_el = np.einsum("egaJ,eg->ea", np.abs(mesh.dN_dX), wdet)
    f = np.zeros(mesh.n_nodes)
    np.add.at(f, mesh.elements, f_el)
    return float((mat.mu + abs(mat.lam)) * np.sqrt(2.0) * np.linalg.norm(f))


def external_force(mesh: Mesh2D, mat: MaterialParams, load: LoadSpec) -> np.ndarray:
    """
    Reference external force vector at load factor 1.

    POINT loads act on the loadable node nearest to distance d; BODY loads
    are integrated consistently, f_a = int rho b N_a dV.
    """
    f = np.zeros(mesh.dof_count)
    if load.kind is LoadKind.POINT:
        node = mesh.node_for_distance(load.components[2])
        f[2 * node: 2 * node + 2] = load.force
        return f

    wdet = mesh.det_J0 * GAUSS_WEIGHTS
    nodal = np.einsum("ga,eg->ea", mesh.N_gauss, wdet)                 # int N_a dV
    f_el = mat.density * nodal[:, :, None] * load.force[None, None, :]
    np.add.at(f, mesh.element_dofs, f_el.reshape(mesh.n_elements, 8))
    return f


def _tangent_triplets(
    mesh: Mesh2D,
    state: DeformationState,
    mat: MaterialParams,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    A = material_tangent(state, mat)
    wdet = mesh.det_J0 * GAUSS_WEIGHTS
    k_el = np.einsum("egaJ,egiJkL,egbL,eg->eaibk", mesh.dN_dX, A, mesh.dN_dX, wdet)
    k_el = k_el.reshape(mesh.n_elements, 8, 8)
    rows = np.repeat(mesh.element_dofs, 8, axis=1).ravel()
    cols = np.tile(mesh.element_dofs, (1, 8)).ravel()
    return rows, cols, k_el.ravel()


def _apply_constraints(
    mesh: Mesh2D,
    K: Matrix,
    R: np.ndarray,
    sparse: bool,
) -> Tuple[np.ndarray, Matrix]:
    fixed = mesh.fixed_dofs
    R[fixed] = 0.0
    if sparse:
        keep = np.ones(mesh.dof_count)
        keep[fixed] = 0.0
        D = sp.diags(keep)
        unit = sp.diags(1.0 - keep)
        return R, (D @ K @ D + unit).tocsr()
    K[fixed, :] = 0.0
    K[:, fixed] = 0.0
    K[fixed, fixed] = 1.0
    return R, K


def assemble(
    mesh: Mesh2D,
    mat: MaterialParams,
    u: np.ndarray,
    load: LoadSpec,
    load_factor: float,
    *,
    sparse: bool = False,
    f_ext: np.ndarray | None = None,
) -> Tuple[np.ndarray, Matrix]:
    """
    Constrained residual and tangent at displacement *u*.

    Parameters
    ----------
    mesh : Mesh2D
        Discretised body.
    mat : MaterialParams
        Neo-Hookean constants.
    u : np.ndarray
        Current displacement field (dof_count,).
    load : LoadSpec
        External load descriptor.
    load_factor : float
        Fraction of the load applied, 0 <= load_factor <= 1.
    sparse : bool
        Return the tangent as CSR instead of a dense array.
    f_ext : np.ndarray | None
        Precomputed reference external force (skips recomputation).

    Returns
    -------
    Tuple[np.ndarray, Matrix]
        (residual, tangent); residual is zero and the tangent row/column is the
        unit vector at every fixed DOF.

    Raises
    ------
    InvertedElement
        If an element inverts at *u*.
    """
    if not 0.0 <= load_factor <= 1.0:
        raise ValueError(f"load_factor must lie in [0, 1], got {load_factor}.")
    u = _check_field(mesh, u)
    if f_ext is None:
        f_ext = external_force(mesh, mat, load)

    state = deformation_gradients(mesh, u)
    R = _internal_force(mesh, mat, state) - load_factor * f_ext

    rows, cols, vals = _tangent_triplets(mesh, state, mat)
    K_coo = sp.coo_matrix((vals, (rows, cols)), shape=(mesh.dof_count, mesh.dof_count))
    K: Matrix = K_coo.tocsr() if sparse else K_coo.toarray()
    return _apply_constraints(mesh, K, R, sparse)
