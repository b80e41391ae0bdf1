"""
Structured Quad Meshes and Load Descriptors

A Mesh2D is the discretised body: nodal coordinates, counter-clockwise
4-node connectivity, the constrained DOFs and the nodes that may carry a point
load. Reference-configuration geometry (shape-function gradients and
Jacobian determinants at the 2x2 Gauss points) is computed once at
construction; a mesh is immutable afterwards and safe to share across threads.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Any, Dict, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from ..core.errors import ShapeError

_GAUSS = 1.0 / np.sqrt(3.0)

# 2x2 Gauss rule on [-1, 1]^2, unit weights.
GAUSS_POINTS = np.array(
    [
        [-_GAUSS, -_GAUSS],
        [_GAUSS, -_GAUSS],
        [_GAUSS, _GAUSS],
        [-_GAUSS, _GAUSS],
    ]
)
GAUSS_WEIGHTS = np.ones(4)


def shape_functions(xi: float, eta: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Bilinear shape functions and their natural derivatives.

    Returns
    -------
    Tuple[np.ndarray, np.ndarray]
        N of shape (4,) and dN/d(xi, eta) of shape (4, 2).
    """
    N = 0.25 * np.array(
        [
            (1 - xi) * (1 - eta),
            (1 + xi) * (1 - eta),
            (1 + xi) * (1 + eta),
            (1 - xi) * (1 + eta),
        ]
    )
    dN = 0.25 * np.array(
        [
            [-(1 - eta), -(1 - xi)],
            [1 - eta, -(1 + xi)],
            [1 + eta, 1 + xi],
            [-(1 + eta), 1 - xi],
        ]
    )
    return N, dN


# ---------------------------------------------------------------------
# Geometry description
# ---------------------------------------------------------------------

class BeamGeometry(BaseModel):
    """Rectangular cantilever: left edge clamped, top edge loadable."""

    length: float = Field(default=2.0, gt=0, description="Beam length along x [m].")
    height: float = Field(default=0.5, gt=0, description="Beam height along y [m].")
    nx: int = Field(default=16, ge=1, le=400, description="Elements along the length.")
    ny: int = Field(default=4, ge=1, le=100, description="Elements through the height.")

    model_config = ConfigDict(frozen=True, extra="forbid")


# ---------------------------------------------------------------------
# Mesh
# ---------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Mesh2D:
    """
    Immutable 2D quad mesh.

    Attributes
    ----------
    node_coords : np.ndarray
        (n_nodes, 2) reference positions [m].
    elements : np.ndarray
        (n_elements, 4) counter-clockwise node indices.
    fixed_dofs : np.ndarray
        Sorted constrained global DOF indices (2 * node + component).
    loadable_nodes : np.ndarray
        Nodes that may carry a point load, ordered by distance from the
        fixed boundary.
    descriptor : Dict[str, Any]
        Geometry parameters the mesh was built from (for manifests).
    """

    node_coords: np.ndarray
    elements: np.ndarray
    fixed_dofs: np.ndarray
    loadable_nodes: np.ndarray
    descriptor: Dict[str, Any] = field(default_factory=dict)

    # Derived reference geometry, filled in __post_init__.
    dN_dX: np.ndarray = field(init=False, repr=False)
    det_J0: np.ndarray = field(init=False, repr=False)
    N_gauss: np.ndarray = field(init=False, repr=False)
    element_dofs: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        coords = np.asarray(self.node_coords, dtype=float)
        elements = np.asarray(self.elements, dtype=np.int64)
        fixed = np.unique(np.asarray(self.fixed_dofs, dtype=np.int64))
        loadable = np.asarray(self.loadable_nodes, dtype=np.int64)

        if coords.ndim != 2 or coords.shape[1] != 2:
            raise ShapeError(f"node_coords must be (n, 2), got {coords.shape}.")
        if elements.ndim != 2 or elements.shape[1] != 4:
            raise ShapeError(f"elements must be (m, 4), got {elements.shape}.")
        n_nodes = coords.shape[0]
        if elements.size and (elements.min() < 0 or elements.max() >= n_nodes):
            raise ValueError("Element connectivity references a node that does not exist.")
        if fixed.size == 0:
            raise ValueError("Mesh must constrain at least one DOF.")
        if fixed.min() < 0 or fixed.max() >= 2 * n_nodes:
            raise ValueError("fixed_dofs out of range.")

        N_gauss = np.empty((4, 4))
        dN_dxi = np.empty((4, 4, 2))
        for g, (xi, eta) in enumerate(GAUSS_POINTS):
            N_gauss[g], dN_dxi[g] = shape_functions(xi, eta)

        X_el = coords[elements]                                  # (e, a, J)
        jac = np.einsum("eaI,gaj->egIj", X_el, dN_dxi)           # dX_I/dxi_j
        det = jac[..., 0, 0] * jac[..., 1, 1] - jac[..., 0, 1] * jac[..., 1, 0]
        if np.any(det <= 0):
            bad = int(np.argwhere(det <= 0)[0, 0])
            raise ValueError(
                f"Element {bad} has a non-positive reference Jacobian; "
                "connectivity must be counter-clockwise."
            )
        inv = np.linalg.inv(jac)                                 # dxi_j/dX_I
        dN_dX = np.einsum("gaj,egjI->egaI", dN_dxi, inv)

        element_dofs = np.stack([2 * elements, 2 * elements + 1], axis=-1).reshape(-1, 8)

        for arr in (coords, elements, fixed, loadable, dN_dX, det, N_gauss, element_dofs):
            arr.setflags(write=False)

        object.__setattr__(self, "node_coords", coords)
        object.__setattr__(self, "elements", elements)
        object.__setattr__(self, "fixed_dofs", fixed)
        object.__setattr__(self, "loadable_nodes", loadable)
        object.__setattr__(self, "dN_dX", dN_dX)
        object.__setattr__(self, "det_J0", det)
        object.__setattr__(self, "N_gauss", N_gauss)
        object.__setattr__(self, "element_dofs", element_dofs)

    @property
    def n_nodes(self) -> int:
        return int(self.node_coords.shape[0])

    @property
    def n_elements(self) -> int:
        return int(self.elements.shape[0])

    @property
    def dof_count(self) -> int:
        return 2 * self.n_nodes

    @property
    def free_dofs(self) -> np.ndarray:
        mask = np.ones(self.dof_count, dtype=bool)
        mask[self.fixed_dofs] = False
        return np.flatnonzero(mask)

    def loadable_distances(self) -> np.ndarray:
        """Distance of every loadable node from the fixed boundary [m]."""
        x_fixed = self.node_coords[self.fixed_dofs // 2, 0].min()
        return self.node_coords[self.loadable_nodes, 0] - x_fixed

    def node_for_distance(self, d: float) -> int:
        """Snap a distance from the fixed boundary to the nearest loadable node."""
        if self.loadable_nodes.size == 0:
            raise ValueError("Mesh has no loadable edge.")
        # argmin returns the first minimum, so ties go to the node nearer the support.
        idx = int(np.argmin(np.abs(self.loadable_distances() - d)))
        return int(self.loadable_nodes[idx])


def build_cantilever_mesh(geometry: BeamGeometry | None = None) -> Mesh2D:
    """
    Mesh a rectangular cantilever with nx x ny bilinear quads.

    The left edge (x = 0) is fully clamped. The loadable edge is the top
    edge (y = height) minus its clamped corner node.
    """
    geo = geometry or BeamGeometry()
    nx, ny = geo.nx, geo.ny

    xs = np.linspace(0.0, geo.length, nx + 1)
    ys = np.linspace(0.0, geo.height, ny + 1)
    X, Y = np.meshgrid(xs, ys)                      # node id = j * (nx + 1) + i
    coords = np.column_stack([X.ravel(), Y.ravel()])

    i, j = np.meshgrid(np.arange(nx), np.arange(ny))
    n0 = (j * (nx + 1) + i).ravel()
    elements = np.column_stack([n0, n0 + 1, n0 + nx + 2, n0 + nx + 1])

    clamped = np.arange(ny + 1) * (nx + 1)
    fixed = np.sort(np.concatenate([2 * clamped, 2 * clamped + 1]))
    top = ny * (nx + 1) + np.arange(1, nx + 1)

    return Mesh2D(
        node_coords=coords,
        elements=elements,
        fixed_dofs=fixed,
        loadable_nodes=top,
        descriptor=geo.model_dump(),
    )


# ---------------------------------------------------------------------
# Load descriptors
# ---------------------------------------------------------------------

class LoadKind(str, enum.Enum):
    """How the compressed force vector f is interpreted."""

    POINT = "point"
    BODY = "body"

    @property
    def input_dim(self) -> int:
        return 3 if self is LoadKind.POINT else 2


@dataclass(frozen=True)
class LoadSpec:
    """
    Compressed external load descriptor f.

    POINT: components (fx [N], fy [N], d [m]); BODY: (bx, by) [N/kg].
    """

    kind: LoadKind
    components: Tuple[float, ...]

    def __post_init__(self) -> None:
        kind = LoadKind(self.kind)
        comps = tuple(float(c) for c in self.components)
        if len(comps) != kind.input_dim:
            raise ShapeError(
                f"{kind.value} load expects {kind.input_dim} components, got {len(comps)}."
            )
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "components", comps)

    @classmethod
    def point(cls, fx: float, fy: float, d: float) -> LoadSpec:
        return cls(LoadKind.POINT, (fx, fy, d))

    @classmethod
    def body(cls, bx: float, by: float) -> LoadSpec:
        return cls(LoadKind.BODY, (bx, by))

    @classmethod
    def from_vector(cls, kind: LoadKind | str, vector: np.ndarray) -> LoadSpec:
        return cls(LoadKind(kind), tuple(np.asarray(vector, dtype=float).ravel()))

    def as_vector(self) -> np.ndarray:
        return np.asarray(self.components, dtype=float)

    @property
    def force(self) -> np.ndarray:
        """The in-plane force (or force density) components."""
        return np.asarray(self.components[:2], dtype=float)
