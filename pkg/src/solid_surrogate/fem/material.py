"""
Neo-Hookean Material (plane strain)

Stored energy, first Piola-Kirchhoff stress and the consistent material
tangent for the compressible Neo-Hookean law

    W(F) = mu/2 (Ic - 3 - 2 ln J) + lambda/4 (J^2 - 1 - 2 ln J)

reduced to plane strain: the in-plane 2x2 deformation gradient is used with an
implicit F33 = 1, so J = det(F) and Ic = tr(F^T F) + 1.

All constitutive functions are vectorised over leading axes, so a
DeformationState may hold a single F of shape (2, 2) or a stack of shape
(..., 2, 2) (e.g. every quadrature point of a mesh).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, computed_field, model_validator

from ..core.errors import IncompressibleMaterial, InvertedElement


# ---------------------------------------------------------------------
# Material Parameters
# ---------------------------------------------------------------------

def lame_from_engineering(E: float, nu: float) -> Tuple[float, float]:
    """
    Convert Young's modulus and Poisson's ratio to Lame parameters.

    Parameters
    ----------
    E : float
        Young's modulus [Pa], strictly positive.
    nu : float
        Poisson's ratio, 0 <= nu < 0.5.

    Returns
    -------
    Tuple[float, float]
        (mu, lambda) in Pa.

    Raises
    ------
    IncompressibleMaterial
        If nu >= 0.5.
    ValueError
        If E <= 0 or nu < 0.
    """
    if nu >= 0.5:
        raise IncompressibleMaterial(
            f"Poisson ratio {nu} is incompressible; plane-strain Neo-Hookean requires nu < 0.5."
        )
    if E <= 0:
        raise ValueError(f"Young's modulus must be positive, got {E}.")
    if nu < 0:
        raise ValueError(f"Poisson ratio must be non-negative, got {nu}.")

    mu = E / (2.0 * (1.0 + nu))
    lam = E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))
    return mu, lam


class MaterialParams(BaseModel):
    """
    Isotropic Neo-Hookean material constants.

    The Lame pair (mu, lambda) is always derived from (E, nu), so the two
    parametrisations cannot drift apart.
    """

    youngs_modulus: float = Field(
        default=500.0,
        gt=0,
        description="Young's modulus E [Pa].",
    )

    poisson_ratio: float = Field(
        default=0.4,
        ge=0,
        description="Poisson's ratio nu (must stay below 0.5).",
    )

    density: float = Field(
        default=1.0,
        gt=0,
        description="Mass density rho [kg/m^3]; scales body forces.",
    )

    model_config = ConfigDict(frozen=True, extra="forbid")

    @model_validator(mode="after")
    def _check_compressible(self) -> MaterialParams:
        lame_from_engineering(self.youngs_modulus, self.poisson_ratio)
        return self

    @computed_field  # type: ignore[prop-decorator]
    @property
    def mu(self) -> float:
        return lame_from_engineering(self.youngs_modulus, self.poisson_ratio)[0]

    @computed_field  # type: ignore[prop-decorator]
    @property
    def lam(self) -> float:
        return lame_from_engineering(self.youngs_modulus, self.poisson_ratio)[1]


# ---------------------------------------------------------------------
# Kinematics
# ---------------------------------------------------------------------

@dataclass(frozen=True)
class DeformationState:
    """In-plane deformation gradient with its plane-strain invariants."""

    F: np.ndarray
    J: np.ndarray
    Ic: np.ndarray

    @classmethod
    def from_gradient(cls, F: np.ndarray) -> DeformationState:
        F = np.asarray(F, dtype=float)
        if F.shape[-2:] != (2, 2):
            raise ValueError(f"Deformation gradient must end in (2, 2), got {F.shape}.")
        J = F[..., 0, 0] * F[..., 1, 1] - F[..., 0, 1] * F[..., 1, 0]
        Ic = np.einsum("...iJ,...iJ->...", F, F) + 1.0
        return cls(F=F, J=J, Ic=Ic)


def _inverse_transpose(state: DeformationState) -> np.ndarray:
    """F^{-T} of a stack of 2x2 matrices via the adjugate."""
    F = state.F
    cof = np.empty_like(F)
    cof[..., 0, 0] = F[..., 1, 1]
    cof[..., 0, 1] = -F[..., 1, 0]
    cof[..., 1, 0] = -F[..., 0, 1]
    cof[..., 1, 1] = F[..., 0, 0]
    return cof / state.J[..., None, None]


def _require_admissible(state: DeformationState) -> None:
    J = np.asarray(state.J).reshape(-1)
    bad = np.flatnonzero(J <= 0)
    if bad.size:
        raise InvertedElement(f"Non-positive Jacobian det(F)={J[bad[0]]:.3e}.")


# ---------------------------------------------------------------------
# Constitutive Law
# ---------------------------------------------------------------------

def strain_energy(state: DeformationState, mat: MaterialParams) -> np.ndarray:
    """
    Neo-Hookean stored energy density W [Pa].

    Raises
    ------
    InvertedElement
        If any J <= 0.
    """
    _require_admissible(state)
    log_J = np.log(state.J)
    return (
        0.5 * mat.mu * (state.Ic - 3.0 - 2.0 * log_J)
        + 0.25 * mat.lam * (state.J**2 - 1.0 - 2.0 * log_J)
    )


def piola_stress(state: DeformationState, mat: MaterialParams) -> np.ndarray:
    """
    First Piola-Kirchhoff stress P = dW/dF = mu (F - F^-T) + lambda/2 (J^2 - 1) F^-T.

    Raises
    ------
    InvertedElement
        If any J <= 0.
    """
    _require_admissible(state)
    F_inv_T = _inverse_transpose(state)
    coeff = 0.5 * mat.lam * (state.J**2 - 1.0)
    return mat.mu * (state.F - F_inv_T) + coeff[..., None, None] * F_inv_T


def material_tangent(state: DeformationState, mat: MaterialParams) -> np.ndarray:
    """
    Consistent tangent A_iJkL = dP_iJ / dF_kL, shape (..., 2, 2, 2, 2).

    A = mu d_ik d_JL + (mu - lambda/2 (J^2 - 1)) G_iL G_kJ + lambda J^2 G_iJ G_kL
    with G = F^-T. Major symmetry A_iJkL = A_kLiJ holds by construction.

    Raises
    ------
    InvertedElement
        If any J <= 0.
    """
    _require_admissible(state)
    G = _inverse_transpose(state)
    J2 = state.J**2
    eye = np.eye(2)

    identity_part = mat.mu * np.einsum("ik,JL->iJkL", eye, eye)
    c_swap = mat.mu - 0.5 * mat.lam * (J2 - 1.0)
    c_vol = mat.lam * J2

    swap = np.einsum("...iL,...kJ->...iJkL", G, G)
    vol = np.einsum("...iJ,...kL->...iJkL", G, G)
    return (
        identity_part
        + c_swap[..., None, None, None, None] * swap
        + c_vol[..., None, None, None, None] * vol
    )
