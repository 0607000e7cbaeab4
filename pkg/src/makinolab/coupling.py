"""Potential solve and forcing for the Poisson/Helmholtz couplings.

The screened potential equation (Laplacian - mu^2) phi = Gt * max(rho,0)^p,
p = 2/(gamma-1), is inverted spectrally; for the unscreened (Poisson) case
the mean of the right-hand side is subtracted first, the periodic analogue of
a neutralizing background.  The gradient components come back as
-i xi_j * Gt / (|xi|^2 + mu^2) applied to the transformed density power.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, NegativeDensityError
from .spectral import ScalarField, VectorField, dealias

_EULER = "euler"
_POISSON = "poisson"
_HELMHOLTZ = "helmholtz"


@dataclass(frozen=True)
class PhysParams:
    """Gas and coupling constants.

    gamma: adiabatic exponent (> 1); a_pressure: pressure constant A (> 0);
    kappa: coupling sign/strength (0 selects the pure gas case); mu: screening
    parameter (>= 0); g_const: coupling constant G (> 0).  The derived
    constant g_tilde = 4 pi G ((gamma-1)^2/(4 A gamma))^(1/(gamma-1)) is
    computed here; passing an explicit value cross-checks it to 1e-12.
    """

    gamma: float
    a_pressure: float = 1.0
    kappa: float = 0.0
    mu: float = 0.0
    g_const: float = 1.0
    g_tilde: float = None

    def __post_init__(self):
        if not self.gamma > 1:
            raise ValueError(f"adiabatic exponent must exceed 1, got {self.gamma}")
        if not self.a_pressure > 0:
            raise ValueError("pressure constant must be positive")
        if self.mu < 0:
            raise ValueError("screening parameter must be nonnegative")
        if not self.g_const > 0:
            raise ValueError("coupling constant must be positive")
        expected = derived_g_tilde(self.gamma, self.a_pressure, self.g_const)
        if self.g_tilde is None:
            object.__setattr__(self, "g_tilde", expected)
        elif abs(self.g_tilde - expected) > 1e-12 * abs(expected):
            raise ValueError(
                f"stored g_tilde {self.g_tilde!r} inconsistent with "
                f"(gamma, A, G): expected {expected!r}")

    @property
    def case(self) -> str:
        if self.kappa == 0.0:
            return _EULER
        return _POISSON if self.mu == 0.0 else _HELMHOLTZ

    @property
    def power(self) -> float:
        """Exponent of the density nonlinearity, 2/(gamma-1)."""
        return 2.0 / (self.gamma - 1.0)

    @property
    def sound_coef(self) -> float:
        """(gamma-1)/2, the symmetrized sound-speed coefficient."""
        return (self.gamma - 1.0) / 2.0

    @property
    def makino_coef(self) -> float:
        """2 sqrt(A gamma)/(gamma-1), prefactor of the sound variable."""
        return 2.0 * np.sqrt(self.a_pressure * self.gamma) / (self.gamma - 1.0)


def derived_g_tilde(gamma: float, a_pressure: float, g_const: float) -> float:
    return 4.0 * np.pi * g_const * (
        (gamma - 1.0) ** 2 / (4.0 * a_pressure * gamma)) ** (1.0 / (gamma - 1.0))


def makino_transform(varrho: ScalarField, params: PhysParams) -> ScalarField:
    """Physical density -> sound variable, (2 sqrt(A gamma)/(gamma-1)) rho^((gamma-1)/2)."""
    data = varrho.data
    if float(data.min()) < -1e-12:
        raise NegativeDensityError(
            f"density has samples below the -1e-12 floor (min {data.min():.3e})")
    clamped = np.maximum(data, 0.0)
    out = params.makino_coef * clamped ** ((params.gamma - 1.0) / 2.0)
    return ScalarField(varrho.grid, out, check=False)


def makino_inverse(rho: ScalarField, params: PhysParams) -> ScalarField:
    """Sound variable -> physical density; negative samples clamp to vacuum."""
    clamped = np.maximum(rho.data, 0.0)
    out = (clamped / params.makino_coef) ** (2.0 / (params.gamma - 1.0))
    return ScalarField(rho.grid, out, check=False)


class ClampHealth:
    """Counts how often the density clamp saw a significantly negative input."""

    def __init__(self):
        self.count = 0
        self.worst = 0.0

    def observe(self, min_rho: float, max_rho: float) -> None:
        if max_rho > 0 and min_rho < -1e-8 * max_rho:
            self.count += 1
            self.worst = min(self.worst, min_rho / max_rho)


def density_power(rho: ScalarField, gamma: float,
                  health: ClampHealth | None = None) -> ScalarField:
    """max(rho, 0)^(2/(gamma-1)) pointwise, dealiased at the 2/3-rule radius.

    Clamping (rather than |rho|^p) keeps the forcing one-sided, consistent
    with a nonnegative physical density; significantly negative inputs only
    bump the health counter.
    """
    if not gamma > 1:
        raise ValueError(f"adiabatic exponent must exceed 1, got {gamma}")
    if health is not None:
        health.observe(float(rho.data.min()), float(rho.data.max()))
    p = 2.0 / (gamma - 1.0)
    clamped = np.maximum(rho.data, 0.0)
    if p == round(p) and 1 <= p <= 16:
        # integer exponents by repeated squaring (float pow is slow)
        powered = np.ones_like(clamped)
        base, k = clamped, int(round(p))
        while k:
            if k & 1:
                powered = powered * base
            k >>= 1
            if k:
                base = base * base
        if p == 1.0:
            powered = clamped
    else:
        powered = clamped**p
    return dealias(ScalarField(rho.grid, powered, check=False))


def admissible_dimension(case: str, d: int) -> bool:
    if case == _POISSON:
        return d >= 3
    if case == _HELMHOLTZ:
        return d >= 2
    return True


def potential_gradient(rho: ScalarField, params: PhysParams,
                       unsafe: bool = False,
                       health: ClampHealth | None = None) -> VectorField:
    """Forcing-direction field grad(phi) for (Laplacian - mu^2) phi = Gt rho_+^p.

    Returns the zero field without computation in the pure gas case.  For the
    unscreened case the mean of the right-hand side is subtracted before
    inversion (periodic compatibility) and the output has zero mean in every
    component.  Dimension restrictions (unscreened: d >= 3, screened: d >= 2)
    raise DimensionError unless unsafe is set.
    """
    grid = rho.grid
    if params.case == _EULER:
        return VectorField.zeros(grid)
    if not admissible_dimension(params.case, grid.d) and not unsafe:
        need = 3 if params.case == _POISSON else 2
        raise DimensionError(
            f"{params.case} coupling requires d >= {need}, got d = {grid.d} "
            "(pass unsafe=True to explore anyway)")
    h = density_power(rho, params.gamma, health=health)
    hat = h.hat.copy()
    if params.mu == 0.0:
        hat[(0,) * grid.d] = 0.0
        denom = np.where(grid.xi_sq > 0, grid.xi_sq, 1.0)
    else:
        denom = grid.xi_sq + params.mu**2
    phi_hat = -params.g_tilde * hat / denom
    if params.mu == 0.0:
        phi_hat[(0,) * grid.d] = 0.0
    grad = VectorField.from_hat(grid, grid.ixi_deriv() * phi_hat)
    if params.mu > 0.0:
        # per-mode multiplier |xi|/(|xi|^2 + mu^2) <= 1/(2 mu)
        bound = params.g_tilde / (2.0 * params.mu) * h.l2()
        assert grad.l2() <= bound * (1.0 + 1e-9) + 1e-300, (
            f"screened-solve bound violated: {grad.l2():.3e} > {bound:.3e}")
    return grad


def rhs_mean(rho: ScalarField, params: PhysParams) -> float:
    """Mean of the density power, the part discarded by the unscreened solve."""
    h = density_power(rho, params.gamma)
    return float(h.hat[(0,) * rho.grid.d].real)
