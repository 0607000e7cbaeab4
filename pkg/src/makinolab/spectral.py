"""FFT-backed periodic grids, fields, fractional derivatives and Sobolev norms.

Conventions (fixed once, everything downstream relies on them):

* forward transforms carry the 1/n^d factor, so ``hat`` holds actual Fourier
  coefficients of the trigonometric interpolant;
* wavevectors are physical frequencies xi = 2*pi*k/L, so derivative and decay
  exponents are box-size independent;
* norms carry the (L/n)^(d/2) quadrature weight: ``sobolev_norm(f, sigma=0)``
  is the continuum L2 norm of the interpolant on the box;
* the Nyquist mode of odd-order (derivative) multipliers is zeroed.

Real data is stored in physical space; the half-spectrum (rfft layout) is
cached lazily on each field.  Fields are immutable by convention: every public
operation returns a new field.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
import scipy.fft as _fft

from .errors import FieldNotFiniteError, NonZeroMeanError

_FFT_WORKERS = 1


def set_fft_workers(n: int) -> None:
    """Set the worker count for pocketfft transforms (bitwise deterministic)."""
    global _FFT_WORKERS
    _FFT_WORKERS = max(1, int(n))


def get_fft_workers() -> int:
    return _FFT_WORKERS


class Grid:
    """Uniform periodic box [0, L)^d with n points per axis.

    Holds the Fourier-mode bookkeeping shared by every operator: physical
    frequencies per axis, |xi| magnitudes on the half-spectrum layout,
    Hermitian Parseval weights and the 2/3-rule dealiasing mask.
    """

    def __init__(self, d: int, n: int, length: float):
        if d not in (1, 2, 3):
            raise ValueError(f"dimension must be 1, 2 or 3, got {d}")
        if n < 8 or n % 2 != 0:
            raise ValueError(f"points per axis must be even and >= 8, got {n}")
        if not length > 0:
            raise ValueError(f"box edge length must be positive, got {length}")
        self.d = int(d)
        self.n = int(n)
        self.length = float(length)
        self.dx = self.length / self.n
        self.shape = (self.n,) * self.d
        self.rshape = (self.n,) * (self.d - 1) + (self.n // 2 + 1,)
        self.cell_volume = self.dx**self.d
        self.volume = self.length**self.d

        self.x_axis = np.arange(self.n) * self.dx                 # [0, L)
        full = 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.dx)
        half = 2.0 * np.pi * np.fft.rfftfreq(self.n, d=self.dx)
        # broadcastable per-axis frequency arrays on the half-spectrum layout
        self.xi = []
        for axis in range(self.d):
            ax = half if axis == self.d - 1 else full
            shape = [1] * self.d
            shape[axis] = ax.size
            self.xi.append(ax.reshape(shape))
        self.xi_sq = sum(x**2 for x in self.xi)
        self.xi_mag = np.sqrt(self.xi_sq)
        # odd-order multipliers drop the (asymmetric) Nyquist mode
        self.xi_deriv = []
        for axis in range(self.d):
            ax = (half if axis == self.d - 1 else full).copy()
            ax[self.n // 2] = 0.0
            shape = [1] * self.d
            shape[axis] = ax.size
            self.xi_deriv.append(ax.reshape(shape))
        w = np.full(self.n // 2 + 1, 2.0)
        w[0] = 1.0
        w[-1] = 1.0
        self.parseval_weight = w.reshape((1,) * (self.d - 1) + (-1,))
        self.nyquist_xi = np.pi * self.n / self.length
        self.dealias_xi = (2.0 / 3.0) * self.nyquist_xi
        self.dealias_mask = self.xi_mag < self.dealias_xi
        self._points = None
        self._ixi = None

    def ixi_deriv(self) -> np.ndarray:
        """Dense i*xi_j derivative multipliers, shape (d,) + rshape.  Cached."""
        if self._ixi is None:
            out = np.empty((self.d,) + self.rshape, dtype=complex)
            for j in range(self.d):
                out[j] = 1j * np.broadcast_to(self.xi_deriv[j], self.rshape)
            self._ixi = out
        return self._ixi

    def points(self) -> np.ndarray:
        """Physical coordinates, shape (d, n, ..., n).  Cached."""
        if self._points is None:
            mesh = np.meshgrid(*([self.x_axis] * self.d), indexing="ij")
            self._points = np.stack(mesh)
        return self._points

    @property
    def center(self) -> np.ndarray:
        return np.full(self.d, self.length / 2.0)

    def __eq__(self, other):
        return (
            isinstance(other, Grid)
            and (self.d, self.n, self.length) == (other.d, other.n, other.length)
        )

    def __hash__(self):
        return hash((self.d, self.n, self.length))

    def __repr__(self):
        return f"Grid(d={self.d}, n={self.n}, length={self.length})"


def _forward(grid: Grid, data: np.ndarray, axes=None) -> np.ndarray:
    # norm='forward' puts the full 1/n^d on this transform
    return _fft.rfftn(data, axes=axes, workers=_FFT_WORKERS, norm="forward")


def _inverse(grid: Grid, hat: np.ndarray, axes, out_shape) -> np.ndarray:
    return _fft.irfftn(hat, s=out_shape, axes=axes, workers=_FFT_WORKERS,
                       norm="forward")


def _check_finite(data: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(data)):
        raise FieldNotFiniteError(f"{what} contains NaN or Inf samples")


class ScalarField:
    """Real scalar samples on a Grid with a lazily cached half-spectrum."""

    __slots__ = ("grid", "data", "_hat")

    def __init__(self, grid: Grid, data: np.ndarray, hat: np.ndarray | None = None,
                 check: bool = True):
        data = np.asarray(data, dtype=np.float64)
        if data.shape != grid.shape:
            raise ValueError(f"scalar data shape {data.shape} != grid shape {grid.shape}")
        if check:
            _check_finite(data, "scalar field")
        self.grid = grid
        self.data = data
        self._hat = hat

    @property
    def hat(self) -> np.ndarray:
        if self._hat is None:
            self._hat = _forward(self.grid, self.data)
        return self._hat

    @classmethod
    def from_hat(cls, grid: Grid, hat: np.ndarray, check: bool = False) -> "ScalarField":
        axes = tuple(range(grid.d))
        data = _inverse(grid, hat, axes, grid.shape)
        return cls(grid, data, hat=hat, check=check)

    @classmethod
    def zeros(cls, grid: Grid) -> "ScalarField":
        return cls(grid, np.zeros(grid.shape), check=False)

    def l2(self) -> float:
        """Physical-space L2 norm on the box (trapezoid-free exact quadrature)."""
        return float(np.sqrt(self.grid.cell_volume * np.sum(self.data**2)))


class VectorField:
    """d real components on a Grid, data shape (d, n, ..., n)."""

    __slots__ = ("grid", "data", "_hat")

    def __init__(self, grid: Grid, data: np.ndarray, hat: np.ndarray | None = None,
                 check: bool = True):
        data = np.asarray(data, dtype=np.float64)
        if data.shape != (grid.d,) + grid.shape:
            raise ValueError(
                f"vector data shape {data.shape} != {(grid.d,) + grid.shape}")
        if check:
            _check_finite(data, "vector field")
        self.grid = grid
        self.data = data
        self._hat = hat

    @property
    def hat(self) -> np.ndarray:
        if self._hat is None:
            axes = tuple(range(1, self.grid.d + 1))
            self._hat = _forward(self.grid, self.data, axes=axes)
        return self._hat

    @classmethod
    def from_hat(cls, grid: Grid, hat: np.ndarray, check: bool = False) -> "VectorField":
        axes = tuple(range(1, grid.d + 1))
        data = _inverse(grid, hat, axes, grid.shape)
        return cls(grid, data, hat=hat, check=check)

    @classmethod
    def zeros(cls, grid: Grid) -> "VectorField":
        return cls(grid, np.zeros((grid.d,) + grid.shape), check=False)

    def magnitude(self) -> np.ndarray:
        """Pointwise Euclidean magnitude, shape grid.shape."""
        return np.sqrt(np.sum(self.data**2, axis=0))

    def l2(self) -> float:
        return float(np.sqrt(self.grid.cell_volume * np.sum(self.data**2)))


Field = ScalarField | VectorField


@dataclass(frozen=True)
class NormSpec:
    """Sobolev norm selector: order sigma >= 0, homogeneous or inhomogeneous."""

    sigma: float
    mode: str = "homogeneous"

    def __post_init__(self):
        if not np.isfinite(self.sigma) or self.sigma < 0:
            raise ValueError(f"norm order must be finite and >= 0, got {self.sigma}")
        if self.mode not in ("homogeneous", "inhomogeneous"):
            raise ValueError(f"unknown norm mode {self.mode!r}")


def _hs_norm_sq_from_hat(grid: Grid, hat: np.ndarray, sigma: float) -> float:
    """L^d * sum over modes of weight * |xi|^(2 sigma) |hat|^2."""
    if sigma == 0.0:
        mult = 1.0
    else:
        mult = np.zeros(grid.rshape)
        nz = grid.xi_mag > 0
        mult[nz] = grid.xi_mag[nz] ** (2.0 * sigma)
    e = grid.parseval_weight * (hat.real**2 + hat.imag**2) * mult
    return grid.volume * float(np.sum(e))


def sobolev_norm(f: Field, spec: NormSpec | float) -> float:
    """Spectral Sobolev norm of a scalar or vector field.

    For vector fields, the root of the sum of component norms squared.
    ``sobolev_norm(f, NormSpec(0))`` equals the physical-space L2 norm on
    the box by Parseval.
    """
    if not isinstance(spec, NormSpec):
        spec = NormSpec(float(spec))
    grid = f.grid
    hom_sq = _hs_norm_sq_from_hat(grid, f.hat, spec.sigma)
    if spec.mode == "homogeneous" or spec.sigma == 0.0:
        out = np.sqrt(hom_sq)
    else:
        l2_sq = _hs_norm_sq_from_hat(grid, f.hat, 0.0)
        out = np.sqrt(l2_sq + hom_sq)
    if not np.isfinite(out):
        raise FieldNotFiniteError("Sobolev norm is not finite")
    return float(out)


def hs_norm(f: Field, sigma: float, homogeneous: bool = True) -> float:
    """Convenience norm that, unlike NormSpec, also admits negative orders.

    For sigma < 0 the zero mode is excluded (the seminorm of the mean-free
    part), which is the convention every negative-order use here relies on.
    """
    grid = f.grid
    hom_sq = _hs_norm_sq_from_hat(grid, f.hat, float(sigma))
    if homogeneous or sigma == 0.0:
        out = np.sqrt(hom_sq)
    else:
        out = np.sqrt(_hs_norm_sq_from_hat(grid, f.hat, 0.0) + hom_sq)
    if not np.isfinite(out):
        raise FieldNotFiniteError("Sobolev norm is not finite")
    return float(out)


def pair_norm(rho: ScalarField, w: VectorField, sigma: float,
              homogeneous: bool = True) -> float:
    """Norm of the state pair, sqrt(|rho|^2 + |w|^2) at the given order."""
    return float(np.hypot(hs_norm(rho, sigma, homogeneous),
                          hs_norm(w, sigma, homogeneous)))


def frac_lambda(f: ScalarField, s: float) -> ScalarField:
    """Fractional derivative: multiply spectral coefficients by |xi|^s.

    The zero mode is mapped to 0 for s > 0; for s < 0 the input must be
    mean-free (|hat(0)| <= 1e-12 relative), otherwise NonZeroMeanError.
    """
    grid = f.grid
    if s == 0.0:
        return ScalarField(grid, f.data.copy(), hat=None, check=False)
    hat = f.hat
    if s < 0:
        scale = float(np.max(np.abs(hat)))
        zero = abs(hat[(0,) * grid.d])
        if scale > 0 and zero > 1e-12 * scale:
            raise NonZeroMeanError(
                f"zero mode {zero:.3e} exceeds 1e-12 of spectral max {scale:.3e}")
    mult = np.zeros(grid.rshape)
    nz = grid.xi_mag > 0
    mult[nz] = grid.xi_mag[nz] ** s
    return ScalarField.from_hat(grid, hat * mult)


def friedrichs_project(f: Field, radius: float) -> Field:
    """Sharp spectral truncation: zero all coefficients with |xi| >= radius.

    Idempotent and self-adjoint for the L2 inner product; doubles as the
    2/3-rule dealiasing filter at radius grid.dealias_xi.
    """
    if not radius > 0:
        raise ValueError(f"truncation radius must be positive, got {radius}")
    grid = f.grid
    mask = grid.xi_mag < radius
    hat = f.hat * mask
    if isinstance(f, ScalarField):
        return ScalarField.from_hat(grid, hat)
    return VectorField.from_hat(grid, hat)


def dealias(f: Field) -> Field:
    return friedrichs_project(f, f.grid.dealias_xi)


def spectral_grad(f: ScalarField) -> VectorField:
    """Gradient with i*xi_j multipliers (Nyquist modes dropped)."""
    grid = f.grid
    return VectorField.from_hat(grid, grid.ixi_deriv() * f.hat)


def divergence(v: VectorField) -> ScalarField:
    grid = v.grid
    acc = np.sum(grid.ixi_deriv() * v.hat, axis=0)
    return ScalarField.from_hat(grid, acc)


def vector_jacobian(v: VectorField) -> np.ndarray:
    """All partials d_j v_i as a raw array of shape (d, d, n, ..., n)."""
    grid = v.grid
    jac_hat = v.hat[:, None] * grid.ixi_deriv()[None, :]
    axes = tuple(range(2, grid.d + 2))
    return _inverse(grid, jac_hat, axes, grid.shape)


def laplacian(f: ScalarField) -> ScalarField:
    return ScalarField.from_hat(f.grid, -f.grid.xi_sq * f.hat)


def l2_inner(f: Field, g: Field) -> float:
    """Physical-space L2 inner product on the box."""
    return float(f.grid.cell_volume * np.sum(f.data * g.data))


def max_beyond_radius(f: Field, radius: float) -> float:
    """Largest |coefficient| at modes with |xi| >= radius (band-limit check)."""
    grid = f.grid
    mask = grid.xi_mag >= radius
    hat = f.hat
    if isinstance(f, VectorField):
        return float(max(np.max(np.abs(h[mask]), initial=0.0) for h in hat))
    return float(np.max(np.abs(hat[mask]), initial=0.0))


def _half_space_modes(d: int, kmax: int):
    """Integer modes k with 0 < |k| <= kmax, one per conjugate pair."""
    rng = range(-kmax, kmax + 1)
    for k in itertools.product(*([rng] * d)):
        if all(v == 0 for v in k):
            continue
        if sum(v * v for v in k) > kmax * kmax:
            continue
        first = next(v for v in k if v != 0)
        if first < 0:
            continue
        yield k


def random_band_limited(grid: Grid, kmax: int, seed, spectral_slope: float = 1.0,
                        include_mean: bool = False) -> ScalarField:
    """Seeded random real field with integer modes |k| <= kmax.

    The synthesis is resolution independent: the same seed produces samples
    of the same trigonometric polynomial on any grid that resolves kmax.
    """
    rng = np.random.default_rng(seed)
    pts = grid.points()
    base = 2.0 * np.pi / grid.length
    out = np.zeros(grid.shape)
    if include_mean:
        out += rng.standard_normal()
    for k in _half_space_modes(grid.d, kmax):
        a, b = rng.standard_normal(2)
        amp = (1.0 + float(sum(v * v for v in k))) ** (-spectral_slope / 2.0)
        phase = base * sum(kj * pts[j] for j, kj in enumerate(k))
        out += amp * (a * np.cos(phase) + b * np.sin(phase))
    return ScalarField(grid, out, check=False)
