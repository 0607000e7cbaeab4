"""Decay exponents and fits, mass tracking, the bootstrap ODE, and
functional-inequality ratio statistics.

The "up to a constant" inequalities are never tested against a specific
constant: ensembles of seeded band-limited fields give a max ratio whose
stability under resolution refinement is the testable statement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .coupling import PhysParams, makino_inverse
from .errors import DomainError, InsufficientWindowError, StiffnessError
from .spectral import (Grid, ScalarField, frac_lambda, hs_norm, random_band_limited,
                       spectral_grad, vector_jacobian)


@dataclass(frozen=True)
class DecayExponents:
    """Rate bookkeeping for one (d, gamma, sigma) triple.

    c_dg = min(1, d (gamma-1)/2) - d/2 is the zero-order rate, c_dgs = c_dg
    + sigma the order-sigma rate, and a = 1 + d/2 + c_dg the bootstrap weight
    (a > 1 exactly when gamma > 1).
    """

    d: int
    gamma: float
    sigma: float
    c_dg: float
    c_dgs: float
    a: float


def decay_exponents(d: int, gamma: float, sigma: float) -> DecayExponents:
    if not gamma > 1:
        raise ValueError(f"adiabatic exponent must exceed 1, got {gamma}")
    if sigma < 0:
        raise ValueError(f"norm order must be >= 0, got {sigma}")
    c_dg = min(1.0, d * (gamma - 1.0) / 2.0) - d / 2.0
    return DecayExponents(d=d, gamma=float(gamma), sigma=float(sigma),
                          c_dg=c_dg, c_dgs=c_dg + sigma, a=1.0 + d / 2.0 + c_dg)


@dataclass
class NormSeries:
    """Time series of pair norms for several orders, with weighted views."""

    times: np.ndarray
    sigmas: tuple
    x: np.ndarray          # (len(times), len(sigmas)), homogeneous norms
    d: int
    gamma: float

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.float64)
        self.x = np.asarray(self.x, dtype=np.float64)
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")
        if np.any(self.x < 0):
            raise ValueError("norm values must be nonnegative")

    def _col(self, sigma: float) -> np.ndarray:
        for j, s in enumerate(self.sigmas):
            if s == sigma:
                return self.x[:, j]
        raise KeyError(f"sigma {sigma} not tracked (have {self.sigmas})")

    def x_of(self, sigma: float) -> np.ndarray:
        return self._col(sigma)

    def weighted(self, sigma: float) -> np.ndarray:
        """(1+t)^c_dgs X_sigma, the rate-compensated norm (bounded iff decay holds)."""
        e = decay_exponents(self.d, self.gamma, sigma)
        return (1.0 + self.times) ** e.c_dgs * self._col(sigma)

    def bootstrap(self, sigma: float) -> np.ndarray:
        """(1+t)^(c_dgs - a) X_sigma, the variable driven by the bootstrap ODE."""
        e = decay_exponents(self.d, self.gamma, sigma)
        return (1.0 + self.times) ** (e.c_dgs - e.a) * self._col(sigma)

    @classmethod
    def from_trajectory(cls, traj, d: int, gamma: float) -> "NormSeries":
        return cls(times=traj.times, sigmas=traj.sigmas, x=traj.x_sigma,
                   d=d, gamma=gamma)


def mass(state, params: PhysParams) -> float:
    """Total physical mass: box quadrature of the inverse Makino transform."""
    rho = state.rho
    varrho = makino_inverse(rho, params)
    return float(rho.grid.cell_volume * np.sum(varrho.data))


@dataclass(frozen=True)
class FitResult:
    slope: float
    stderr: float
    intercept: float
    window: tuple
    n_samples: int


def fit_power_law(times, values, window) -> FitResult:
    """Least-squares slope of log(values) against log(1+t) over the window.

    Requires window start >= 1 (power laws in 1+t are asymptotic; early
    transients bias slopes) and at least 10 positive samples inside.
    """
    times = np.asarray(times, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    t0, t1 = float(window[0]), float(window[1])
    if t0 < 1.0:
        raise InsufficientWindowError(f"fit window must start at t >= 1, got {t0}")
    sel = (times >= t0) & (times <= t1) & (values > 0)
    if int(sel.sum()) < 10:
        raise InsufficientWindowError(
            f"need >= 10 positive samples in [{t0}, {t1}], found {int(sel.sum())}")
    lx = np.log(1.0 + times[sel])
    ly = np.log(values[sel])
    n = lx.size
    mx, my = lx.mean(), ly.mean()
    sxx = float(np.sum((lx - mx) ** 2))
    slope = float(np.sum((lx - mx) * (ly - my)) / sxx)
    intercept = my - slope * mx
    resid = ly - (intercept + slope * lx)
    var = float(np.sum(resid**2)) / max(n - 2, 1)
    stderr = math.sqrt(var / sxx)
    return FitResult(slope=slope, stderr=stderr, intercept=float(intercept),
                     window=(t0, t1), n_samples=n)


def decay_fit(series: NormSeries, sigma: float, window) -> FitResult:
    return fit_power_law(series.times, series.x_of(sigma), window)


@dataclass(frozen=True)
class OdeParams:
    """Side conditions of the bootstrap inequality: a > 1, m > 0, m' < m a.

    c = 0 is admitted as the degenerate linear case (exact power-law decay).
    """

    a: float
    m: float
    m_prime: float
    c: float
    y0: float

    def __post_init__(self):
        if not self.a > 1:
            raise ValueError(f"weight exponent a must exceed 1, got {self.a}")
        if not self.m > 0:
            raise ValueError(f"power gap m must be positive, got {self.m}")
        if not self.m_prime < self.m * self.a:
            raise ValueError(
                f"need m' < m a, got m' = {self.m_prime} >= {self.m * self.a}")
        if self.c < 0:
            raise ValueError(f"forcing constant must be >= 0, got {self.c}")
        if self.y0 < 0:
            raise ValueError(f"initial value must be >= 0, got {self.y0}")


@dataclass
class OdeLemmaResult:
    times: np.ndarray
    y: np.ndarray
    envelope: np.ndarray
    verdict: bool
    blow_up: bool
    params: OdeParams


def _ode_envelope(p: OdeParams, t: np.ndarray) -> np.ndarray:
    return 2.0 * np.exp(p.c * t / (1.0 + t)) * p.y0 / (1.0 + t) ** p.a


def ode_lemma_run(p: OdeParams, t_end: float, rtol: float = 1e-9,
                  n_out: int = 400) -> OdeLemmaResult:
    """Integrate the saturated bootstrap ODE and check the decay envelope.

    dY/dt = -a Y/(1+t) + C (Y/(1+t)^2 + Y^2 + (1+t)^(m'-1) Y^(m+1)),
    the inequality taken as equality (the extremal trajectory).  Verdict is
    True iff Y(t) <= 2 e^(Ct/(1+t)) Y0 (1+t)^-a at every output time.
    Finite-time escape (or a collapsed step) is reported as blow_up with a
    False verdict rather than raised.
    """
    if not t_end > 0:
        raise ValueError("t_end must be positive")
    cap = 1e6 * max(p.y0, 1.0)

    def rhs(t, y):
        yc = max(float(y[0]), 0.0)
        lin = -p.a * yc / (1.0 + t)
        forcing = p.c * (yc / (1.0 + t) ** 2 + yc**2
                         + (1.0 + t) ** (p.m_prime - 1.0) * yc ** (p.m + 1.0))
        return [lin + forcing]

    def escape(t, y):
        return y[0] - cap
    escape.terminal = True
    escape.direction = 1

    t_eval = np.concatenate(([0.0], np.geomspace(min(1e-3, t_end / 1e3), t_end, n_out)))
    if p.y0 == 0.0:
        y = np.zeros_like(t_eval)
        return OdeLemmaResult(t_eval, y, _ode_envelope(p, t_eval), True, False, p)
    sol = solve_ivp(rhs, (0.0, t_end), [p.y0], method="DOP853", rtol=rtol,
                    atol=max(p.y0, 1e-30) * 1e-15, t_eval=t_eval,
                    events=escape, dense_output=False)
    blow_up = bool(sol.t_events[0].size) or sol.status == -1
    if sol.status not in (-1, 0, 1):
        raise StiffnessError(f"ODE solver failed: {sol.message}")
    times = sol.t
    y = sol.y[0]
    env = _ode_envelope(p, times)
    verdict = (not blow_up) and bool(np.all(y <= env * (1.0 + 1e-8) + 1e-300))
    return OdeLemmaResult(times, y, env, verdict, blow_up, p)


def bisect_ode_threshold(a: float, m: float, m_prime: float, c: float,
                         t_end: float = 1e3, precision: float = 0.02):
    """Largest initial value with a True verdict, bracketed by bisection.

    Returns (lo, hi): verdict holds at lo, fails at hi, hi/lo <= 1+precision.
    Requires c > 0 (with c = 0 the envelope holds for every initial value).
    """
    if not c > 0:
        raise ValueError("threshold search needs a positive forcing constant")

    def ok(y0):
        return ode_lemma_run(OdeParams(a, m, m_prime, c, y0), t_end).verdict

    lo = 1e-4
    for _ in range(40):
        if ok(lo):
            break
        lo /= 8.0
    else:
        raise StiffnessError("no admissible initial value found down to 1e-40")
    hi = max(1.0, 2.0 * lo)
    for _ in range(40):
        if not ok(hi):
            break
        hi *= 4.0
    else:
        raise StiffnessError("no failing initial value found up to the cap")
    while hi / lo > 1.0 + precision:
        mid = math.sqrt(lo * hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo, hi


def _commutator(v: ScalarField, u: ScalarField, s: float) -> np.ndarray:
    """[v, Lambda^s] u = v Lambda^s u - Lambda^s (v u), physical samples."""
    grid = v.grid
    lam_u = frac_lambda(u, s)
    prod = ScalarField(grid, v.data * u.data, check=False)
    return v.data * lam_u.data - frac_lambda(prod, s).data


def ineq_ratio(kind: str, *, v: ScalarField | None = None,
               u: ScalarField | None = None, z: ScalarField | None = None,
               s: float | None = None, sigma: float | None = None,
               alpha: float | None = None) -> float:
    """LHS/RHS of one functional inequality on concrete fields.

    kind 'com1': |[v,L^s]u| / (|v|_{H^s} |u|_inf + |grad v|_inf |u|_{H^(s-1)}),
    kind 'com2': the same commutator minus its leading symbol
                 s grad v . L^(s-2) grad u, against
                 |v|_{H^s} |u|_inf + |grad^2 v|_inf |u|_{H^(s-2)},
    kind 'compo': ||z|^alpha|_{H^sigma} / (|z|_inf^(alpha-1) |z|_{H^sigma}).

    Inputs must be band-limited below half the dealiasing radius so the
    commutator products are alias-free.  Returns 0 when both sides vanish.
    """
    if kind == "compo":
        if z is None or sigma is None or alpha is None:
            raise TypeError("compo needs z, sigma and alpha")
        if alpha < 1:
            raise DomainError(f"composition power must be >= 1, got {alpha}")
        if not 0 <= sigma < alpha + 0.5:
            raise DomainError(
                f"need 0 <= sigma < alpha + 1/2, got sigma={sigma}, alpha={alpha}")
        grid = z.grid
        powered = ScalarField(grid, np.abs(z.data) ** alpha, check=False)
        lhs = hs_norm(powered, sigma)
        zinf = float(np.max(np.abs(z.data)))
        rhs = zinf ** (alpha - 1.0) * hs_norm(z, sigma)
        return 0.0 if rhs == 0.0 else lhs / rhs

    if v is None or u is None or s is None:
        raise TypeError(f"{kind} needs v, u and s")
    grid = v.grid
    if kind == "com1":
        if not s > 0:
            raise DomainError(f"first-order commutator needs s > 0, got {s}")
        comm = _commutator(v, u, s)
        lhs = ScalarField(grid, comm, check=False).l2()
        grad_v = spectral_grad(v)
        rhs = (hs_norm(v, s) * float(np.max(np.abs(u.data)))
               + float(np.max(grad_v.magnitude())) * hs_norm(u, s - 1.0))
        return 0.0 if rhs == 0.0 else lhs / rhs
    if kind == "com2":
        if not s > 1:
            raise DomainError(f"second-order commutator needs s > 1, got {s}")
        comm = _commutator(v, u, s)
        grad_v = spectral_grad(v)
        grad_u = spectral_grad(u)
        corr = np.zeros(grid.shape)
        for j in range(grid.d):
            lam = frac_lambda(ScalarField(grid, grad_u.data[j],
                                          hat=grad_u.hat[j], check=False), s - 2.0)
            corr += grad_v.data[j] * lam.data
        lhs = ScalarField(grid, comm - s * corr, check=False).l2()
        hess = vector_jacobian(grad_v)
        hess_inf = float(np.max(np.sqrt(np.einsum("ij...,ij...->...", hess, hess))))
        rhs = (hs_norm(v, s) * float(np.max(np.abs(u.data)))
               + hess_inf * hs_norm(u, s - 2.0))
        return 0.0 if rhs == 0.0 else lhs / rhs
    raise DomainError(f"unknown inequality kind {kind!r}")


@dataclass
class RatioSweep:
    kind: str
    ratios: np.ndarray
    max_ratio: float
    argmax_seed: int


def ineq_ratio_sweep(kind: str, grid: Grid, n_seeds: int, root_seed: int,
                     kmax: int | None = None, s: float | None = None,
                     sigma: float | None = None, alpha: float | None = None,
                     spectral_slope: float = 1.0) -> RatioSweep:
    """Max inequality ratio over a seeded ensemble of random band-limited fields.

    Per-task seeds spawn deterministically from the root seed; kmax defaults
    to half the dealiasing radius in integer modes (alias-free products).
    The same root seed reproduces the same underlying trigonometric
    polynomials on any grid resolving kmax, so ratios can be compared across
    resolutions.
    """
    if kmax is None:
        kmax = grid.n // 6
    children = np.random.SeedSequence(root_seed).spawn(n_seeds)
    ratios = np.zeros(n_seeds)
    for i, child in enumerate(children):
        sub = child.spawn(2)
        if kind == "compo":
            z = random_band_limited(grid, kmax, sub[0], spectral_slope,
                                    include_mean=True)
            ratios[i] = ineq_ratio(kind, z=z, sigma=sigma, alpha=alpha)
        else:
            v = random_band_limited(grid, kmax, sub[0], spectral_slope)
            u = random_band_limited(grid, kmax, sub[1], spectral_slope)
            ratios[i] = ineq_ratio(kind, v=v, u=u, s=s)
    idx = int(np.argmax(ratios))
    return RatioSweep(kind=kind, ratios=ratios, max_ratio=float(ratios[idx]),
                      argmax_seed=idx)
