"""Method-of-lines integrator for the perturbation system around the reference flow.

State is the pair (rho, w): the Makino sound variable and the velocity
discrepancy u - v.  The reference velocity enters analytically through the
Burgers module, never as a grid field of its own, so the linearly growing
far-field velocity stays off the periodic box.  Every pointwise product is
formed in physical space and re-truncated at the 2/3-rule radius, mirroring
a sharp spectral regularization of the equations; states stay band limited
after every accepted step.
"""

from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from . import profiles
from .burgers import BurgersEval, BurgersRef, check_H0, eval_burgers
from .coupling import (ClampHealth, PhysParams, density_power, makino_inverse,
                       makino_transform, potential_gradient)
from .diagnostics import mass
from .errors import AdmissibilityError, CflViolationError
from .spectral import (Grid, ScalarField, VectorField, _check_finite, dealias,
                       hs_norm, pair_norm, spectral_grad, vector_jacobian)

OK = "ok"
SUPPORT_NEAR_BOUNDARY = "support_near_boundary"

__all__ = [
    "MakinoState", "RunConfig", "Trajectory", "FlowCache",
    "AdmissibilityVerdict", "admissibility_check", "bb_rhs", "rk4_step",
    "cfl_bound", "horizon_guard", "integrate", "build_initial_state",
    "makino_transform", "makino_inverse", "OK", "SUPPORT_NEAR_BOUNDARY",
]


@dataclass
class MakinoState:
    """Perturbation pair at one time: band-limited (rho, w) snapshots."""

    t: float
    rho: ScalarField
    w: VectorField

    def amplitude(self) -> np.ndarray:
        """Pointwise |rho| + |w|, the support indicator used by the guard."""
        return np.abs(self.rho.data) + self.w.magnitude()


class FlowCache:
    """Memoizes reference-flow grid evaluations by time (stage times repeat)."""

    def __init__(self, ref: BurgersRef, grid: Grid, maxsize: int = 6):
        self.ref = ref
        self.grid = grid
        self.maxsize = maxsize
        self._store: OrderedDict[float, BurgersEval] = OrderedDict()

    def eval(self, t: float) -> BurgersEval:
        key = float(t)
        ev = self._store.get(key)
        if ev is None:
            ev = eval_burgers(self.ref, key, self.grid, with_d2v=False)
            self._store[key] = ev
            if len(self._store) > self.maxsize:
                self._store.popitem(last=False)
        else:
            self._store.move_to_end(key)
        return ev


@dataclass(frozen=True)
class AdmissibilityVerdict:
    case: str
    admissible: bool
    violations: tuple
    s_bound_waived: bool

    def as_dict(self) -> dict:
        return {"case": self.case, "admissible": self.admissible,
                "violations": list(self.violations),
                "s_bound_waived": self.s_bound_waived}


def _coupling_case(kappa: float, mu: float) -> str:
    if kappa == 0.0:
        return "euler"
    return "poisson" if mu == 0.0 else "helmholtz"


def _integer_exponent(gamma: float, tol: float = 1e-9):
    """k with gamma = 1 + 2/k when 2/(gamma-1) is an integer, else None."""
    p = 2.0 / (gamma - 1.0)
    if abs(p - round(p)) <= tol * max(1.0, abs(p)) and round(p) >= 1:
        return int(round(p))
    return None


def _unscreened_violations(d, gamma, s):
    viols = []
    if d < 3:
        viols.append(f"unscreened coupling requires d >= 3 (got d = {d})")
    gmax = 5.0 / 3.0 if d <= 1 else min(5.0 / 3.0, 1.0 + 4.0 / (d - 1))
    if not gamma < gmax:
        viols.append(f"gamma must be strictly below min(5/3, 1 + 4/(d-1)) = {gmax:.6g}")
    k = _integer_exponent(gamma)
    waived = k is not None and k > max(3, d / 2)
    if not waived:
        smax = 1.5 + 2.0 / (gamma - 1.0)
        if not s < smax:
            viols.append(
                f"s must be below 3/2 + 2/(gamma-1) = {smax:.6g} "
                "(no upper bound when gamma = 1 + 2/k, k > max(3, d/2))")
    return viols, waived


def _screened_violations(d, gamma, s):
    viols = []
    if d < 2:
        viols.append(f"screened coupling requires d >= 2 (got d = {d})")
    gmax = 1.0 + 4.0 / (d + 1)
    if not gamma < gmax:
        viols.append(f"gamma must be strictly below 1 + 4/(d+1) = {gmax:.6g}")
    k = _integer_exponent(gamma)
    waived = k is not None and k > 2
    if not waived:
        smax = 0.5 + 2.0 / (gamma - 1.0)
        if not s < smax:
            viols.append(
                f"s must be below 1/2 + 2/(gamma-1) = {smax:.6g} "
                "(no upper bound when gamma = 1 + 2/k, k > 2)")
    return viols, waived


def admissibility_check(d: int, gamma: float, s: float,
                        kappa: float, mu: float) -> AdmissibilityVerdict:
    """Case split for global solvability of the coupled system.

    Pure gas: always admissible (under the standing gamma > 1, s > 1 + d/2).
    Unscreened: d >= 3, gamma < min(5/3, 1 + 4/(d-1)), s < 3/2 + 2/(gamma-1).
    Screened: the unscreened conditions, or d >= 2, gamma < 1 + 4/(d+1) and
    s < 1/2 + 2/(gamma-1).  The s upper bound is waived when gamma = 1 + 2/k
    for an integer k beyond the route's range (k > max(3, d/2) unscreened,
    k > 2 screened), where the density power is polynomial.
    """
    case = _coupling_case(kappa, mu)
    standing = []
    if not gamma > 1:
        standing.append(f"gamma must exceed 1 (got {gamma})")
    if not s > 1 + d / 2:
        standing.append(f"s must exceed 1 + d/2 = {1 + d / 2} (got {s})")
    if standing:
        return AdmissibilityVerdict(case, False, tuple(standing), False)
    if case == "euler":
        return AdmissibilityVerdict(case, True, (), False)
    if case == "poisson":
        viols, waived = _unscreened_violations(d, gamma, s)
        return AdmissibilityVerdict(case, not viols, tuple(viols), waived)
    pois, waived_p = _unscreened_violations(d, gamma, s)
    scr, waived_s = _screened_violations(d, gamma, s)
    if not pois or not scr:
        return AdmissibilityVerdict(case, True, (),
                                    (not pois and waived_p) or (not scr and waived_s))
    return AdmissibilityVerdict(
        case, False,
        tuple(scr) + tuple(f"(unscreened route) {v}" for v in pois),
        waived_p or waived_s)


@dataclass
class RunConfig:
    """Everything one trajectory needs; validated on construction."""

    grid: Grid
    params: PhysParams
    ref: BurgersRef
    s: float
    t_end: float
    dt: float | None = None
    cfl: float = 0.4
    sigmas: tuple = (0.0,)
    out_dt: float = 0.25
    delta: float = 1e-2
    rho_profile: str = "prolate"
    rho_radius: float = 1.0
    w_mode: str = "gradient"
    support_rtol: float = 1e-8
    guard_margin: float = 0.1
    unsafe: bool = False
    initial_state: MakinoState | None = None
    health: ClampHealth = field(default_factory=ClampHealth)

    def __post_init__(self):
        if not self.s > 1 + self.grid.d / 2:
            raise ValueError(
                f"s = {self.s} must exceed 1 + d/2 = {1 + self.grid.d / 2}")
        if not self.t_end > 0:
            raise ValueError("t_end must be positive")
        if self.dt is not None and not self.dt > 0:
            raise ValueError("dt must be positive")
        if not 0 < self.cfl:
            raise ValueError("CFL factor must be positive")
        if not self.delta > 0:
            raise ValueError("smallness delta must be positive")
        if self.w_mode not in ("gradient", "solenoidal", "none"):
            raise ValueError(f"unknown w recipe {self.w_mode!r}")
        if self.rho_profile not in ("prolate", "bump"):
            raise ValueError(f"unknown density profile {self.rho_profile!r}")
        if self.w_mode == "solenoidal" and self.grid.d < 2:
            raise ValueError("solenoidal initial velocity needs d >= 2")
        self.sigmas = tuple(float(x) for x in self.sigmas)


def build_initial_state(cfg: RunConfig) -> MakinoState:
    """Compact band-limited data scaled so the pair H^s norm equals delta."""
    grid = cfg.grid
    if cfg.rho_profile == "prolate":
        c = float(np.clip(0.9 * cfg.rho_radius * grid.dealias_xi, 4.0, 45.0))
        prof = profiles.ProlateProfile(c)
    else:
        prof = profiles.bump
    psi = profiles.radial_samples(grid, prof, cfg.rho_radius)
    base = dealias(ScalarField(grid, psi))
    if cfg.w_mode == "none":
        target = cfg.delta
        w = VectorField.zeros(grid)
    else:
        target = cfg.delta / np.sqrt(2.0)
        grad = spectral_grad(base)
        if cfg.w_mode == "gradient":
            wdata = grad.data.copy()
        else:
            wdata = np.zeros_like(grad.data)
            wdata[0] = grad.data[1]
            wdata[1] = -grad.data[0]
        w_raw = VectorField(grid, wdata, check=False)
        nw = hs_norm(w_raw, cfg.s, homogeneous=False)
        w = VectorField(grid, w_raw.data * (target / nw), check=False)
    nr = hs_norm(base, cfg.s, homogeneous=False)
    rho = ScalarField(grid, base.data * (target / nr),
                      hat=base.hat * (target / nr), check=False)
    return MakinoState(0.0, rho, w)


def bb_rhs(state: MakinoState, t: float, cfg: RunConfig,
           flow: FlowCache | None = None):
    """Right-hand side of the truncated perturbation system.

    d rho = -J[(w+v).grad rho + (gamma-1)/2 rho (div w + div v)]
    d w   = -J[(w+v).grad w + (gamma-1)/2 rho grad rho + Dv w] + kappa grad phi

    with J the 2/3-rule truncation; v, Dv come analytically from the
    reference flow, so div v = tr Dv and w.grad v = Dv w exactly.  All
    products are formed pointwise in physical space.
    """
    grid, params = cfg.grid, cfg.params
    if flow is None:
        flow = FlowCache(cfg.ref, grid)
    ev = flow.eval(t)
    k2 = params.sound_coef
    rho, w = state.rho, state.w
    d = grid.d

    grad_rho = spectral_grad(rho)
    jac_w = vector_jacobian(w)
    div_w = sum(jac_w[i, i] for i in range(d))
    u = ev.v.data + w.data

    drho = k2 * rho.data * (div_w + ev.div_v)
    for j in range(d):
        drho += u[j] * grad_rho.data[j]
    np.negative(drho, out=drho)
    dw = np.empty_like(w.data)
    for i in range(d):
        acc = k2 * rho.data * grad_rho.data[i]
        for j in range(d):
            acc += u[j] * jac_w[i, j]
            acc += ev.dv[i, j] * w.data[j]
        dw[i] = acc
    np.negative(dw, out=dw)
    if params.kappa != 0.0:
        grad_phi = potential_gradient(rho, params, unsafe=cfg.unsafe,
                                      health=cfg.health)
        dw += params.kappa * grad_phi.data
    return (dealias(ScalarField(grid, drho, check=False)),
            dealias(VectorField(grid, dw, check=False)))


def cfl_bound(state: MakinoState, ev: BurgersEval, cfg: RunConfig) -> float:
    """Largest stable step: cfl * dx / (max |v + w| + max rho (gamma-1)/2)."""
    speed = float(np.max(np.sqrt(np.sum((ev.v.data + state.w.data) ** 2, axis=0))))
    speed += cfg.params.sound_coef * float(np.max(np.abs(state.rho.data)))
    if speed == 0.0:
        return math.inf
    return cfg.cfl * cfg.grid.dx / speed


def rk4_step(state: MakinoState, dt: float, cfg: RunConfig,
             flow: FlowCache | None = None, enforce_cfl: bool = True) -> MakinoState:
    """Classical four-stage step of (rho, w); the result is re-truncated."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    grid = cfg.grid
    if flow is None:
        flow = FlowCache(cfg.ref, grid)
    if enforce_cfl:
        bound = cfl_bound(state, flow.eval(state.t), cfg)
        if dt > bound * (1.0 + 1e-9):
            raise CflViolationError(
                f"dt = {dt:.6e} exceeds the advective bound {bound:.6e} at t = {state.t:.6g}")
    t = state.t

    def stage(coef, kr, kw, ts):
        # stage transforms come free: states are linear combinations of
        # fields whose half-spectra are already cached
        rho_s = ScalarField(grid, r0 + coef * kr.data,
                            hat=state.rho.hat + coef * kr.hat, check=False)
        w_s = VectorField(grid, w0 + coef * kw.data,
                          hat=state.w.hat + coef * kw.hat, check=False)
        return bb_rhs(MakinoState(ts, rho_s, w_s), ts, cfg, flow)

    r0, w0 = state.rho.data, state.w.data
    k1r, k1w = bb_rhs(state, t, cfg, flow)
    k2r, k2w = stage(0.5 * dt, k1r, k1w, t + 0.5 * dt)
    k3r, k3w = stage(0.5 * dt, k2r, k2w, t + 0.5 * dt)
    k4r, k4w = stage(dt, k3r, k3w, t + dt)

    c = dt / 6.0
    rho_hat = state.rho.hat + c * (k1r.hat + 2.0 * k2r.hat + 2.0 * k3r.hat + k4r.hat)
    w_hat = state.w.hat + c * (k1w.hat + 2.0 * k2w.hat + 2.0 * k3w.hat + k4w.hat)
    rho_f = ScalarField.from_hat(grid, rho_hat * grid.dealias_mask)
    w_f = VectorField.from_hat(grid, w_hat * grid.dealias_mask)
    _check_finite(rho_f.data, "updated sound variable")
    _check_finite(w_f.data, "updated velocity discrepancy")
    return MakinoState(t + dt, rho_f, w_f)


def _edge_mask(grid: Grid, margin: float) -> np.ndarray:
    close = np.minimum(grid.x_axis, grid.length - grid.x_axis) < margin * grid.length / 2.0
    mask = np.zeros(grid.shape, dtype=bool)
    for axis in range(grid.d):
        shape = [1] * grid.d
        shape[axis] = grid.n
        mask |= close.reshape(shape)
    return mask


def horizon_guard(state: MakinoState, grid: Grid, initial_max: float | None = None,
                  margin: float = 0.1, rtol: float = 1e-8) -> str:
    """Flag when the active region nears the box edge (periodic-proxy validity).

    The active region is where |rho| + |w| exceeds rtol times the initial
    maximum (the state's own maximum when initial_max is omitted); "near" is
    within margin (default 10%) of the half-width from any box face.
    """
    amp = state.amplitude()
    ref_max = float(amp.max()) if initial_max is None else float(initial_max)
    if ref_max == 0.0:
        return OK
    mask = _edge_mask(grid, margin)
    if np.any(amp[mask] > rtol * ref_max):
        return SUPPORT_NEAR_BOUNDARY
    return OK


@dataclass
class Trajectory:
    """Per-cadence diagnostics plus the final state of one run."""

    times: np.ndarray
    sigmas: tuple
    x_sigma: np.ndarray       # (len(times), len(sigmas)) homogeneous pair norms
    mass: np.ndarray
    min_rho: np.ndarray
    force_l2: np.ndarray
    rhs_mean: np.ndarray
    stop_reason: str
    dt: float
    n_steps: int
    epsilon: float
    initial_hs: float
    final_state: MakinoState
    clamp_warnings: int

    def x_series(self, sigma: float) -> np.ndarray:
        for j, s in enumerate(self.sigmas):
            if s == sigma:
                return self.x_sigma[:, j]
        raise KeyError(f"sigma {sigma} not tracked (have {self.sigmas})")


def _diag_row(state: MakinoState, cfg: RunConfig):
    params = cfg.params
    xs = [pair_norm(state.rho, state.w, s) for s in cfg.sigmas]
    m = mass(state, params)
    min_rho = float(state.rho.data.min())
    force = 0.0
    mean = 0.0
    if params.kappa != 0.0:
        h = density_power(state.rho, params.gamma)
        mean = float(h.hat[(0,) * cfg.grid.d].real) if params.mu == 0.0 else 0.0
        grad_phi = potential_gradient(state.rho, params, unsafe=cfg.unsafe)
        force = abs(params.kappa) * grad_phi.l2()
    return xs, m, min_rho, force, mean


def integrate(cfg: RunConfig) -> Trajectory:
    """Advance the truncated system to t_end or to a clean guard stop.

    Preconditions enforced here: coupling admissibility (unless unsafe), the
    spectral margin of the reference flow, and initial-data smallness in H^s.
    The step is fixed from the t = 0 CFL bound (velocities only shrink under
    the spectral margin, so the initial bound is the binding one).
    """
    grid, params = cfg.grid, cfg.params
    verdict = admissibility_check(grid.d, params.gamma, cfg.s, params.kappa, params.mu)
    if not verdict.admissible and not cfg.unsafe:
        raise AdmissibilityError(verdict)
    epsilon = check_H0(cfg.ref, grid)

    state = cfg.initial_state if cfg.initial_state is not None else build_initial_state(cfg)
    initial_hs = pair_norm(state.rho, state.w, cfg.s, homogeneous=False)
    if initial_hs > cfg.delta * (1.0 + 1e-9):
        raise ValueError(
            f"initial pair H^s norm {initial_hs:.3e} exceeds the smallness "
            f"budget delta = {cfg.delta:.3e}")

    flow = FlowCache(cfg.ref, grid)
    ev0 = flow.eval(0.0)
    if cfg.dt is None:
        bound = cfl_bound(state, ev0, cfg)
        n_steps = max(1, math.ceil(cfg.t_end / bound - 1e-12)) if math.isfinite(bound) else 1
    else:
        n_steps = max(1, math.ceil(cfg.t_end / cfg.dt - 1e-9))
    dt = cfg.t_end / n_steps
    out_every = max(1, round(cfg.out_dt / dt))

    initial_max = float(state.amplitude().max())
    times, rows = [], []
    masses, min_rhos, forces, means = [], [], [], []

    def record(st):
        xs, m, mn, f, mean = _diag_row(st, cfg)
        times.append(st.t)
        rows.append(xs)
        masses.append(m)
        min_rhos.append(mn)
        forces.append(f)
        means.append(mean)

    record(state)
    stop_reason = "completed"
    if horizon_guard(state, grid, initial_max, cfg.guard_margin,
                     cfg.support_rtol) != OK:
        stop_reason = SUPPORT_NEAR_BOUNDARY
        n_steps = 0

    for i in range(n_steps):
        state = rk4_step(state, dt, cfg, flow)
        max_rho = float(state.rho.data.max())
        if float(state.rho.data.min()) < -1e-6 * max(1.0, max_rho):
            record(state)
            stop_reason = "density_health"
            break
        if (i + 1) % out_every == 0 or i == n_steps - 1:
            record(state)
            if horizon_guard(state, grid, initial_max, cfg.guard_margin,
                             cfg.support_rtol) != OK:
                stop_reason = SUPPORT_NEAR_BOUNDARY
                break

    return Trajectory(
        times=np.asarray(times),
        sigmas=cfg.sigmas,
        x_sigma=np.asarray(rows),
        mass=np.asarray(masses),
        min_rho=np.asarray(min_rhos),
        force_l2=np.asarray(forces),
        rhs_mean=np.asarray(means),
        stop_reason=stop_reason,
        dt=dt,
        n_steps=n_steps,
        epsilon=epsilon,
        initial_hs=initial_hs,
        final_state=state,
        clamp_warnings=cfg.health.count,
    )
