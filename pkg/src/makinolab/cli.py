"""Configuration parsing, experiment presets and bit-reproducible artifacts.

A run consumes one TOML config (or a named preset), executes, and leaves an
artifact directory containing the fully resolved config echo, a CSV time
series, and a JSON verdict report.  No wall-clock or host state enters the
artifacts: identical config + seed gives byte-identical CSV and JSON.

Exit codes: 0 success, 2 config invalid, 3 admissibility rejection,
4 numerical failure (blow-up / CFL / flow inversion / guard health).
"""

from __future__ import annotations

import argparse
import hashlib
import itertools
import json
import sys
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:                       # Python 3.10
    import tomli as tomllib

from . import __version__, spectral
from .burgers import BumpPerturbation, BurgersRef, check_H0, k_decay_series
from .coupling import PhysParams
from .diagnostics import (ineq_ratio_sweep, bisect_ode_threshold, decay_exponents,
                          fit_power_law, ode_lemma_run, OdeParams)
from .errors import AdmissibilityError, ConfigError, MakinolabError
from .evolve import RunConfig, Trajectory, admissibility_check, integrate
from .spectral import Grid

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ADMISSIBILITY = 3
EXIT_NUMERICAL = 4

# (type, default) per key; unknown sections/keys are rejected.
_SCHEMA = {
    "": {
        "seed": (int, 2024),
        "threads": (int, 1),
        "unsafe": (bool, False),
    },
    "grid": {
        "d": (int, 1),
        "n": (int, 512),
        "length": (float, 40.0),
    },
    "params": {
        "gamma": (float, 2.0),
        "a_pressure": (float, 1.0),
        "kappa": (float, 0.0),
        "mu": (float, 0.0),
        "g_const": (float, 1.0),
    },
    "burgers": {
        "linear_scale": (float, 1.0),
        "bump_amplitude": (float, 0.0),
        "bump_radius": (float, 1.0),
        "bump_wavenumber": (float, 0.0),
    },
    "run": {
        "s": (float, 2.6),
        "t_end": (float, 5.0),
        "dt": (float, 0.0),            # 0 -> fixed from the t=0 CFL bound
        "cfl": (float, 0.4),
        "sigmas": (list, [0.0, 1.0, 2.6]),
        "out_dt": (float, 0.25),
        "delta": (float, 1e-2),
        "rho_profile": (str, "prolate"),
        "rho_radius": (float, 1.0),
        "w_mode": (str, "gradient"),
        "support_rtol": (float, 1e-8),
        "guard_margin": (float, 0.1),
    },
    "fit": {
        "window": (list, [1.0, 0.0]),  # end 0 -> t_end
        "sigmas": (list, []),          # empty -> run sigmas
    },
    "burgers_run": {
        "t_min": (float, 1.0),
        "t_max": (float, 30.0),
        "n_times": (int, 40),
        "sigmas": (list, [0.5, 1.0, 1.5]),
        "k_fit_start": (float, 2.0),
    },
    "ineq": {
        "n": (int, 256),
        "n_seeds": (int, 200),
        "com1_s": (float, 1.5),
        "com2_s": (float, 2.5),
        "compo_sigma": (float, 1.2),
        "compo_alpha": (float, 1.5),
    },
    "sweep": {
        "gamma": (list, []),
        "delta": (list, []),
        "n": (list, []),
        "dt": (list, []),
    },
}

PRESETS = {
    # pure gas smoke run, seconds
    "euler-1d-baseline": {
        "grid": {"d": 1, "n": 512, "length": 40.0},
        "params": {"gamma": 2.0, "kappa": 0.0, "mu": 0.0},
        "run": {"s": 2.6, "t_end": 5.0, "sigmas": [0.0, 1.0, 2.6]},
    },
    # pure gas decay study
    "euler-1d-decay": {
        "grid": {"d": 1, "n": 2048, "length": 60.0},
        "params": {"gamma": 2.0, "kappa": 0.0, "mu": 0.0},
        "run": {"s": 2.6, "t_end": 25.0, "sigmas": [0.0, 1.0, 2.6]},
        "fit": {"window": [1.0, 25.0]},
    },
    # screened coupling in the plane; the guard threshold sits above the
    # sharp-truncation dust floor at this resolution (measured ~1e-6 of the
    # initial amplitude by t=10) while still far below physical amplitudes
    "helmholtz-2d": {
        "grid": {"d": 2, "n": 256, "length": 28.0},
        "params": {"gamma": 2.0, "kappa": 1.0, "mu": 1.0},
        "run": {"s": 2.4, "t_end": 10.0, "sigmas": [0.0, 2.4], "cfl": 0.8,
                "support_rtol": 1e-5},
    },
    # unscreened coupling in space; the heavyweight configuration (10 grid
    # points across the initial support leave a larger dust floor)
    "poisson-3d": {
        "grid": {"d": 3, "n": 96, "length": 20.0},
        "params": {"gamma": 1.4, "kappa": 1.0, "mu": 0.0},
        "run": {"s": 2.6, "t_end": 8.0, "sigmas": [0.0, 2.6], "cfl": 1.0,
                "support_rtol": 1e-3, "out_dt": 0.5},
    },
    # reference-flow diagnostics only
    "burgers-1d": {
        "grid": {"d": 1, "n": 1024, "length": 128.0},
        "burgers": {"bump_amplitude": 0.3, "bump_radius": 2.0},
    },
}


def default_config() -> dict:
    out = {}
    for section, keys in _SCHEMA.items():
        table = {k: (v[1].copy() if isinstance(v[1], list) else v[1])
                 for k, v in keys.items()}
        if section == "":
            out.update(table)
        else:
            out[section] = table
    return out


def _coerce(section: str, key: str, value):
    typ = _SCHEMA[section][key][0]
    if typ is float and isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if typ is int and isinstance(value, int) and not isinstance(value, bool):
        return value
    if typ is bool and isinstance(value, bool):
        return value
    if typ is str and isinstance(value, str):
        return value
    if typ is list and isinstance(value, list):
        return [float(x) if isinstance(x, (int, float)) and not isinstance(x, bool)
                else x for x in value]
    raise ConfigError(
        f"key {key!r} in section [{section or 'top level'}] must be {typ.__name__}, "
        f"got {type(value).__name__}")


def merge_config(base: dict, overrides: dict) -> dict:
    """Validate overrides against the schema and merge into base (deep)."""
    out = {k: (dict(v) if isinstance(v, dict) else v) for k, v in base.items()}
    for key, value in overrides.items():
        if isinstance(value, dict):
            if key not in _SCHEMA:
                raise ConfigError(f"unknown config section [{key}]")
            for k2, v2 in value.items():
                if k2 not in _SCHEMA[key]:
                    raise ConfigError(f"unknown key {k2!r} in section [{key}]")
                out[key][k2] = _coerce(key, k2, v2)
        else:
            if key not in _SCHEMA[""]:
                raise ConfigError(f"unknown top-level key {key!r}")
            out[key] = _coerce("", key, value)
    return out


def load_config(path: str | Path | None = None, preset: str | None = None,
                overrides: dict | None = None) -> dict:
    cfg = default_config()
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(
                f"unknown preset {preset!r}; have {sorted(PRESETS)}")
        cfg = merge_config(cfg, PRESETS[preset])
    if path is not None:
        try:
            raw = tomllib.loads(Path(path).read_text())
        except (OSError, tomllib.TOMLDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        cfg = merge_config(cfg, raw)
    if overrides:
        cfg = merge_config(cfg, overrides)
    return cfg


def _toml_scalar(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        # repr round-trips doubles exactly; ensure it stays a TOML float
        text = repr(value)
        if "e" not in text and "." not in text and "n" not in text:
            text += ".0"
        return text
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, list):
        return "[" + ", ".join(_toml_scalar(v) for v in value) + "]"
    raise ConfigError(f"cannot serialize {value!r}")


def dump_config(cfg: dict) -> str:
    """Serialize the resolved config as TOML with round-trip float precision."""
    lines = []
    for key in _SCHEMA[""]:
        lines.append(f"{key} = {_toml_scalar(cfg[key])}")
    for section in _SCHEMA:
        if section == "":
            continue
        lines.append("")
        lines.append(f"[{section}]")
        for key in _SCHEMA[section]:
            lines.append(f"{key} = {_toml_scalar(cfg[section][key])}")
    return "\n".join(lines) + "\n"


def build_grid(cfg: dict) -> Grid:
    g = cfg["grid"]
    return Grid(int(g["d"]), int(g["n"]), float(g["length"]))


def build_params(cfg: dict) -> PhysParams:
    p = cfg["params"]
    return PhysParams(gamma=p["gamma"], a_pressure=p["a_pressure"],
                      kappa=p["kappa"], mu=p["mu"], g_const=p["g_const"])


def build_ref(cfg: dict, grid: Grid) -> BurgersRef:
    b = cfg["burgers"]
    pert = None
    if b["bump_amplitude"] != 0.0:
        wv = None
        if b["bump_wavenumber"] != 0.0:
            wv = np.zeros(grid.d)
            wv[0] = b["bump_wavenumber"]
        pert = BumpPerturbation(d=grid.d, amplitude=b["bump_amplitude"],
                                radius=b["bump_radius"], wavevector=wv)
    return BurgersRef(d=grid.d, linear_part=b["linear_scale"] * np.eye(grid.d),
                      perturbation=pert, center=grid.center)


def build_run_config(cfg: dict) -> RunConfig:
    grid = build_grid(cfg)
    params = build_params(cfg)
    ref = build_ref(cfg, grid)
    r = cfg["run"]
    try:
        return RunConfig(
            grid=grid, params=params, ref=ref, s=r["s"], t_end=r["t_end"],
            dt=(None if r["dt"] == 0.0 else r["dt"]), cfl=r["cfl"],
            sigmas=tuple(r["sigmas"]), out_dt=r["out_dt"], delta=r["delta"],
            rho_profile=r["rho_profile"], rho_radius=r["rho_radius"],
            w_mode=r["w_mode"], support_rtol=r["support_rtol"],
            guard_margin=r["guard_margin"], unsafe=cfg["unsafe"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _fmt(x) -> str:
    return repr(float(x))


def series_csv(traj: Trajectory, d: int, gamma: float) -> str:
    """Long-format rows, one per (t, sigma); '.' decimal, repr precision."""
    lines = ["t,sigma,x_sigma,y_sigma,xw_sigma,mass,min_rho,force_l2"]
    exps = {s: decay_exponents(d, gamma, s) for s in traj.sigmas}
    for i, t in enumerate(traj.times):
        for j, s in enumerate(traj.sigmas):
            e = exps[s]
            x = traj.x_sigma[i, j]
            y = (1.0 + t) ** (e.c_dgs - e.a) * x
            xw = (1.0 + t) ** e.c_dgs * x
            lines.append(",".join([
                _fmt(t), _fmt(s), _fmt(x), _fmt(y), _fmt(xw),
                _fmt(traj.mass[i]), _fmt(traj.min_rho[i]),
                _fmt(traj.force_l2[i])]))
    return "\n".join(lines) + "\n"


def run_report(cfg: dict, traj: Trajectory) -> dict:
    d = int(cfg["grid"]["d"])
    gamma = cfg["params"]["gamma"]
    exps = {str(s): decay_exponents(d, gamma, s).__dict__ for s in traj.sigmas}
    weighted = {}
    i1 = int(np.argmin(np.abs(traj.times - 1.0)))
    for j, s in enumerate(traj.sigmas):
        e = decay_exponents(d, gamma, s)
        w = (1.0 + traj.times) ** e.c_dgs * traj.x_sigma[:, j]
        ref = w[i1] if w[i1] > 0 else np.inf
        weighted[str(s)] = {
            "max": float(np.max(w)),
            "at_t1": float(w[i1]),
            "ratio_to_t1": float(np.max(w) / ref) if np.isfinite(ref) else None,
        }
    fits = {}
    fw = cfg["fit"]["window"]
    w0, w1 = fw[0], (fw[1] if fw[1] > 0 else cfg["run"]["t_end"])
    fit_sigmas = cfg["fit"]["sigmas"] or list(traj.sigmas)
    for s in fit_sigmas:
        try:
            f = fit_power_law(traj.times, traj.x_series(float(s)), (w0, w1))
            fits[str(float(s))] = {"slope": f.slope, "stderr": f.stderr,
                                   "window": list(f.window), "n": f.n_samples}
        except (KeyError, MakinolabError) as exc:
            fits[str(float(s))] = {"error": str(exc)}
    mass0 = traj.mass[0]
    drift = float(np.max(np.abs(traj.mass - mass0)) / mass0) if mass0 > 0 else 0.0
    return {
        "version": __version__,
        "seed": cfg["seed"],
        "grid": dict(cfg["grid"]),
        "params": dict(cfg["params"]),
        "s": cfg["run"]["s"],
        "exponents": exps,
        "dt": traj.dt,
        "n_steps": traj.n_steps,
        "epsilon": traj.epsilon,
        "initial_hs": traj.initial_hs,
        "stop_reason": traj.stop_reason,
        "clamp_warnings": traj.clamp_warnings,
        "mass_drift_rel": drift,
        "weighted_norms": weighted,
        "fits": fits,
        "verdicts": {
            "completed": traj.stop_reason in ("completed", "support_near_boundary"),
            "mass_conserved_1e6": drift <= 1e-6,
            "weighted_bounded_3x": all(
                v["ratio_to_t1"] is not None and v["ratio_to_t1"] <= 3.0
                for v in weighted.values()),
        },
    }


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def run_experiment(config: dict | str | Path, out_dir: str | Path,
                   preset: str | None = None, overrides: dict | None = None) -> int:
    """Validate, run one trajectory, write config echo + CSV + JSON report.

    Accepts a path to a TOML file or an already-merged config dict.  Returns
    the process exit code; a machine-readable reason always lands in
    report.json.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    def fail(code: int, reason: str, extra: dict | None = None) -> int:
        payload = {"version": __version__, "status": "error",
                   "exit_code": code, "reason": reason}
        if extra:
            payload.update(extra)
        _write_json(out / "report.json", payload)
        return code

    try:
        if isinstance(config, (str, Path)):
            cfg = load_config(config, preset=preset, overrides=overrides)
        else:
            cfg = load_config(None, preset=preset)
            cfg = merge_config(cfg, config)
            if overrides:
                cfg = merge_config(cfg, overrides)
    except ConfigError as exc:
        return fail(EXIT_CONFIG, str(exc))

    spectral.set_fft_workers(cfg["threads"])
    try:
        run_cfg = build_run_config(cfg)
    except (ConfigError, ValueError) as exc:
        (out / "config.toml").write_text(dump_config(cfg))
        return fail(EXIT_CONFIG, str(exc))

    (out / "config.toml").write_text(dump_config(cfg))
    verdict = admissibility_check(run_cfg.grid.d, run_cfg.params.gamma, run_cfg.s,
                                  run_cfg.params.kappa, run_cfg.params.mu)
    if not verdict.admissible and not cfg["unsafe"]:
        return fail(EXIT_ADMISSIBILITY, "; ".join(verdict.violations),
                    {"admissibility": verdict.as_dict()})
    try:
        traj = integrate(run_cfg)
    except AdmissibilityError as exc:
        return fail(EXIT_ADMISSIBILITY, str(exc))
    except MakinolabError as exc:
        return fail(EXIT_NUMERICAL, f"{type(exc).__name__}: {exc}")
    except ValueError as exc:
        return fail(EXIT_CONFIG, str(exc))

    (out / "series.csv").write_text(
        series_csv(traj, run_cfg.grid.d, run_cfg.params.gamma))
    report = run_report(cfg, traj)
    report["status"] = "ok" if traj.stop_reason != "density_health" else "error"
    report["admissibility"] = verdict.as_dict()
    _write_json(out / "report.json", report)
    if traj.stop_reason == "density_health":
        return EXIT_NUMERICAL
    return EXIT_OK


def run_burgers_diag(config: dict | str | Path, out_dir: str | Path,
                     preset: str | None = None) -> int:
    """Reference-flow decay diagnostics: K norms and second-derivative sup."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        cfg = (load_config(config, preset=preset)
               if isinstance(config, (str, Path)) else
               merge_config(default_config(), config))
        grid = build_grid(cfg)
        ref = build_ref(cfg, grid)
    except ConfigError as exc:
        _write_json(out / "report.json",
                    {"status": "error", "exit_code": EXIT_CONFIG, "reason": str(exc)})
        return EXIT_CONFIG
    (out / "config.toml").write_text(dump_config(cfg))
    spectral.set_fft_workers(cfg["threads"])
    br = cfg["burgers_run"]
    times = np.geomspace(br["t_min"], br["t_max"], int(br["n_times"]))
    try:
        eps = check_H0(ref, grid)
        ser = k_decay_series(ref, grid, times, tuple(br["sigmas"]))
    except MakinolabError as exc:
        _write_json(out / "report.json",
                    {"status": "error", "exit_code": EXIT_NUMERICAL,
                     "reason": f"{type(exc).__name__}: {exc}"})
        return EXIT_NUMERICAL
    lines = ["t,sigma,k_hs,d2v_inf,k_inf"]
    for i, t in enumerate(ser.times):
        for j, s in enumerate(ser.sigmas):
            lines.append(",".join([_fmt(t), _fmt(s), _fmt(ser.k_hs[i, j]),
                                   _fmt(ser.d2v_inf[i]), _fmt(ser.k_inf[i])]))
    (out / "burgers.csv").write_text("\n".join(lines) + "\n")
    d = grid.d
    fits = {"d2v_inf": fit_power_law(ser.times, ser.d2v_inf,
                                     (br["t_min"], br["t_max"])).__dict__}
    for j, s in enumerate(ser.sigmas):
        f = fit_power_law(ser.times, ser.k_hs[:, j], (br["k_fit_start"], br["t_max"]))
        fits[f"k_sigma_{s}"] = dict(f.__dict__, bound=d / 2.0 - s + 0.3)
    _write_json(out / "report.json", {
        "version": __version__, "status": "ok", "epsilon": eps,
        "k_supnorm": ref.k_supnorm, "fits": fits})
    return EXIT_OK


# the acceptance grid of bootstrap-ODE side conditions
ODE_TUPLES = [
    (1.5, 0.5, 0.5, 0.5), (1.5, 0.5, 0.5, 1.0), (1.5, 1.0, 1.0, 0.5),
    (1.5, 1.0, 1.0, 2.0), (1.5, 2.0, 2.5, 1.0), (2.0, 0.5, 0.75, 0.5),
    (2.0, 1.0, 1.5, 1.0), (2.0, 1.0, 1.5, 0.25), (2.0, 1.0, -1.0, 1.0),
    (2.0, 2.0, 3.0, 1.0), (2.5, 0.5, 1.0, 1.0), (2.5, 1.0, 2.0, 2.0),
    (2.5, 1.5, 3.0, 0.5), (3.0, 0.5, 1.2, 1.0), (3.0, 1.0, 2.5, 1.0),
    (3.0, 2.0, 5.0, 0.5), (3.0, 1.0, 0.0, 2.0), (4.0, 0.5, 1.5, 1.0),
    (4.0, 1.0, 3.5, 0.5), (4.0, 2.0, 7.0, 1.0),
]


def run_ode_lemma(out_dir: str | Path, t_end: float = 1e3,
                  tuples=None) -> int:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    ok_all = True
    for (a, m, mp, c) in (tuples or ODE_TUPLES):
        lo, hi = bisect_ode_threshold(a, m, mp, c, t_end)
        half = ode_lemma_run(OdeParams(a, m, mp, c, lo / 2.0), t_end)
        ok = lo > 0 and half.verdict
        ok_all = ok_all and ok
        rows.append({"a": a, "m": m, "m_prime": mp, "c": c,
                     "threshold_lo": lo, "threshold_hi": hi,
                     "half_verdict": half.verdict, "ok": ok})
    _write_json(out / "ode_report.json",
                {"version": __version__, "t_end": t_end, "tuples": rows,
                 "all_ok": ok_all})
    return EXIT_OK if ok_all else EXIT_NUMERICAL


def run_ineq_suite(config: dict | str | Path, out_dir: str | Path) -> int:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = (load_config(config) if isinstance(config, (str, Path))
           else merge_config(default_config(), config))
    (out / "config.toml").write_text(dump_config(cfg))
    iq = cfg["ineq"]
    n = int(iq["n"])
    seeds = int(iq["n_seeds"])
    root = cfg["seed"]
    kmax = n // 6
    report = {"version": __version__, "seed": root, "n": n, "n_seeds": seeds}
    ok = True
    for kind, kw in (("com1", {"s": iq["com1_s"]}),
                     ("com2", {"s": iq["com2_s"]}),
                     ("compo", {"sigma": iq["compo_sigma"],
                                "alpha": iq["compo_alpha"]})):
        coarse = ineq_ratio_sweep(kind, Grid(1, n, 2 * np.pi), seeds, root,
                                  kmax=kmax, **kw)
        fine = ineq_ratio_sweep(kind, Grid(1, 2 * n, 2 * np.pi), seeds, root,
                                kmax=kmax, **kw)
        rel = abs(fine.max_ratio - coarse.max_ratio) / coarse.max_ratio
        good = np.isfinite(coarse.max_ratio) and rel <= 0.10
        ok = ok and good
        report[kind] = {"max_ratio": coarse.max_ratio,
                        "max_ratio_refined": fine.max_ratio,
                        "rel_change": rel, "stable_10pct": bool(good), **kw}
    report["all_ok"] = bool(ok)
    _write_json(out / "ineq_report.json", report)
    return EXIT_OK if ok else EXIT_NUMERICAL


def run_sweep(config: dict | str | Path, out_dir: str | Path,
              preset: str | None = None) -> int:
    """Cartesian sweep over the [sweep] axes; one subdirectory per run."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = (load_config(config, preset=preset)
           if isinstance(config, (str, Path)) else
           merge_config(default_config(), config))
    axes = []
    for key, section, name in (("gamma", "params", "gamma"),
                               ("delta", "run", "delta"),
                               ("n", "grid", "n"),
                               ("dt", "run", "dt")):
        values = cfg["sweep"][key]
        if values:
            axes.append([(section, name, v) for v in values])
    if not axes:
        axes = [[("params", "gamma", cfg["params"]["gamma"])]]
    tasks = list(itertools.product(*axes))
    manifest = []
    worst = EXIT_OK
    for idx, combo in enumerate(tasks):
        sub = merge_config(cfg, {})
        for section, name, value in combo:
            value = int(value) if name == "n" else value
            sub = merge_config(sub, {section: {name: value}})
        run_dir = out / f"run_{idx:04d}"
        code = run_experiment(sub, run_dir)
        worst = max(worst, code)
        manifest.append({"dir": run_dir.name, "exit_code": code,
                         "combo": [{"section": s, "key": k, "value": v}
                                   for s, k, v in combo]})
    _write_json(out / "manifest.json", {"version": __version__, "runs": manifest})
    return worst


def run_fit(run_dir: str | Path, window) -> int:
    """Offline refit of a stored series.csv."""
    run_dir = Path(run_dir)
    csv_path = run_dir / "series.csv"
    if not csv_path.exists():
        print(f"no series.csv under {run_dir}", file=sys.stderr)
        return EXIT_CONFIG
    rows = csv_path.read_text().strip().split("\n")
    header = rows[0].split(",")
    it, isg, ix = header.index("t"), header.index("sigma"), header.index("x_sigma")
    data = {}
    for line in rows[1:]:
        parts = line.split(",")
        data.setdefault(float(parts[isg]), []).append(
            (float(parts[it]), float(parts[ix])))
    fits = {}
    for sigma, pairs in sorted(data.items()):
        t = np.array([p[0] for p in pairs])
        x = np.array([p[1] for p in pairs])
        w1 = window[1] if window[1] > 0 else float(t.max())
        try:
            f = fit_power_law(t, x, (window[0], w1))
            fits[str(sigma)] = {"slope": f.slope, "stderr": f.stderr,
                                "window": list(f.window), "n": f.n_samples}
        except MakinolabError as exc:
            fits[str(sigma)] = {"error": str(exc)}
    _write_json(run_dir / "fit.json", {"version": __version__, "fits": fits})
    return EXIT_OK


def sha256_of(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _add_common(p):
    p.add_argument("--config", type=str, default=None, help="TOML config path")
    p.add_argument("--preset", type=str, default=None,
                   help=f"named preset: {', '.join(sorted(PRESETS))}")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", type=str, required=True, help="artifact directory")
    p.add_argument("--unsafe", action="store_true",
                   help="run despite an admissibility rejection")
    p.add_argument("--threads", type=int, default=None, help="FFT worker count")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="makinolab",
        description="pseudo-spectral decay laboratory for expanding gas flows")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, descr in (("run", "integrate one trajectory"),
                        ("burgers", "reference-flow decay diagnostics"),
                        ("sweep", "fan out runs over config axes"),
                        ("ineq-test", "commutator/composition ratio suites"),
                        ("ode-lemma", "bootstrap ODE threshold verdicts")):
        p = sub.add_parser(name, help=descr)
        if name == "ode-lemma":
            p.add_argument("--out", type=str, required=True)
            p.add_argument("--t-end", type=float, default=1e3)
        else:
            _add_common(p)
    pf = sub.add_parser("fit", help="refit slopes from a stored series.csv")
    pf.add_argument("--run-dir", type=str, required=True)
    pf.add_argument("--window", type=float, nargs=2, default=[1.0, 0.0])
    args = parser.parse_args(argv)

    if args.command == "fit":
        return run_fit(args.run_dir, tuple(args.window))
    if args.command == "ode-lemma":
        return run_ode_lemma(args.out, t_end=args.t_end)

    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "threads", None) is not None:
        overrides["threads"] = args.threads
    if getattr(args, "unsafe", False):
        overrides["unsafe"] = True
    try:
        if args.command == "run":
            return run_experiment(args.config or {}, args.out,
                                  preset=args.preset, overrides=overrides)
        if args.command == "burgers":
            cfg = load_config(args.config, preset=args.preset, overrides=overrides)
            return run_burgers_diag(cfg, args.out)
        if args.command == "sweep":
            cfg = load_config(args.config, preset=args.preset, overrides=overrides)
            return run_sweep(cfg, args.out)
        if args.command == "ineq-test":
            cfg = load_config(args.config, preset=args.preset, overrides=overrides)
            return run_ineq_suite(cfg, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
