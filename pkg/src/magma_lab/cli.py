"""Command-line front end.

Five subcommands: ``shoot`` (critical-curvature search or a single shot),
``evolve`` (torus time evolution), ``sweep`` (parameter grids of critical
shots), ``embed`` (periodize an archived profile), and ``diagnose``
(dispersion, peak tracking, energy drift).

Every physical or numerical option can come from a ``key=value`` config
file (``--config``); explicit flags override file values, which override
built-in defaults.  The merged, typed configuration is hashed and written
to ``manifest.json`` in the run directory together with the list of
artifacts produced.

Exit codes: 0 success (including every evolve verdict), 1 configuration
or usage errors, 2 numerical failures, 3 I/O failures.
"""

from __future__ import annotations

import argparse
import glob
import hashlib
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, replace
from datetime import datetime, timezone
from multiprocessing import Pool
from typing import Callable, Sequence

import numpy as np

from . import __version__
from .diagnostics import ConservedEnergyParams, energy_series, fit_dispersion, track_peak
from .evolution import EvolveConfig, evolve, measure_mass
from .grid import Field, TorusGrid, field_stats, hs_norm, read_snapshot, write_snapshot
from .profile import (
    ProfileError,
    ProfileParams,
    ProfileSolution,
    ShotClass,
    decay_check,
    find_mu_c,
    integrate_shot,
    q_star,
    read_profile_csv,
    structure_report,
    write_profile_csv,
)

__all__ = ["main", "RunManifest"]


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise _UsageError(message)


def _fmt(x: float) -> str:
    return repr(float(x))


# -- option tables -----------------------------------------------------------

def _c_float(s: str) -> float:
    return float(s)


def _c_int(s: str) -> int:
    return int(s)


def _c_str(s: str) -> str:
    return s


def _c_bool(s: str) -> bool:
    t = s.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {s!r}")


def _c_ints(s: str) -> list[int]:
    return [int(v) for v in s.split(",") if v != ""]


def _c_floats(s: str) -> list[float]:
    """Comma list of floats, or lo:hi:count for a uniform range."""
    if ":" in s:
        lo, hi, num = s.split(":")
        return [float(x) for x in np.linspace(float(lo), float(hi), int(num))]
    return [float(v) for v in s.split(",") if v != ""]


@dataclass(frozen=True)
class _Opt:
    convert: Callable[[str], object]
    default: object = None
    required: bool = False
    help: str = ""


SHOOT_OPTS: dict[str, _Opt] = {
    "d": _Opt(_c_float, required=True, help="spatial dimension of the profile"),
    "n": _Opt(_c_float, required=True, help="nonlinearity exponent in [2, 3]"),
    "c": _Opt(_c_float, required=True, help="wave speed in [1.55, n)"),
    "mu": _Opt(_c_float, help="fire one shot at this curvature instead of searching"),
    "bisect_tol": _Opt(_c_float, 1e-12, help="bisection width for the critical curvature"),
    "r_max": _Opt(_c_float, 200.0, help="integration radius for classification"),
    "r_max_final": _Opt(_c_float, help="radius for the final critical shot (default 2*r_max)"),
    "r_max_cap": _Opt(_c_float, help="radius ceiling for indeterminate shots (default 32*r_max)"),
    "flat_tol": _Opt(_c_float, 1e-9, help="slope tolerance for the flat classification"),
    "rtol": _Opt(_c_float, 1e-10, help="relative tolerance of the shot integrator"),
    "dr_sample": _Opt(_c_float, 0.01, help="radial sample spacing of stored profiles"),
}

EVOLVE_OPTS: dict[str, _Opt] = {
    "n_points": _Opt(_c_ints, required=True, help="grid points per axis, e.g. 64,64"),
    "lengths": _Opt(_c_floats, help="box side lengths (default 2*pi per axis)"),
    "n": _Opt(_c_float, required=True, help="nonlinearity exponent in [2, 3]"),
    "dt": _Opt(_c_float, required=True, help="time step"),
    "t_end": _Opt(_c_float, required=True, help="final time"),
    "init": _Opt(_c_str, "constant:1.0", help="initial condition spec (see docs)"),
    "threshold": _Opt(_c_float, 1e6, help="monitor value treated as blow-up"),
    "s_monitor": _Opt(_c_float, help="Sobolev index of the monitor (default d/2+floor(d/2)+3)"),
    "snapshot_every": _Opt(_c_int, 0, help="store every k-th step (0: first and last only)"),
    "elliptic_tol": _Opt(_c_float, 1e-10, help="relative residual target of the CG solves"),
    "cg_max_iter": _Opt(_c_int, help="CG iteration cap (default 10*max(n_points))"),
    "adaptive": _Opt(_c_bool, False, help="use step-doubling time-step control"),
    "step_tol": _Opt(_c_float, 1e-8, help="local error target for adaptive stepping"),
}

SWEEP_OPTS: dict[str, _Opt] = {
    "d": _Opt(_c_floats, required=True, help="dimensions, e.g. 1,2,3 or 1:7:4"),
    "n": _Opt(_c_floats, required=True, help="exponents, e.g. 2,2.5,3"),
    "c": _Opt(_c_floats, required=True, help="wave speeds, e.g. 1.55:1.7:5"),
    "bisect_tol": _Opt(_c_float, 1e-8, help="bisection width per grid point"),
    "r_max": _Opt(_c_float, 200.0, help="integration radius for classification"),
}

EMBED_OPTS: dict[str, _Opt] = {
    "profile": _Opt(_c_str, required=True, help="profile.csv or a run directory holding one"),
    "n_points": _Opt(_c_ints, required=True, help="grid points per axis"),
    "lengths": _Opt(_c_floats, help="box side lengths (default 2*pi per axis)"),
    "center": _Opt(_c_floats, help="peak location (default the domain midpoint)"),
}

DISPERSION_OPTS: dict[str, _Opt] = {
    "n_points": _Opt(_c_ints, required=True, help="grid points per axis"),
    "lengths": _Opt(_c_floats, help="box side lengths (default 2*pi per axis)"),
    "n": _Opt(_c_float, required=True, help="nonlinearity exponent in [2, 3]"),
    "mode": _Opt(_c_ints, required=True, help="integer mode per axis, e.g. 1,0"),
    "epsilon": _Opt(_c_float, 1e-4, help="perturbation amplitude"),
    "periods": _Opt(_c_float, 3.0, help="number of analytic periods to integrate"),
    "steps_per_period": _Opt(_c_int, 64, help="RK4 steps per analytic period"),
    "elliptic_tol": _Opt(_c_float, 1e-12, help="relative residual target of the CG solves"),
}

TRACK_OPTS: dict[str, _Opt] = {
    "run": _Opt(_c_str, required=True, help="evolve run directory with snapshots"),
}

ENERGY_OPTS: dict[str, _Opt] = {
    "run": _Opt(_c_str, required=True, help="evolve run directory with snapshots"),
    "n": _Opt(_c_float, required=True, help="nonlinearity exponent in [2, 3]"),
    "m": _Opt(_c_float, 0.0, help="gradient weight of the energy (exact invariant at 0)"),
}


# -- config assembly ---------------------------------------------------------

def _read_kv_file(path: str) -> dict[str, str]:
    with open(path) as fh:
        lines = fh.read().splitlines()
    out: dict[str, str] = {}
    for ln, line in enumerate(lines, start=1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        if "=" not in s:
            raise ValueError(f"{path}:{ln}: expected key=value, got {s!r}")
        key, _, value = s.partition("=")
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def _merge_config(table: dict[str, _Opt], ns: argparse.Namespace) -> dict:
    file_vals = _read_kv_file(ns.config) if getattr(ns, "config", None) else {}
    unknown = sorted(set(file_vals) - set(table))
    if unknown:
        raise ValueError(f"unknown config keys: {', '.join(unknown)}")
    merged: dict = {}
    for dest, opt in table.items():
        raw = getattr(ns, dest, None)
        if raw is None:
            raw = file_vals.get(dest)
        if raw is None:
            if opt.required:
                raise ValueError(f"missing required option '{dest}'")
            merged[dest] = opt.default
        else:
            try:
                merged[dest] = opt.convert(raw)
            except (TypeError, ValueError) as exc:
                raise ValueError(f"bad value for '{dest}': {raw!r} ({exc})") from exc
    return merged


def _config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()


@dataclass(frozen=True)
class RunManifest:
    command: str
    config: dict
    config_hash: str
    created_utc: str
    outputs: list[str]
    version: str


def _write_manifest(out_dir: str, command: str, config: dict, outputs: list[str]) -> None:
    manifest = RunManifest(
        command=command,
        config=config,
        config_hash=_config_hash(config),
        created_utc=datetime.now(timezone.utc).isoformat(timespec="seconds"),
        outputs=list(outputs),
        version=__version__,
    )
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(asdict(manifest), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _make_grid(n_points: list[int], lengths: list[float] | None) -> TorusGrid:
    if lengths is None:
        lengths = [2.0 * math.pi] * len(n_points)
    elif len(lengths) == 1 and len(n_points) > 1:
        lengths = lengths * len(n_points)
    return TorusGrid(tuple(n_points), tuple(lengths))


def _initial_field(spec: str, grid: TorusGrid) -> Field:
    """Initial-condition grammar.

    constant:V                      uniform field V
    modes:base=B;amp=A,k=K1:K2,phase=P;...   cosine modes over background B
    file:PATH                       binary snapshot (grid must match)
    profile:PATH                    embedded solitary profile (csv or run dir)
    """
    kind, sep, rest = spec.partition(":")
    if not sep:
        raise ValueError(f"initial condition {spec!r} lacks a 'kind:' prefix")
    if kind == "constant":
        return Field.constant(grid, float(rest))
    if kind == "modes":
        segments = [s for s in rest.split(";") if s]
        if not segments or not segments[0].startswith("base="):
            raise ValueError("modes spec must open with base=VALUE")
        vals = np.full(grid.shape, float(segments[0][5:]))
        for segment in segments[1:]:
            amp: float | None = None
            phase = 0.0
            kvec: tuple[int, ...] | None = None
            for item in segment.split(","):
                key, _, value = item.partition("=")
                if key == "amp":
                    amp = float(value)
                elif key == "k":
                    kvec = tuple(int(v) for v in value.split(":"))
                elif key == "phase":
                    phase = float(value)
                else:
                    raise ValueError(f"unknown modes key {key!r}")
            if amp is None or kvec is None:
                raise ValueError("every mode needs amp= and k=")
            if len(kvec) != grid.d:
                raise ValueError("mode k needs one integer per axis")
            arg = np.zeros(grid.shape)
            for x, kj in zip(grid.coordinates(), grid.mode_wavevector(kvec)):
                arg = arg + kj * x
            vals = vals + amp * np.cos(arg + phase)
        return Field(grid, vals)
    if kind == "file":
        fld = read_snapshot(rest)
        if fld.grid != grid:
            raise ValueError("snapshot grid does not match the requested grid")
        return fld
    if kind == "profile":
        return _embed_profile(rest, grid, None)
    raise ValueError(f"unknown initial-condition kind {kind!r}")


def _profile_csv_path(path: str) -> str:
    return os.path.join(path, "profile.csv") if os.path.isdir(path) else path


def _embed_profile(path: str, grid: TorusGrid, center: list[float] | None) -> Field:
    from .profile import embed_on_torus

    sol = read_profile_csv(_profile_csv_path(path))
    return embed_on_torus(sol, grid, None if center is None else tuple(center))


def _load_run_snapshots(run_dir: str) -> list[tuple[float, Field]]:
    paths = sorted(glob.glob(os.path.join(run_dir, "snap_*.bin")))
    if not paths:
        raise FileNotFoundError(f"no snapshots found in {run_dir!r}")
    out = []
    for path in paths:
        fld = read_snapshot(path)
        with open(path[:-4] + ".json") as fh:
            sidecar = json.load(fh)
        out.append((float(sidecar["t"]), fld))
    out.sort(key=lambda pair: pair[0])
    return out


# -- subcommand handlers -----------------------------------------------------

def _cmd_shoot(ns: argparse.Namespace) -> int:
    cfg = _merge_config(SHOOT_OPTS, ns)
    outputs: list[str] = []

    if cfg["mu"] is not None:
        params = ProfileParams(d=cfg["d"], n=cfg["n"], c=cfg["c"], mu=cfg["mu"])
        outcome, samples = integrate_shot(
            params, r_max=cfg["r_max"], flat_tol=cfg["flat_tol"],
            rtol=cfg["rtol"], dr_sample=cfg["dr_sample"],
        )
        print(f"classification = {outcome.classification.value}")
        if outcome.r_star is not None:
            print(f"r_star = {_fmt(outcome.r_star)}")
        if outcome.tau is not None:
            print(f"tau = {_fmt(outcome.tau)}")
            print(f"subcase = {outcome.subcase}")
        if outcome.Q_tau is not None:
            print(f"Q_tau = {_fmt(outcome.Q_tau)}")
        if ns.out:
            os.makedirs(ns.out, exist_ok=True)
            sol = ProfileSolution(
                params=params, samples=samples,
                Q_tau=outcome.Q_tau if outcome.Q_tau is not None else float("nan"),
            )
            write_profile_csv(os.path.join(ns.out, "profile.csv"), sol)
            outputs.append("profile.csv")
            _write_manifest(ns.out, "shoot", cfg, outputs)
        return 0

    params = ProfileParams(d=cfg["d"], n=cfg["n"], c=cfg["c"])
    report = structure_report(params)
    mu_c, sol = find_mu_c(
        params, bisect_tol=cfg["bisect_tol"], r_max=cfg["r_max"],
        r_max_final=cfg["r_max_final"], r_max_cap=cfg["r_max_cap"],
        rtol=cfg["rtol"], flat_tol=cfg["flat_tol"], dr_sample=cfg["dr_sample"],
    )
    fit = decay_check(sol)
    sol = replace(sol, decay=fit)
    c_bar = sol.Q_tau ** (1.0 - params.n) * params.c

    print(f"Q_star = {_fmt(report.Q_star)}")
    print(f"Q1 = {_fmt(report.Q1)}")
    print(f"mu1_min = {_fmt(report.mu1_min)}")
    print(f"mu2_min = {_fmt(report.mu2_min)}")
    print(f"mu3_min = {_fmt(report.mu3_min)}")
    print(f"mu_c = {_fmt(mu_c)}")
    print(f"Q_tau = {_fmt(sol.Q_tau)}")
    print(f"c_bar = {_fmt(c_bar)}")
    if fit is not None:
        print(f"decay_k = {_fmt(fit.k)}")
        print(f"decay_M = {_fmt(fit.M)}")
    else:
        print("decay_k = nan")
    if ns.out:
        os.makedirs(ns.out, exist_ok=True)
        write_profile_csv(os.path.join(ns.out, "profile.csv"), sol)
        outputs.append("profile.csv")
        _write_manifest(ns.out, "shoot", cfg, outputs)
    return 0


def _cmd_evolve(ns: argparse.Namespace) -> int:
    cfg = _merge_config(EVOLVE_OPTS, ns)
    grid = _make_grid(cfg["n_points"], cfg["lengths"])
    phi0 = _initial_field(cfg["init"], grid)
    ecfg = EvolveConfig(
        n_exponent=cfg["n"], dt=cfg["dt"], t_end=cfg["t_end"],
        s_monitor=cfg["s_monitor"], blowup_threshold=cfg["threshold"],
        elliptic_tol=cfg["elliptic_tol"], snapshot_every=cfg["snapshot_every"],
        cg_max_iter=cfg["cg_max_iter"], adaptive=cfg["adaptive"],
        step_tol=cfg["step_tol"],
    )
    result = evolve(phi0, ecfg)
    rep = result.report

    os.makedirs(ns.out, exist_ok=True)
    outputs = ["log.csv"]
    with open(os.path.join(ns.out, "log.csv"), "w", newline="") as fh:
        fh.write("t,mass,monitor,min_phi,cg_iters\n")
        for i in range(len(rep.times)):
            fh.write(
                f"{_fmt(rep.times[i])},{_fmt(rep.mass[i])},"
                f"{_fmt(rep.monitor[i])},{_fmt(rep.min_phi[i])},"
                f"{int(rep.cg_iterations[i])}\n"
            )

    cfg_hash = _config_hash(cfg)
    monitor_at = {float(t): float(m) for t, m in zip(rep.times, rep.monitor)}
    for i, (t, fld) in enumerate(result.snapshots):
        stem = f"snap_{i:06d}"
        write_snapshot(fld, os.path.join(ns.out, stem + ".bin"))
        sidecar = {
            "t": float(t),
            "step": i,
            "monitor": monitor_at.get(float(t), float("nan")),
            "config_hash": cfg_hash,
        }
        with open(os.path.join(ns.out, stem + ".json"), "w") as fh:
            json.dump(sidecar, fh, sort_keys=True)
            fh.write("\n")
        outputs.extend([stem + ".bin", stem + ".json"])

    _write_manifest(ns.out, "evolve", cfg, outputs)
    print(f"verdict = {rep.verdict.value}")
    if rep.t_event is not None:
        print(f"t_event = {_fmt(rep.t_event)}")
    print(f"final_monitor = {_fmt(rep.final_monitor)}")
    print(f"snapshots = {len(result.snapshots)}")
    return 0


def _sweep_task(item: tuple[float, float, float, float, float]) -> list[str]:
    """One sweep cell; never raises, reports failures in the last column."""
    d, n, c, bisect_tol, r_max = item
    try:
        params = ProfileParams(d=d, n=n, c=c)
        mu_c, sol = find_mu_c(params, bisect_tol=bisect_tol, r_max=r_max)
        error = ""
        try:
            fit = decay_check(sol)
        except ProfileError as exc:
            fit, error = None, f"{type(exc).__name__}: {exc}"
        k = fit.k if fit is not None else float("nan")
        c_bar = sol.Q_tau ** (1.0 - n) * c
        return [
            _fmt(d), _fmt(n), _fmt(c), _fmt(mu_c), _fmt(sol.Q_tau),
            _fmt(k), _fmt(c_bar), error.replace(",", ";"),
        ]
    except Exception as exc:  # a failed cell must not abort the sweep
        msg = f"{type(exc).__name__}: {exc}".replace(",", ";").replace("\n", " ")
        return [_fmt(d), _fmt(n), _fmt(c), "", "", "", "", msg]


def _cmd_sweep(ns: argparse.Namespace) -> int:
    cfg = _merge_config(SWEEP_OPTS, ns)
    jobs = ns.jobs if ns.jobs is not None else int(os.environ.get("MAGMA_LAB_JOBS", "1"))
    if jobs < 1:
        raise ValueError("jobs must be at least 1")
    items = [
        (d, n, c, cfg["bisect_tol"], cfg["r_max"])
        for d in cfg["d"] for n in cfg["n"] for c in cfg["c"]
    ]
    if jobs == 1:
        rows = [_sweep_task(item) for item in items]
    else:
        with Pool(processes=jobs) as pool:
            rows = pool.map(_sweep_task, items)

    os.makedirs(ns.out, exist_ok=True)
    with open(os.path.join(ns.out, "sweep.csv"), "w", newline="") as fh:
        fh.write("d,n,c,mu_c,Q_tau,k,c_bar,error\n")
        for row in rows:
            fh.write(",".join(row) + "\n")
    _write_manifest(ns.out, "sweep", cfg, ["sweep.csv"])
    failures = sum(1 for row in rows if row[-1])
    print(f"rows = {len(rows)}")
    print(f"failures = {failures}")
    return 0


def _cmd_embed(ns: argparse.Namespace) -> int:
    cfg = _merge_config(EMBED_OPTS, ns)
    grid = _make_grid(cfg["n_points"], cfg["lengths"])
    fld = _embed_profile(cfg["profile"], grid, cfg["center"])

    os.makedirs(ns.out, exist_ok=True)
    write_snapshot(fld, os.path.join(ns.out, "snap_000000.bin"))
    s_default = grid.d / 2 + grid.d // 2 + 3
    sidecar = {
        "t": 0.0,
        "step": 0,
        "monitor": hs_norm(fld - 1.0, s_default) + field_stats(fld).inv_sup,
        "config_hash": _config_hash(cfg),
    }
    with open(os.path.join(ns.out, "snap_000000.json"), "w") as fh:
        json.dump(sidecar, fh, sort_keys=True)
        fh.write("\n")
    _write_manifest(ns.out, "embed", cfg, ["snap_000000.bin", "snap_000000.json"])

    stats = field_stats(fld)
    print(f"peak = {_fmt(stats.max)}")
    print(f"min = {_fmt(stats.min)}")
    print(f"mass = {_fmt(measure_mass(fld))}")
    return 0


def _cmd_diag_dispersion(ns: argparse.Namespace) -> int:
    cfg = _merge_config(DISPERSION_OPTS, ns)
    grid = _make_grid(cfg["n_points"], cfg["lengths"])
    fit = fit_dispersion(
        grid, cfg["n"], tuple(cfg["mode"]), epsilon=cfg["epsilon"],
        periods=cfg["periods"], steps_per_period=cfg["steps_per_period"],
        elliptic_tol=cfg["elliptic_tol"],
    )
    print(f"omega_formula = {_fmt(fit.omega_formula)}")
    print(f"omega_measured = {_fmt(fit.omega_measured)}")
    print(f"relative_error = {_fmt(fit.relative_error)}")
    if ns.out:
        os.makedirs(ns.out, exist_ok=True)
        payload = {
            "mode": list(fit.mode),
            "k": list(fit.k),
            "omega_formula": fit.omega_formula,
            "omega_measured": fit.omega_measured,
            "epsilon": fit.epsilon,
            "relative_error": fit.relative_error,
        }
        with open(os.path.join(ns.out, "dispersion.json"), "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        _write_manifest(ns.out, "diagnose dispersion", cfg, ["dispersion.json"])
    return 0


def _cmd_diag_track(ns: argparse.Namespace) -> int:
    cfg = _merge_config(TRACK_OPTS, ns)
    snapshots = _load_run_snapshots(cfg["run"])
    trace = track_peak(snapshots)
    print(f"snapshots = {len(snapshots)}")
    print(f"speed = {_fmt(trace.speed)}")
    if ns.out:
        os.makedirs(ns.out, exist_ok=True)
        with open(os.path.join(ns.out, "peaks.csv"), "w", newline="") as fh:
            fh.write("t,position\n")
            for t, x in zip(trace.times, trace.positions):
                fh.write(f"{_fmt(t)},{_fmt(x)}\n")
        _write_manifest(ns.out, "diagnose track", cfg, ["peaks.csv"])
    return 0


def _cmd_diag_energy(ns: argparse.Namespace) -> int:
    cfg = _merge_config(ENERGY_OPTS, ns)
    snapshots = _load_run_snapshots(cfg["run"])
    params = ConservedEnergyParams(n=cfg["n"], m=cfg["m"])
    times, energies = energy_series(snapshots, params)
    scale = max(abs(float(energies[0])), 1e-300)
    drift = float(np.max(np.abs(energies - energies[0]))) / scale
    print(f"energy_initial = {_fmt(energies[0])}")
    print(f"energy_final = {_fmt(energies[-1])}")
    print(f"max_relative_drift = {_fmt(drift)}")
    if ns.out:
        os.makedirs(ns.out, exist_ok=True)
        with open(os.path.join(ns.out, "energy.csv"), "w", newline="") as fh:
            fh.write("t,energy\n")
            for t, e in zip(times, energies):
                fh.write(f"{_fmt(t)},{_fmt(e)}\n")
        _write_manifest(ns.out, "diagnose energy", cfg, ["energy.csv"])
    return 0


# -- parser ------------------------------------------------------------------

def _add_table(sub: argparse.ArgumentParser, table: dict[str, _Opt]) -> None:
    for dest, opt in table.items():
        flag = "--" + dest.replace("_", "-")
        if opt.convert is _c_bool:
            sub.add_argument(flag, nargs="?", const="true", default=None,
                             metavar="BOOL", help=opt.help)
        else:
            sub.add_argument(flag, default=None, metavar="V", help=opt.help)


def _add_common(sub: argparse.ArgumentParser, out_required: bool) -> None:
    sub.add_argument("--config", default=None, metavar="FILE",
                     help="key=value file supplying defaults for any option")
    sub.add_argument("--out", "-o", default=None, required=out_required,
                     metavar="DIR", help="run directory for artifacts and manifest")


def _build_parser() -> _Parser:
    parser = _Parser(prog="magma-lab",
                     description="Magma porosity equation laboratory.")
    parser.add_argument("--version", action="version", version=__version__)
    subs = parser.add_subparsers(dest="command", required=True)

    p_shoot = subs.add_parser("shoot", help="find the critical curvature or fire one shot")
    _add_table(p_shoot, SHOOT_OPTS)
    _add_common(p_shoot, out_required=False)
    p_shoot.set_defaults(handler=_cmd_shoot)

    p_evolve = subs.add_parser("evolve", help="evolve an initial state on the torus")
    _add_table(p_evolve, EVOLVE_OPTS)
    _add_common(p_evolve, out_required=True)
    p_evolve.set_defaults(handler=_cmd_evolve)

    p_sweep = subs.add_parser("sweep", help="critical curvatures over a parameter grid")
    _add_table(p_sweep, SWEEP_OPTS)
    p_sweep.add_argument("--jobs", "-j", type=int, default=None,
                         help="worker processes (default $MAGMA_LAB_JOBS or 1)")
    _add_common(p_sweep, out_required=True)
    p_sweep.set_defaults(handler=_cmd_sweep)

    p_embed = subs.add_parser("embed", help="periodize an archived profile on a torus")
    _add_table(p_embed, EMBED_OPTS)
    _add_common(p_embed, out_required=True)
    p_embed.set_defaults(handler=_cmd_embed)

    p_diag = subs.add_parser("diagnose", help="measurements on runs and modes")
    diag_subs = p_diag.add_subparsers(dest="diag_command", required=True)

    p_disp = diag_subs.add_parser("dispersion", help="measure one mode's frequency")
    _add_table(p_disp, DISPERSION_OPTS)
    _add_common(p_disp, out_required=False)
    p_disp.set_defaults(handler=_cmd_diag_dispersion)

    p_track = diag_subs.add_parser("track", help="peak positions and speed")
    _add_table(p_track, TRACK_OPTS)
    _add_common(p_track, out_required=False)
    p_track.set_defaults(handler=_cmd_diag_track)

    p_energy = diag_subs.add_parser("energy", help="energy drift over a run")
    _add_table(p_energy, ENERGY_OPTS)
    _add_common(p_energy, out_required=False)
    p_energy.set_defaults(handler=_cmd_diag_energy)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    try:
        ns = parser.parse_args(argv)
        return ns.handler(ns)
    except SystemExit as exc:  # --help / --version
        code = exc.code
        return code if isinstance(code, int) else 0
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 3
    except RuntimeError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
