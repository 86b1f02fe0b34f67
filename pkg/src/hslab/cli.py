"""Command-line front end: config-driven runs with deterministic outputs.

Usage::

    hslab run CONFIG [--out DIR] [--seed N] [--quiet]
    hslab convergence CONFIG ...
    hslab blowup-study CONFIG ...
    hslab ext-scan CONFIG ...

Each config is a JSON object with a ``scenario`` key.  Every run writes
``<run_id>_report.json`` (with the resolved config echoed) plus CSV series
into the output directory, which defaults to ``$HSLAB_OUT`` or ``hslab-out``.

Exit status: 0 on completion (a detected blow-up is a result, not an
error), 2 when the config is invalid, 3 on numerical failure.
"""

from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from .data import circle_data, interval_data, validate_spec
from .dynamics import (
    Controls,
    HaltReason,
    Hs2State,
    MhsState,
    MuhsState,
    detect_blowup,
    integrate,
    riccati_blowup_time,
    write_invariants_csv,
    write_snapshots,
)
from .extension import (
    TraceError,
    check_dsk,
    extension_regularity_scan,
    odd_periodic_extend,
    scan_is_divergent,
)
from .ibvp import compare_mu_hs, mu_obstruction_demo, persistence_series, problem_from_dict, solution_report, solve_ibvp
from .spectral import GridFunction

SCENARIOS = (
    "ibvp-mhs",
    "ibvp-dsk",
    "ibvp-hs2",
    "circle-mhs",
    "circle-hs2",
    "circle-muhs",
    "mu-demo",
    "ext-scan",
    "convergence",
    "blowup-study",
)
IBVP_KINDS = {"ibvp-mhs": "mhs", "ibvp-dsk": "mhs-dsk", "ibvp-hs2": "hs2"}

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERICAL = 3


class ConfigError(ValueError):
    """Invalid configuration; the message starts with the offending field."""


class NumericalFailure(RuntimeError):
    pass


def _get(cfg: dict, key: str, kind, default=None, required: bool = False, check=None, why: str = ""):
    if key not in cfg or cfg[key] is None:
        if required:
            raise ConfigError(f"{key}: required for scenario {cfg.get('scenario')}")
        return default
    val = cfg[key]
    if kind is int and (isinstance(val, bool) or not isinstance(val, int)):
        raise ConfigError(f"{key}: expected an integer, got {val!r}")
    if kind is float:
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            raise ConfigError(f"{key}: expected a number, got {val!r}")
        val = float(val)
    if kind is list and not isinstance(val, list):
        raise ConfigError(f"{key}: expected a list, got {val!r}")
    if check is not None and not check(val):
        raise ConfigError(f"{key}: {why or 'out of range'} (got {val!r})")
    return val


def _n(cfg, default=256):
    return _get(cfg, "n", int, default, check=lambda n: n >= 8 and n % 2 == 0, why="must be even and >= 8")


def _controls(cfg: dict, **overrides) -> Controls:
    raw = dict(cfg.get("controls") or {})
    if not isinstance(cfg.get("controls", {}), dict):
        raise ConfigError("controls: expected an object")
    raw.update(overrides)
    if "t_end" not in raw:
        raise ConfigError("controls.t_end: required")
    try:
        return Controls(**raw)
    except TypeError as exc:
        raise ConfigError(f"controls: {exc}") from None
    except ValueError as exc:
        raise ConfigError(f"controls.{exc}") from None


def _spec(cfg: dict, key: str, required: bool = True):
    if cfg.get(key) is None:
        if required:
            raise ConfigError(f"{key}: required for scenario {cfg.get('scenario')}")
        return None
    try:
        return validate_spec(cfg[key], key)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def resolve_config(cfg: dict, seed: int | None = None) -> dict:
    """Validate ``cfg`` for its scenario and fill in defaults, before any compute."""
    if not isinstance(cfg, dict):
        raise ConfigError("config: expected a JSON object")
    cfg = copy.deepcopy(cfg)
    scen = cfg.get("scenario")
    if scen not in SCENARIOS:
        raise ConfigError(f"scenario: expected one of {', '.join(SCENARIOS)}, got {scen!r}")
    if seed is not None:
        cfg["seed"] = seed
    cfg["seed"] = _get(cfg, "seed", int, 0)
    cfg["snapshots"] = bool(cfg.get("snapshots", False))

    if scen in ("ibvp-mhs", "ibvp-dsk", "ibvp-hs2", "circle-mhs", "circle-hs2", "circle-muhs"):
        cfg["n"] = _n(cfg)
        cfg["u0"] = _spec(cfg, "u0")
        cfg["controls"] = _controls(cfg).to_dict()
    if scen in ("ibvp-mhs", "ibvp-dsk", "circle-mhs"):
        cfg["p"] = _get(cfg, "p", int, 1, check=lambda p: p >= 1 and (p % 2 == 1 or scen == "circle-mhs"),
                        why="must be an odd positive integer")
    if scen == "circle-mhs":
        cfg["unsupported_regime"] = bool(cfg.get("unsupported_regime", False))
        if cfg["p"] % 2 == 0 and not cfg["unsupported_regime"]:
            raise ConfigError("p: even p needs unsupported_regime=true")
    if scen == "ibvp-dsk":
        cfg["k"] = _get(cfg, "k", int, required=True, check=lambda k: k >= 0, why="must be nonnegative")
    if scen in ("ibvp-hs2", "circle-hs2"):
        cfg["kappa"] = _get(cfg, "kappa", float, required=True, check=lambda x: x > 0, why="must be positive")
        cfg["rho0"] = _spec(cfg, "rho0")
        cfg["controls"]["kappa"] = cfg["kappa"]
    if scen == "mu-demo":
        cfg["n"] = _n(cfg)
        cfg["u0"] = _spec(cfg, "u0")
        cfg["circle_u0"] = _spec(cfg, "circle_u0", required=False)
        cfg["controls"] = _controls(cfg).to_dict()
    if scen == "ext-scan":
        cfg["m"] = _get(cfg, "m", int, 512, check=lambda m: m >= 16 and m & (m - 1) == 0, why="must be a power of two >= 16")
        cfg["v"] = _spec(cfg, "v")
        cfg["s"] = _get(cfg, "s", list, required=True, check=lambda s: len(s) > 0 and all(
            isinstance(x, (int, float)) and not isinstance(x, bool) and x >= 0 for x in s), why="need nonnegative numbers")
        cfg["dsk_k"] = _get(cfg, "dsk_k", int, 1, check=lambda k: k >= 0)
    if scen == "convergence":
        cfg["ladder"] = _get(cfg, "ladder", str, "space", check=lambda x: x in ("space", "time"), why="expected space or time")
        cfg["u0"] = _spec(cfg, "u0")
        cfg["p"] = _get(cfg, "p", int, 1, check=lambda p: p >= 1 and p % 2 == 1, why="must be an odd positive integer")
        cfg["t"] = _get(cfg, "t", float, 0.1, check=lambda t: t > 0)
        if cfg["ladder"] == "space":
            cfg["ns"] = _get(cfg, "ns", list, [64, 128, 256],
                             check=lambda v: len(v) >= 2 and all(isinstance(x, int) and x >= 8 and x % 2 == 0 for x in v),
                             why="need at least two even sizes >= 8")
            cfg["reference_n"] = _get(cfg, "reference_n", int, 1024)
            if any(cfg["reference_n"] <= n or cfg["reference_n"] % n for n in cfg["ns"]):
                raise ConfigError("reference_n: must be strictly finer than, and a multiple of, every ladder size")
            cfg["dt"] = _get(cfg, "dt", float, 1e-4, check=lambda x: x > 0)
        else:
            cfg["n"] = _n(cfg, 64)
            cfg["dts"] = _get(cfg, "dts", list, [1e-3, 5e-4, 2.5e-4],
                              check=lambda v: len(v) >= 2 and all(isinstance(x, (int, float)) and x > 0 for x in v),
                              why="need at least two positive steps")
            cfg["reference_dt"] = _get(cfg, "reference_dt", float, 1e-5)
            if cfg["reference_dt"] >= min(cfg["dts"]):
                raise ConfigError("reference_dt: must be strictly finer than every ladder step")
    if scen == "blowup-study":
        cfg["n"] = _n(cfg, 1024)
        cfg["amplitudes"] = _get(cfg, "amplitudes", list, required=True, check=lambda v: len(v) > 0 and all(
            isinstance(a, (int, float)) and not isinstance(a, bool) and a >= 0 for a in v), why="need nonnegative numbers")
        cfg["t_end_factor"] = _get(cfg, "t_end_factor", float, 1.5, check=lambda x: x > 1)
        cfg["t_end"] = _get(cfg, "t_end", float, 1.0, check=lambda x: x > 0)
    if scen in IBVP_KINDS:
        cfg["problem"] = _problem_dict(cfg)
        try:
            problem_from_dict(cfg["problem"], seed=cfg["seed"])
        except TraceError as exc:
            raise ConfigError(f"u0: {exc}") from None
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    return cfg


def _problem_dict(cfg: dict) -> dict:
    return {
        "kind": IBVP_KINDS[cfg["scenario"]],
        "m": cfg["n"] // 2,
        "p": cfg.get("p", 1),
        "k": cfg.get("k", 0),
        "kappa": cfg.get("kappa"),
        "u0": cfg["u0"],
        "rho0": cfg.get("rho0"),
        "controls": cfg["controls"],
    }


def run_id_for(cfg: dict) -> str:
    if isinstance(cfg.get("run_id"), str):
        return cfg["run_id"]
    digest = hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()[:10]
    return f"{cfg['scenario']}-{digest}"


def _dump_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n")


def _write_rows(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow(["" if x is None else (repr(float(x)) if isinstance(x, (float, np.floating)) else x) for x in row])


def _check_numerical(reason: str, detected: bool):
    if reason in (HaltReason.NONFINITE, HaltReason.DT_UNDERFLOW) and not detected:
        raise NumericalFailure(f"run halted with {reason} and no blow-up signature")


def _scenario_ibvp(cfg, out: Path, rid: str) -> dict:
    prob = problem_from_dict(cfg["problem"], seed=cfg["seed"])
    sol = solve_ibvp(prob)
    write_invariants_csv(sol.trajectory, out / f"{rid}_invariants.csv")
    _write_rows(out / f"{rid}_boundary.csv",
                ["t", "u_left", "u_right"] + (["rho_left", "rho_right"] if sol.rho is not None else []),
                sol.boundary_residuals)
    _write_rows(out / f"{rid}_persistence.csv",
                ["t", "u_h1_interval", "rho_l2_interval", "u_h1_circle", "rho_l2_circle"], persistence_series(sol))
    if sol.dsk_residuals:
        keys = sorted(sol.dsk_residuals[0][1])
        _write_rows(out / f"{rid}_dsk.csv", ["t"] + [f"d{o}_at_{x:g}" for o, x in keys],
                    [[t] + [r[key] for key in keys] for t, r in sol.dsk_residuals])
    if cfg["snapshots"]:
        write_snapshots(sol.trajectory, out, rid)
    report = solution_report(sol, rid, cfg)
    _check_numerical(sol.halt_reason, sol.blowup.detected)
    return report


def _circle_state(cfg):
    n, seed, scen = cfg["n"], cfg["seed"], cfg["scenario"]
    u = circle_data(cfg["u0"], n, seed)
    if scen == "circle-mhs":
        return MhsState(u, p=cfg["p"], unsupported_regime=cfg["unsupported_regime"])
    if scen == "circle-hs2":
        return Hs2State.from_velocity(u, circle_data(cfg["rho0"], n, seed + 1))
    return MuhsState(u)


def _scenario_circle(cfg, out: Path, rid: str) -> dict:
    controls = Controls(**cfg["controls"])
    traj = integrate(_circle_state(cfg), controls)
    rep = detect_blowup(traj, controls)
    write_invariants_csv(traj, out / f"{rid}_invariants.csv")
    if cfg["snapshots"]:
        write_snapshots(traj, out, rid)
    drift = {k: float(np.max(np.abs(traj.series(k) - traj.steps[0][k])))
             for k in ("mean_u", "energy", "hs2_energy") if k in traj.steps[0]}
    _check_numerical(traj.halt_reason, rep.detected)
    return {"run_id": rid, "config": cfg, "halt_reason": traj.halt_reason, "t_final": float(traj.times[-1]),
            "steps": len(traj.steps) - 1, "blowup": rep.to_dict(), "max_drift_abs": drift}


def _scenario_mu_demo(cfg, out: Path, rid: str) -> dict:
    controls = Controls(**cfg["controls"])
    u0 = interval_data(cfg["u0"], cfg["n"] // 2, cfg["seed"])
    try:
        odd = mu_obstruction_demo(u0, controls)
    except TraceError as exc:
        raise ConfigError(f"u0: {exc}") from None
    _write_rows(out / f"{rid}_odd.csv", ["t", "deviation", "mean_u"],
                zip(odd.times, odd.deviation_series, odd.mean_series))
    report = {"run_id": rid, "config": cfg,
              "odd": {"max_deviation": odd.deviation, "max_abs_mean": float(np.max(np.abs(odd.mean_series))),
                      "halt_reasons": list(odd.halt_reasons)}}
    if cfg.get("circle_u0") is not None:
        direct = compare_mu_hs(circle_data(cfg["circle_u0"], cfg["n"], cfg["seed"]), controls)
        _write_rows(out / f"{rid}_direct.csv", ["t", "deviation", "mean_u"],
                    zip(direct.times, direct.deviation_series, direct.mean_series))
        report["direct"] = {"max_deviation": direct.deviation, "mean_u0": direct.mean_series[0],
                            "halt_reasons": list(direct.halt_reasons)}
    return report


def _scenario_ext_scan(cfg, out: Path, rid: str) -> dict:
    v = interval_data(cfg["v"], cfg["m"], cfg["seed"])
    dsk = check_dsk(v, cfg["dsk_k"])
    rows, verdicts = [], {}
    for s in cfg["s"]:
        scan = extension_regularity_scan(v, float(s))
        rows += [(float(s), k, val) for k, val in scan]
        verdicts[repr(float(s))] = {"divergent": scan_is_divergent(scan), "last_partial_sum": scan[-1][1]}
    _write_rows(out / f"{rid}_scan.csv", ["s", "cutoff", "partial_sum"], rows)
    return {"run_id": rid, "config": cfg, "dsk": {"k": dsk.k, "passed": dsk.passed, "max_residual": dsk.max_residual},
            "scans": verdicts}


def _final_u(u0: GridFunction, p: int, t: float, dt: float) -> GridFunction:
    # fixed step: cfl = 1 leaves dt_init binding unless |u|^p dt exceeds dx
    traj = integrate(MhsState(u0, p=p), Controls(t_end=t, dt_init=dt, cfl=1.0, resolution_tol=None))
    if traj.halt_reason != HaltReason.T_END:
        raise NumericalFailure(f"convergence run halted early: {traj.halt_reason}")
    return traj.final.u


def _orders(xs, errs):
    out = [None]
    for i in range(1, len(errs)):
        a, b = errs[i - 1], errs[i]
        out.append(math.log(a / b) / math.log(xs[i - 1] / xs[i]) if a > 0 and b > 0 else None)
    return out


def convergence_table(cfg: dict) -> tuple:
    """Return ``(header, rows)`` for the configured ladder."""
    seed, p, t = cfg["seed"], cfg["p"], cfg["t"]
    if cfg["ladder"] == "space":
        ref_n = cfg["reference_n"]
        ref = _final_u(circle_data(cfg["u0"], ref_n, seed), p, t, cfg["dt"])
        ns = cfg["ns"]
        errs = []
        for n in ns:
            u = _final_u(circle_data(cfg["u0"], n, seed), p, t, cfg["dt"])
            errs.append(float(np.max(np.abs(u.values - ref.values[:: ref_n // n]))))
        ratios = [None] + [errs[i - 1] / errs[i] if errs[i] > 0 else None for i in range(1, len(errs))]
        return ["n", "error", "ratio"], list(zip(ns, errs, ratios))
    n = cfg["n"]
    u0 = circle_data(cfg["u0"], n, seed)
    ref = _final_u(u0, p, t, cfg["reference_dt"])
    dts = [float(x) for x in cfg["dts"]]
    errs = [float(np.max(np.abs(_final_u(u0, p, t, dt).values - ref.values))) for dt in dts]
    return ["dt", "error", "order"], list(zip(dts, errs, _orders(dts, errs)))


def _scenario_convergence(cfg, out: Path, rid: str) -> dict:
    header, rows = convergence_table(cfg)
    _write_rows(out / f"{rid}_convergence.csv", header, rows)
    return {"run_id": rid, "config": cfg, "table": [dict(zip(header, r)) for r in rows]}


def blowup_rows(cfg: dict) -> list:
    """Rows ``(A, t_detect, t_riccati, rel_discrepancy, halt_reason)``."""
    n = cfg["n"]
    rows = []
    for a in cfg["amplitudes"]:
        a = float(a)
        t_ric = riccati_blowup_time(-2 * np.pi * a, 2 * np.pi ** 2 * a * a)
        t_end = cfg["t_end_factor"] * t_ric if t_ric is not None else cfg["t_end"]
        controls = Controls(t_end=t_end, dt_init=1e-3)
        u0 = odd_periodic_extend(interval_data({"builtin": "sine", "amplitude": a, "wavenumber": 1}, n // 2))
        traj = integrate(MhsState(u0), controls)
        rep = detect_blowup(traj, controls, key="min_slope_half")
        t_det = rep.t_detect if rep.detected else None
        rel = (t_det - t_ric) / t_ric if t_det is not None and t_ric is not None else None
        rows.append((a, t_det, t_ric if t_ric is not None else "no-blow-up", rel, rep.halted_reason))
    return rows


def _scenario_blowup_study(cfg, out: Path, rid: str) -> dict:
    rows = blowup_rows(cfg)
    header = ["amplitude", "t_detect", "t_riccati", "rel_discrepancy", "halt_reason"]
    _write_rows(out / f"{rid}_blowup.csv", header, rows)
    return {"run_id": rid, "config": cfg, "rows": [dict(zip(header, r)) for r in rows]}


HANDLERS = {
    "ibvp-mhs": _scenario_ibvp,
    "ibvp-dsk": _scenario_ibvp,
    "ibvp-hs2": _scenario_ibvp,
    "circle-mhs": _scenario_circle,
    "circle-hs2": _scenario_circle,
    "circle-muhs": _scenario_circle,
    "mu-demo": _scenario_mu_demo,
    "ext-scan": _scenario_ext_scan,
    "convergence": _scenario_convergence,
    "blowup-study": _scenario_blowup_study,
}

COMMAND_SCENARIOS = {"convergence": ("convergence",), "blowup-study": ("blowup-study",), "ext-scan": ("ext-scan",)}


def execute(cfg: dict, out: Path, command: str = "run", seed: int | None = None) -> tuple:
    """Validate and run; returns ``(exit_code, report_or_message)``."""
    try:
        cfg = resolve_config(cfg, seed)
        allowed = COMMAND_SCENARIOS.get(command)
        if allowed and cfg["scenario"] not in allowed:
            raise ConfigError(f"scenario: '{command}' needs scenario {allowed[0]}, got {cfg['scenario']}")
    except ConfigError as exc:
        return EXIT_INVALID, str(exc)
    rid = run_id_for(cfg)
    out.mkdir(parents=True, exist_ok=True)
    try:
        report = HANDLERS[cfg["scenario"]](cfg, out, rid)
    except ConfigError as exc:
        return EXIT_INVALID, str(exc)
    except (NumericalFailure, FloatingPointError) as exc:
        return EXIT_NUMERICAL, str(exc)
    _dump_json(out / f"{rid}_report.json", report)
    return EXIT_OK, report


def _summary(report: dict) -> str:
    bits = [report["run_id"]]
    if "halt_reason" in report:
        bits.append(f"halt={report['halt_reason']}")
    if "blowup" in report:
        b = report["blowup"]
        bits.append(f"blowup={'t=%.6g' % b['t_detect'] if b['detected'] else 'none'}")
    return " ".join(bits)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hslab", description="Hunter-Saxton interval laboratory")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("run", "convergence", "blowup-study", "ext-scan"):
        p = sub.add_parser(name)
        p.add_argument("config", help="JSON config file")
        p.add_argument("--out", default=os.environ.get("HSLAB_OUT", "hslab-out"), help="output directory")
        p.add_argument("--seed", type=int, default=None, help="seed for randomized initial data")
        p.add_argument("--quiet", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with open(args.config) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"config: {exc}", file=sys.stderr)
        return EXIT_INVALID
    code, result = execute(cfg, Path(args.out), args.command, args.seed)
    if code != EXIT_OK:
        print(f"error: {result}", file=sys.stderr)
    elif not args.quiet:
        print(_summary(result))
    return code


if __name__ == "__main__":
    sys.exit(main())
