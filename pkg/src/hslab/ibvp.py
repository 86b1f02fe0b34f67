"""Boundary value problems on (0, 1/2) solved through odd periodic extension.

Interval data are extended oddly to the circle, evolved there, and every
stored state is restricted back.  Boundary values are measured on the
restricted solution and never imposed.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .data import interval_data, validate_spec
from .dynamics import (
    BlowupReport,
    Controls,
    Hs2State,
    MhsState,
    MuhsState,
    Trajectory,
    detect_blowup,
    integrate,
)
from .extension import (
    TRACE_TOL,
    IntervalFunction,
    TraceError,
    check_dsk,
    endpoint_derivative,
    odd_periodic_extend,
    restrict_to_interval,
)
from .spectral import GridFunction, deriv, mean

__all__ = [
    "KINDS",
    "IbvpProblem",
    "IbvpSolution",
    "MuComparison",
    "solve_ibvp",
    "solve_ibvp_mhs",
    "solve_ibvp_dsk",
    "solve_ibvp_hs2",
    "interval_blowup_report",
    "persistence_series",
    "mu_obstruction_demo",
    "compare_mu_hs",
    "problem_from_dict",
    "problem_to_dict",
    "read_problem",
    "write_problem",
    "solution_report",
]

KINDS = ("mhs", "mhs-dsk", "hs2", "muhs-demo")


@dataclass(frozen=True)
class IbvpProblem:
    """An initial boundary value problem on ``(0, 1/2)``.

    ``kappa`` is required for ``hs2`` and overrides ``controls.kappa``.
    """

    kind: str
    u0: IntervalFunction
    controls: Controls
    rho0: IntervalFunction | None = None
    p: int = 1
    k: int = 0
    kappa: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {', '.join(KINDS)}, got {self.kind!r}")
        if isinstance(self.p, bool) or int(self.p) != self.p or self.p < 1 or self.p % 2 == 0:
            raise ValueError(f"p must be an odd positive integer, got {self.p!r}")
        if isinstance(self.k, bool) or int(self.k) != self.k or self.k < 0:
            raise ValueError(f"k must be a nonnegative integer, got {self.k!r}")
        if self.kind == "hs2":
            if self.rho0 is None:
                raise ValueError("rho0 is required for kind hs2")
            if self.kappa is None:
                raise ValueError("kappa is required for kind hs2")
            if not self.kappa > 0:
                raise ValueError(f"kappa must be positive, got {self.kappa}")
            if self.rho0.m != self.u0.m:
                raise ValueError("u0 and rho0 must share the interval resolution m")
        elif self.rho0 is not None:
            raise ValueError(f"rho0 only applies to kind hs2, not {self.kind}")
        for name in ("u0", "rho0"):
            v = getattr(self, name)
            if v is None:
                continue
            res = max(abs(v.values[0]), abs(v.values[-1]))
            if res > TRACE_TOL:
                raise TraceError(f"{name} does not vanish at x=0 and x=1/2 (residual {res:.3e})", res)
        if self.kind == "mhs-dsk":
            rep = check_dsk(self.u0, self.k)
            if not rep.passed:
                raise ValueError(
                    f"u0 is not in D^s_{self.k}: endpoint residual {rep.max_residual:.3e} exceeds {rep.tol:.3e}"
                )

    @property
    def m(self) -> int:
        return self.u0.m

    @property
    def resolved_controls(self) -> Controls:
        if self.kappa is None:
            return self.controls
        return dataclasses.replace(self.controls, kappa=float(self.kappa))


@dataclass
class IbvpSolution:
    """Restricted trajectory and the diagnostics measured on it.

    Every series has one entry per stored time.  ``boundary_residuals`` rows
    are ``(t, |u(t,0)|, |u(t,1/2)|[, |rho(t,0)|, |rho(t,1/2)|])``;
    ``parity_residuals`` rows are ``(t, max|u~(x) + u~(-x)|[, same for rho])``
    on the circle; ``dsk_residuals`` rows map ``(order, endpoint)`` to the
    one-sided derivative estimate.
    """

    problem: IbvpProblem
    trajectory: Trajectory
    times: list
    u: list
    rho: list | None
    boundary_residuals: list
    parity_residuals: list
    dsk_residuals: list = field(default_factory=list)
    blowup: BlowupReport | None = None

    @property
    def halt_reason(self) -> str:
        return self.trajectory.halt_reason


def _parity_residual(f: GridFunction) -> float:
    v = f.values
    return float(np.max(np.abs(v + np.roll(v[::-1], 1))))


def _finish(prob: IbvpProblem, traj: Trajectory) -> IbvpSolution:
    times = list(traj.times)
    us, rhos, bres, pres, dres = [], [], [], [], []
    has_rho = prob.kind == "hs2"
    for t, state in zip(times, traj.states):
        uc = state.velocity()
        u = restrict_to_interval(uc)
        us.append(u)
        row = [t, abs(u.values[0]), abs(u.values[-1])]
        prow = [t, _parity_residual(uc)]
        if has_rho:
            rho = restrict_to_interval(state.rho)
            rhos.append(rho)
            row += [abs(rho.values[0]), abs(rho.values[-1])]
            prow.append(_parity_residual(state.rho))
        bres.append(tuple(float(x) for x in row))
        pres.append(tuple(float(x) for x in prow))
        if prob.kind == "mhs-dsk":
            res = {}
            for j in range(prob.k + 1):
                d = 2 * prob.k - 2 * j
                res[(d, 0.0)] = abs(endpoint_derivative(u, d, "left", stride="adaptive"))
                res[(d, 0.5)] = abs(endpoint_derivative(u, d, "right", stride="adaptive"))
            dres.append((t, res))
    sol = IbvpSolution(prob, traj, times, us, rhos if has_rho else None, bres, pres, dres)
    sol.blowup = interval_blowup_report(sol)
    return sol


def _require(prob: IbvpProblem, kinds):
    if prob.kind not in kinds:
        raise ValueError(f"problem kind {prob.kind!r} not handled here (expected {', '.join(kinds)})")


def solve_ibvp_mhs(prob: IbvpProblem) -> IbvpSolution:
    """Extend, evolve mHS with exponent ``prob.p``, restrict."""
    _require(prob, ("mhs", "mhs-dsk"))
    state = MhsState(odd_periodic_extend(prob.u0), p=prob.p)
    return _finish(prob, integrate(state, prob.resolved_controls))


def solve_ibvp_dsk(prob: IbvpProblem) -> IbvpSolution:
    """As :func:`solve_ibvp_mhs`, also tracking ``u^(2k-2j)`` at both endpoints."""
    _require(prob, ("mhs-dsk",))
    return solve_ibvp_mhs(prob)


def solve_ibvp_hs2(prob: IbvpProblem) -> IbvpSolution:
    """Extend ``u0`` and ``rho0`` oddly and evolve the two-component system."""
    _require(prob, ("hs2",))
    u = odd_periodic_extend(prob.u0)
    rho = odd_periodic_extend(prob.rho0)
    state = Hs2State.from_velocity(u, rho)
    # odd data have zero mean exactly; don't carry round-off
    state = dataclasses.replace(state, u_mean=0.0)
    return _finish(prob, integrate(state, prob.resolved_controls))


def solve_ibvp(prob: IbvpProblem) -> IbvpSolution:
    """Dispatch on ``prob.kind``; ``muhs-demo`` evolves muHS from the extension."""
    if prob.kind == "muhs-demo":
        state = MuhsState(odd_periodic_extend(prob.u0))
        return _finish(prob, integrate(state, prob.resolved_controls))
    if prob.kind == "hs2":
        return solve_ibvp_hs2(prob)
    if prob.kind == "mhs-dsk":
        return solve_ibvp_dsk(prob)
    return solve_ibvp_mhs(prob)


def interval_blowup_report(sol: IbvpSolution) -> BlowupReport:
    """Blow-up verdict from the interval minimum slope.

    The slope of an odd function is even, so its minimum over the circle
    equals its minimum over the nodes of ``[0, 1/2]``; the largest
    difference over all steps is stored as ``slope_identity_gap``.
    """
    traj = sol.trajectory
    gap = float(np.max(np.abs(traj.series("min_slope") - traj.series("min_slope_half"))))
    rep = detect_blowup(traj, key="min_slope_half")
    rep.slope_identity_gap = gap
    return rep


def _interval_l2(v: np.ndarray, h: float) -> float:
    w = np.full(v.shape, h)
    w[0] = w[-1] = 0.5 * h
    return math.sqrt(float(np.dot(w, v * v)))


def persistence_series(sol: IbvpSolution) -> list:
    """Rows ``(t, |u|_H1(0,1/2), |rho|_L2(0,1/2), |u~|_H1(S), |rho~|_L2(S))``.

    Interval norms use the composite trapezoid rule on the interval nodes,
    with ``u_x`` differentiated spectrally on the circle and restricted; the
    circle norms are the corresponding means over one period.  For odd
    data the interval value is half the circle value exactly.
    """
    rows = []
    for t, state in zip(sol.times, sol.trajectory.states):
        uc = state.velocity()
        uxc = deriv(uc)
        u = restrict_to_interval(uc).values
        ux = restrict_to_interval(uxc).values
        h = 0.5 / (len(u) - 1)
        u_int = math.sqrt(_interval_l2(u, h) ** 2 + _interval_l2(ux, h) ** 2)
        u_circ = math.sqrt(mean(uc * uc) + mean(uxc * uxc))
        if sol.rho is not None:
            rho_int = _interval_l2(restrict_to_interval(state.rho).values, h)
            rho_circ = math.sqrt(mean(state.rho * state.rho))
        else:
            rho_int = rho_circ = 0.0
        rows.append((float(t), u_int, rho_int, u_circ, rho_circ))
    return rows


@dataclass
class MuComparison:
    """Lockstep muHS versus HS runs from identical circle data."""

    times: list
    deviation_series: list
    mean_series: list
    halt_reasons: tuple

    @property
    def deviation(self) -> float:
        return max(self.deviation_series)


def compare_mu_hs(u0: GridFunction, controls: Controls) -> MuComparison:
    """Run muHS and mHS (``p = 1``) from ``u0`` and compare stored states.

    The step size depends only on ``max|u|``, so both runs sample the same
    times while their states agree; comparison stops at the shorter run.
    """
    hs = integrate(MhsState(u0), controls)
    mu = integrate(MuhsState(u0), controls)
    n = min(len(hs.times), len(mu.times))
    times, dev, means = [], [], []
    for i in range(n):
        a, b = hs.states[i].u, mu.states[i].u
        times.append(mu.times[i])
        dev.append(float(np.max(np.abs(a.values - b.values))))
        means.append(mean(b))
    return MuComparison(times, dev, means, (hs.halt_reason, mu.halt_reason))


def mu_obstruction_demo(u0: IntervalFunction, controls: Controls) -> MuComparison:
    """Oddly extended data have zero mean, so muHS and HS coincide."""
    return compare_mu_hs(odd_periodic_extend(u0), controls)


def problem_to_dict(prob: IbvpProblem, u0_spec=None, rho0_spec=None) -> dict:
    """JSON-ready description; data are echoed as specs when given, else as samples."""
    d = {
        "kind": prob.kind,
        "m": prob.m,
        "p": prob.p,
        "k": prob.k,
        "kappa": prob.kappa,
        "u0": u0_spec if u0_spec is not None else {"samples": prob.u0.values.tolist()},
        "rho0": None,
        "controls": prob.controls.to_dict(),
    }
    if prob.rho0 is not None:
        d["rho0"] = rho0_spec if rho0_spec is not None else {"samples": prob.rho0.values.tolist()}
    return d


def _data_from(obj, field: str, m: int, seed: int):
    if isinstance(obj, dict) and "samples" in obj:
        vals = obj["samples"]
        if len(vals) != m + 1:
            raise ValueError(f"{field}.samples: expected {m + 1} values, got {len(vals)}")
        return IntervalFunction(m, vals)
    return interval_data(validate_spec(obj, field), m, seed)


def problem_from_dict(d: dict, seed: int = 0) -> IbvpProblem:
    """Build a problem from its JSON form; errors name the offending field."""
    if not isinstance(d, dict):
        raise ValueError("problem: expected a JSON object")
    kind = d.get("kind")
    if kind not in KINDS:
        raise ValueError(f"kind: expected one of {', '.join(KINDS)}, got {kind!r}")
    m = d.get("m", 512)
    if isinstance(m, bool) or not isinstance(m, int) or m < 4:
        raise ValueError(f"m: must be an integer >= 4, got {m!r}")
    if "u0" not in d:
        raise ValueError("u0: missing")
    if kind == "hs2":
        for key in ("rho0", "kappa"):
            if d.get(key) is None:
                raise ValueError(f"{key}: required for kind hs2")
    ctrl = d.get("controls")
    if not isinstance(ctrl, dict):
        raise ValueError("controls: missing or not an object")
    try:
        controls = Controls(**ctrl)
    except TypeError as exc:
        raise ValueError(f"controls: {exc}") from None
    u0 = _data_from(d["u0"], "u0", m, seed)
    rho0 = _data_from(d["rho0"], "rho0", m, seed + 1) if d.get("rho0") is not None else None
    kappa = d.get("kappa")
    return IbvpProblem(
        kind=kind,
        u0=u0,
        rho0=rho0,
        p=d.get("p", 1),
        k=d.get("k", 0),
        kappa=None if kappa is None else float(kappa),
        controls=controls,
    )


def read_problem(path, seed: int = 0) -> IbvpProblem:
    with open(path) as fh:
        return problem_from_dict(json.load(fh), seed=seed)


def write_problem(path, prob: IbvpProblem, u0_spec=None, rho0_spec=None) -> None:
    with open(path, "w") as fh:
        json.dump(problem_to_dict(prob, u0_spec, rho0_spec), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _drift(x: np.ndarray) -> float:
    scale = max(abs(x[0]), 1e-300)
    return float(np.max(np.abs(x - x[0])) / scale) if x[0] != 0 else float(np.max(np.abs(x)))


def solution_report(sol: IbvpSolution, run_id: str, config: dict) -> dict:
    """Summary document: config echo, halt, verdict, residual and drift maxima."""
    traj = sol.trajectory
    bres = np.array(sol.boundary_residuals)[:, 1:]
    pers = persistence_series(sol)
    drift = {
        "energy_rel": _drift(traj.series("energy")),
        "mean_u_abs": float(np.max(np.abs(traj.series("mean_u") - traj.steps[0]["mean_u"]))),
    }
    if sol.problem.kind == "hs2":
        drift["hs2_energy_rel"] = _drift(traj.series("hs2_energy"))
    residuals = {
        "boundary": float(bres.max()),
        "parity": float(max(max(r[1:]) for r in sol.parity_residuals)),
        "persistence_excess": float(max(max(r[1] - r[3], r[2] - r[4]) for r in pers)),
    }
    if sol.dsk_residuals:
        residuals["dsk"] = float(max(max(r.values()) for _, r in sol.dsk_residuals))
    return {
        "run_id": run_id,
        "config": config,
        "halt_reason": sol.halt_reason,
        "t_final": float(sol.times[-1]),
        "steps": len(traj.steps) - 1,
        "blowup": sol.blowup.to_dict(),
        "max_residuals": residuals,
        "max_drift": drift,
    }
