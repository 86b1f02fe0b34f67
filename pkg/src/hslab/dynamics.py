"""Periodic evolution for the modified, two-component and mu Hunter-Saxton equations.

Three state types are evolved on the unit circle with Fourier collocation
and classical RK4:

* :class:`MhsState` -- ``u_t + u^p u_x = 1/2 d^{-1}(d(u^p) u_x)`` (odd ``p``),
* :class:`Hs2State` -- ``m_t = -u m_x - 2 u_x m - kappa rho rho_x``,
  ``rho_t = -(rho u)_x`` with ``m = -u_xx`` (the ``a = 2`` system),
* :class:`MuhsState` -- ``-u_txx = -2 mu(u) u_x + 2 u_x u_xx + u u_xxx``.

Every nonlinear product is truncated with the 2/3 rule.
"""

from __future__ import annotations

import csv
import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .spectral import (
    DEFAULT_DEALIAS,
    GridFunction,
    NonFiniteError,
    antideriv_mean_zero,
    dealias,
    deriv,
    mean,
    sobolev_norm_circle,
)

__all__ = [
    "MhsState",
    "Hs2State",
    "MuhsState",
    "Controls",
    "Trajectory",
    "BlowupReport",
    "HaltReason",
    "mhs_rhs",
    "hs2_rhs",
    "muhs_rhs",
    "reconstruct_u",
    "rk4_step",
    "integrate",
    "invariants",
    "riccati_blowup_time",
    "detect_blowup",
    "write_invariants_csv",
    "write_snapshots",
]

DT_MIN = 1e-12
MEAN_M_TOL = 1e-8


class HaltReason:
    SLOPE_THRESHOLD = "slope-threshold"
    RESOLUTION_LIMIT = "resolution-limit"
    DT_UNDERFLOW = "dt-underflow"
    T_END = "t-end-reached"
    NONFINITE = "nonfinite-value"


@dataclass(frozen=True)
class MhsState:
    """State of the modified HS equation.

    Even ``p`` breaks the odd symmetry the interval theory relies on and is
    rejected unless ``unsupported_regime`` is set for circle-only runs.
    """

    u: GridFunction
    p: int = 1
    unsupported_regime: bool = False

    fields = ("u",)

    def __post_init__(self):
        if isinstance(self.p, bool) or int(self.p) != self.p or self.p < 1:
            raise ValueError(f"p must be a positive integer, got {self.p!r}")
        if self.p % 2 == 0 and not self.unsupported_regime:
            raise ValueError(f"p={self.p} is even; only odd p preserves odd symmetry")

    @property
    def grid(self):
        return self.u.grid

    def velocity(self) -> GridFunction:
        return self.u

    @property
    def speed_exponent(self) -> int:
        return self.p


@dataclass(frozen=True)
class Hs2State:
    """State ``(m, rho)`` of the two-component system plus the mean of ``u``.

    ``m = -u_xx`` fixes ``u`` only up to a constant, so that constant
    (conserved by the flow) is carried alongside.
    """

    m: GridFunction
    rho: GridFunction
    u_mean: float = 0.0

    fields = ("m", "rho")
    speed_exponent = 1

    def __post_init__(self):
        if self.m.grid != self.rho.grid:
            raise ValueError("m and rho live on different grids")

    @classmethod
    def from_velocity(cls, u: GridFunction, rho: GridFunction) -> "Hs2State":
        return cls(m=-deriv(u, 2), rho=rho, u_mean=mean(u))

    @property
    def grid(self):
        return self.m.grid

    def velocity(self) -> GridFunction:
        return reconstruct_u(self.m, self.u_mean, tol=MEAN_M_TOL)


@dataclass(frozen=True)
class MuhsState:
    u: GridFunction

    fields = ("u",)
    speed_exponent = 1

    @property
    def grid(self):
        return self.u.grid

    def velocity(self) -> GridFunction:
        return self.u


@dataclass(frozen=True)
class Controls:
    """Time-stepping and halting parameters.

    ``resolution_tol`` is the slope-energy fraction in the upper half of the
    dealiased band above which a turning min-slope is treated as the grid
    losing a breaking wave; ``None`` disables that halt.
    """

    t_end: float
    dt_init: float = 1e-3
    cfl: float = 0.4
    kappa: float = 1.0
    blowup_slope_threshold: float = -1e6
    dealias_fraction: float = DEFAULT_DEALIAS
    sample_stride: int = 1
    resolution_tol: float | None = 1e-3

    def __post_init__(self):
        checks = [
            ("t_end", self.t_end > 0),
            ("dt_init", self.dt_init > 0),
            ("cfl", 0 < self.cfl <= 1),
            ("kappa", self.kappa > 0),
            ("blowup_slope_threshold", self.blowup_slope_threshold < 0),
            ("dealias_fraction", 0 < self.dealias_fraction <= 1),
            ("sample_stride", int(self.sample_stride) == self.sample_stride and self.sample_stride >= 1),
            ("resolution_tol", self.resolution_tol is None or self.resolution_tol > 0),
        ]
        for name, ok in checks:
            if not ok:
                raise ValueError(f"{name}={getattr(self, name)!r} out of range")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class Trajectory:
    """Stored states plus per-step diagnostics.

    ``times``/``states``/``invariant_samples`` hold every ``sample_stride``-th state
    (and always the first and last); ``steps`` holds one invariant record for
    every accepted step including ``t = 0``.
    """

    times: list = field(default_factory=list)
    states: list = field(default_factory=list)
    invariant_samples: list = field(default_factory=list)
    steps: list = field(default_factory=list)
    halt_reason: str | None = None
    controls: Controls | None = None

    def series(self, key: str, stored: bool = False) -> np.ndarray:
        records = self.invariant_samples if stored else self.steps
        return np.array([r[key] for r in records])

    @property
    def final(self):
        return self.states[-1]


@dataclass
class BlowupReport:
    """Verdict on finite-time breaking.

    ``t_detect`` is the estimated breaking time; ``t_halt`` is when the run
    stopped.  They differ only for ``resolution-limit`` halts, where the
    estimate extrapolates ``1/min u_x`` to zero.
    """

    detected: bool
    t_detect: float | None
    min_slope_series: list
    halted_reason: str
    t_halt: float | None = None
    method: str = "halt-time"
    slope_identity_gap: float | None = None

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d.pop("min_slope_series")
        return d


def mhs_rhs(state: MhsState, dealias_fraction: float = DEFAULT_DEALIAS) -> GridFunction:
    """``du/dt = -u^p u_x + 1/2 d^{-1}(d(u^p) u_x)`` with mean-removed ``d^{-1}``."""
    u = state.u
    ux = deriv(u)
    up = u if state.p == 1 else dealias(u ** state.p, dealias_fraction)
    transport = dealias(up * ux, dealias_fraction)
    source = dealias(deriv(up) * ux, dealias_fraction)
    return 0.5 * antideriv_mean_zero(source) - transport


def reconstruct_u(m: GridFunction, u_mean: float, tol: float = 1e-10) -> GridFunction:
    """Invert ``m = -u_xx``: ``u_k = m_k/(2 pi k)^2`` for ``k != 0``, ``u_0 = u_mean``."""
    mm = mean(m)
    if abs(mm) > tol:
        raise ValueError(f"m has nonzero mean {mm:.3e}; -u_xx of a periodic u is mean-free")
    grid = m.grid
    c = np.fft.rfft(m.values)
    k = grid.rwavenumbers[1:]
    out = np.empty_like(c)
    out[0] = u_mean * grid.n
    out[1:] = c[1:] / (2 * np.pi * k) ** 2
    return GridFunction(grid, np.fft.irfft(out, grid.n))


def hs2_rhs(state: Hs2State, kappa: float, dealias_fraction: float = DEFAULT_DEALIAS):
    """Return ``(dm/dt, drho/dt)`` for the ``a = 2`` two-component system."""
    if kappa <= 0:
        raise ValueError(f"kappa must be positive, got {kappa}")
    m, rho = state.m, state.rho
    mm = mean(m)
    if abs(mm) > MEAN_M_TOL:
        raise ValueError(f"state corrupted: mean(m) = {mm:.3e}")
    u = reconstruct_u(m, state.u_mean, tol=MEAN_M_TOL)
    ux = deriv(u)
    dm = -(
        dealias(u * deriv(m), dealias_fraction)
        + 2.0 * dealias(ux * m, dealias_fraction)
        + kappa * dealias(rho * deriv(rho), dealias_fraction)
    )
    # the exact mean of dm/dt is zero; project away round-off
    dm = dm - mean(dm)
    drho = -deriv(dealias(rho * u, dealias_fraction))
    return dm, drho


def muhs_rhs(state: MuhsState, dealias_fraction: float = DEFAULT_DEALIAS) -> GridFunction:
    """``du/dt`` for muHS through the momentum ``n = mu(u) - u_xx``.

    ``dn/dt = -u n_x - 2 u_x n``; ``du/dt`` follows by inverting
    ``mu - d_x^2``: the mean of ``du/dt`` is the mean of ``dn/dt`` and the
    other modes are divided by ``(2 pi k)^2``.
    """
    u = state.u
    grid = u.grid
    mu = mean(u)
    ux = deriv(u)
    momentum = mu - deriv(u, 2)
    dn = -(dealias(u * deriv(momentum), dealias_fraction) + 2.0 * dealias(ux * momentum, dealias_fraction))
    c = np.fft.rfft(dn.values)
    k = grid.rwavenumbers[1:]
    c[1:] = c[1:] / (2 * np.pi * k) ** 2
    return GridFunction(grid, np.fft.irfft(c, grid.n))


def _rhs_for(state, controls: Controls | None):
    frac = controls.dealias_fraction if controls is not None else DEFAULT_DEALIAS
    if isinstance(state, MhsState):
        return lambda s: mhs_rhs(s, frac)
    if isinstance(state, Hs2State):
        kappa = controls.kappa if controls is not None else 1.0
        return lambda s: hs2_rhs(s, kappa, frac)
    if isinstance(state, MuhsState):
        return lambda s: muhs_rhs(s, frac)
    raise TypeError(f"unsupported state type {type(state).__name__}")


def _as_tuple(x):
    return x if isinstance(x, tuple) else (x,)


def _axpy(state, dt, slopes):
    # state + dt * slopes, field by field
    new = {name: getattr(state, name) + dt * s for name, s in zip(state.fields, slopes)}
    return dataclasses.replace(state, **new)


def rk4_step(state, dt: float, rhs):
    """One classical RK4 step; ``rhs(state)`` returns a field or tuple of fields.

    Raises
    ------
    NonFiniteError
        If any stage produces NaN or Inf.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    # overflow surfaces as NonFiniteError; the warning itself is noise
    with np.errstate(over="ignore", invalid="ignore"):
        k1 = _as_tuple(rhs(state))
        k2 = _as_tuple(rhs(_axpy(state, 0.5 * dt, k1)))
        k3 = _as_tuple(rhs(_axpy(state, 0.5 * dt, k2)))
        k4 = _as_tuple(rhs(_axpy(state, dt, k3)))
        incr = tuple((a + 2.0 * b + 2.0 * c + d) for a, b, c, d in zip(k1, k2, k3, k4))
        return _axpy(state, dt / 6.0, incr)


def _spectral_tail(ux: GridFunction, fraction: float) -> float:
    # share of slope energy in the upper half of the retained band
    grid = ux.grid
    c = np.abs(np.fft.rfft(ux.values)) ** 2
    total = c.sum()
    if total == 0.0:
        return 0.0
    kc = fraction * grid.n / 2
    return float(math.sqrt(c[grid.rwavenumbers > 0.5 * kc].sum() / total))


def invariants(state, controls: Controls | None = None) -> dict:
    """Diagnostics for one state.

    Always present: ``mean_u``, ``energy`` (``int u_x^2``), ``min_slope``,
    ``min_slope_half`` (over nodes in ``[0, 1/2]``), ``max_abs_u``,
    ``h1_norm`` and ``spectral_tail``.  The two-component system adds
    ``rho_l2``, ``mean_m`` and ``hs2_energy`` (``int u_x^2 + kappa rho^2``).
    """
    u = state.velocity()
    ux = deriv(u)
    half = u.grid.half
    frac = controls.dealias_fraction if controls is not None else DEFAULT_DEALIAS
    rec = {
        "mean_u": mean(u),
        "energy": mean(ux * ux),
        "min_slope": float(np.min(ux.values)),
        "min_slope_half": float(np.min(ux.values[: half + 1])),
        "max_abs_u": u.max_abs(),
        "h1_norm": sobolev_norm_circle(u, 1.0),
        "spectral_tail": _spectral_tail(ux, frac),
    }
    if isinstance(state, Hs2State):
        kappa = controls.kappa if controls is not None else 1.0
        rho2 = mean(state.rho * state.rho)
        rec["rho_l2"] = math.sqrt(rho2)
        rec["mean_m"] = mean(state.m)
        rec["hs2_energy"] = rec["energy"] + kappa * rho2
    return rec


def _stable_dt(state, controls: Controls) -> float:
    umax = state.velocity().max_abs()
    speed = max(1.0, umax ** state.speed_exponent)
    return min(controls.dt_init, controls.cfl * state.grid.dx / speed)


def _turned(steps: list, controls: Controls) -> bool:
    """Min slope has steepened, then backed off while the grid is under-resolved."""
    if controls.resolution_tol is None or len(steps) < 3:
        return False
    w = np.array([r["min_slope"] for r in steps])
    i = int(np.argmin(w))
    w0 = steps[0]["min_slope"]
    if i == len(w) - 1 or w[i] >= 0 or abs(w[i]) < 2.0 * abs(min(w0, 0.0)) or w0 >= 0:
        return False
    return w[-1] > w[i] + 0.01 * abs(w[i]) and steps[-1]["spectral_tail"] > controls.resolution_tol


def integrate(state, controls: Controls, rhs=None) -> Trajectory:
    """Advance ``state`` to ``controls.t_end`` or until a halt condition.

    The step is ``min(dt_init, cfl dx / max(1, max|u|^p))`` (``p = 1`` for
    the two-component and mu equations), clipped to land on ``t_end``.  A
    run halts on reaching ``t_end``, on the min slope crossing
    ``blowup_slope_threshold``, on the grid losing resolution of a
    steepening front, on ``dt < 1e-12``, or on a nonfinite stage.  The halt
    reason is recorded in the trajectory; partial data are always returned.
    """
    rhs = rhs or _rhs_for(state, controls)
    traj = Trajectory(controls=controls)
    t = 0.0
    with np.errstate(over="ignore", invalid="ignore"):
        rec = invariants(state, controls)
    traj.times.append(t)
    traj.states.append(state)
    traj.invariant_samples.append(rec)
    traj.steps.append({"t": t, **rec})
    nstep = 0
    reason = None
    while reason is None:
        remaining = controls.t_end - t
        if remaining <= 1e-12 * max(1.0, controls.t_end):
            reason = HaltReason.T_END
            break
        dt = min(_stable_dt(state, controls), remaining)
        if dt < DT_MIN:
            reason = HaltReason.DT_UNDERFLOW
            break
        try:
            new = rk4_step(state, dt, rhs)
            with np.errstate(over="ignore", invalid="ignore"):
                rec = invariants(new, controls)
        except NonFiniteError:
            reason = HaltReason.NONFINITE
            break
        state = new
        t = t + dt if dt < remaining else controls.t_end
        nstep += 1
        traj.steps.append({"t": t, **rec})
        if rec["min_slope"] <= controls.blowup_slope_threshold:
            reason = HaltReason.SLOPE_THRESHOLD
        elif _turned(traj.steps, controls):
            reason = HaltReason.RESOLUTION_LIMIT
        if reason is not None or nstep % controls.sample_stride == 0 or t >= controls.t_end:
            traj.times.append(t)
            traj.states.append(state)
            traj.invariant_samples.append(rec)
    if traj.times[-1] != t:
        traj.times.append(t)
        traj.states.append(state)
        traj.invariant_samples.append(traj.steps[-1])
    traj.halt_reason = reason
    return traj


def riccati_blowup_time(w0: float, energy: float) -> float | None:
    """Breaking time of the slope ``w`` along a p = 1 characteristic.

    With ``E = int u_x^2`` conserved, ``w' = -(w^2 + E)/2``, so

    ``T = (2/sqrt(E)) (pi/2 + arctan(w0/sqrt(E)))``

    for ``E > 0`` (every slope breaks; the most negative breaks first).
    For ``E = 0`` the slope breaks at ``2/|w0|`` if ``w0 < 0``.  Returns
    ``None`` when no breaking occurs.
    """
    if energy < 0:
        raise ValueError(f"energy must be nonnegative, got {energy}")
    if energy == 0.0:
        return 2.0 / abs(w0) if w0 < 0 else None
    root = math.sqrt(energy)
    return 2.0 / root * (0.5 * math.pi + math.atan(w0 / root))


def _extrapolate_breaking(t: np.ndarray, w: np.ndarray) -> float | None:
    # least-squares line through 1/w on the pre-peak samples with 30-70% of
    # the peak slope magnitude; its zero estimates the breaking time
    i = int(np.argmin(w))
    tt, ww = t[: i + 1], w[: i + 1]
    peak = ww[-1]
    sel = (ww <= 0.3 * peak) & (ww >= 0.7 * peak)
    if sel.sum() < 3:
        return None
    a, b = np.polyfit(tt[sel], 1.0 / ww[sel], 1)
    if a <= 0:
        return None
    return max(float(-b / a), float(tt[-1]))


def _monotone_tail(w: np.ndarray, count: int = 5) -> bool:
    tail = w[-count:]
    return len(tail) == count and bool(np.all(np.diff(tail) < 0))


def detect_blowup(traj: Trajectory, controls: Controls | None = None, key: str = "min_slope") -> BlowupReport:
    """Classify the halt of ``traj`` as breaking or not.

    ``key`` selects the slope series: ``min_slope`` (whole circle) or
    ``min_slope_half`` (nodes of ``[0, 1/2]``).
    """
    if len(traj.steps) < 2:
        raise ValueError("trajectory needs at least two samples")
    t = traj.series("t")
    w = traj.series(key)
    series = list(zip(t.tolist(), w.tolist()))
    reason = traj.halt_reason
    t_halt = float(t[-1])
    if reason == HaltReason.SLOPE_THRESHOLD:
        return BlowupReport(True, t_halt, series, reason, t_halt)
    if reason == HaltReason.RESOLUTION_LIMIT:
        est = _extrapolate_breaking(t, w)
        if est is None:
            return BlowupReport(True, float(t[int(np.argmin(w))]), series, reason, t_halt, "slope-peak")
        return BlowupReport(True, est, series, reason, t_halt, "slope-extrapolation")
    if reason in (HaltReason.DT_UNDERFLOW, HaltReason.NONFINITE) and _monotone_tail(w):
        return BlowupReport(True, t_halt, series, reason, t_halt)
    return BlowupReport(False, None, series, reason, t_halt)


def write_invariants_csv(traj: Trajectory, path, stored: bool = False) -> None:
    """CSV with header ``t,<invariant columns>``; one row per step (or stored state)."""
    records = traj.invariant_samples if stored else traj.steps
    times = traj.times if stored else [r["t"] for r in traj.steps]
    cols = [k for k in records[0] if k != "t"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t", *cols])
        for t, r in zip(times, records):
            writer.writerow([repr(float(t))] + [repr(float(r[c])) for c in cols])


def write_snapshots(traj: Trajectory, directory, run_id: str, fields=None) -> list:
    """Write each stored state as ``<run_id>_t<time>_<field>.txt`` two-column files."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for t, state in zip(traj.times, traj.states):
        names = fields or state.fields
        for name in names:
            f = state.velocity() if name == "u" and not hasattr(state, "u") else getattr(state, name)
            path = directory / f"{run_id}_t{t:.6f}_{name}.txt"
            rows = "\n".join(f"{x:.17g} {y:.17g}" for x, y in zip(f.grid.nodes, f.values))
            path.write_text(rows + "\n")
            written.append(path)
    return written
