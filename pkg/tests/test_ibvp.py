import json

import numpy as np
import pytest

from hslab.dynamics import Controls, HaltReason, MhsState, integrate, riccati_blowup_time
from hslab.extension import IntervalFunction, TraceError, restrict_to_interval
from hslab.ibvp import (
    IbvpProblem,
    compare_mu_hs,
    interval_blowup_report,
    mu_obstruction_demo,
    persistence_series,
    problem_from_dict,
    problem_to_dict,
    read_problem,
    solution_report,
    solve_ibvp,
    solve_ibvp_dsk,
    solve_ibvp_hs2,
    solve_ibvp_mhs,
    write_problem,
)
from hslab.spectral import GridFunction, make_grid

TWO_PI = 2 * np.pi


def sin_iv(m=128, amp=1.0):
    return IntervalFunction.from_callable(lambda x: amp * np.sin(TWO_PI * x), m=m)


def zero_iv(m=64):
    return IntervalFunction(m, np.zeros(m + 1))


# problem validation


def test_problem_validation():
    c = Controls(t_end=0.1)
    with pytest.raises(ValueError):
        IbvpProblem("kdv", sin_iv(), c)
    with pytest.raises(ValueError):
        IbvpProblem("mhs", sin_iv(), c, p=2)
    with pytest.raises(TraceError):
        IbvpProblem("mhs", IntervalFunction.from_callable(lambda x: 1 + x, m=16), c)
    with pytest.raises(ValueError, match="D\\^s_1"):
        IbvpProblem("mhs-dsk", IntervalFunction.from_callable(lambda x: x * (0.5 - x), m=128), c, k=1)
    with pytest.raises(ValueError, match="kappa"):
        IbvpProblem("hs2", sin_iv(), c, rho0=sin_iv())
    with pytest.raises(ValueError, match="rho0"):
        IbvpProblem("hs2", sin_iv(), c, kappa=1.0)
    with pytest.raises(ValueError, match="kappa"):
        IbvpProblem("hs2", sin_iv(), c, rho0=sin_iv(), kappa=-1.0)
    with pytest.raises(ValueError, match="rho0"):
        IbvpProblem("mhs", sin_iv(), c, rho0=sin_iv())
    with pytest.raises(ValueError):
        IbvpProblem("hs2", sin_iv(), c, rho0=sin_iv(64), kappa=1.0)


def test_kind_specific_solvers_reject_other_kinds():
    prob = IbvpProblem("hs2", zero_iv(), Controls(t_end=0.01), rho0=zero_iv(), kappa=1.0)
    with pytest.raises(ValueError):
        solve_ibvp_mhs(prob)
    with pytest.raises(ValueError):
        solve_ibvp_dsk(prob)
    with pytest.raises(ValueError):
        solve_ibvp_hs2(IbvpProblem("mhs", zero_iv(), Controls(t_end=0.01)))


# zero data


@pytest.mark.parametrize("kind,extra", [("mhs", {}), ("mhs-dsk", {"k": 2}), ("hs2", {"kappa": 1.0}), ("muhs-demo", {})])
def test_zero_solutions(kind, extra):
    if kind == "hs2":
        extra = dict(extra, rho0=zero_iv())
    sol = solve_ibvp(IbvpProblem(kind, zero_iv(), Controls(t_end=0.02, dt_init=0.01), **extra))
    assert sol.halt_reason == HaltReason.T_END
    assert all(max(r[1:]) == 0.0 for r in sol.boundary_residuals)
    assert all(u.values.max() == 0.0 == u.values.min() for u in sol.u)
    assert not sol.blowup.detected and sol.blowup.slope_identity_gap == 0.0
    assert all(row[1:] == (0.0, 0.0, 0.0, 0.0) for row in persistence_series(sol))
    for _, res in sol.dsk_residuals:
        assert max(res.values()) == 0.0


# boundary emergence, parity, identity


@pytest.mark.parametrize("p", [1, 3])
def test_boundary_values_emerge(p):
    sol = solve_ibvp(IbvpProblem("mhs", sin_iv(), Controls(t_end=0.2, dt_init=1e-3), p=p))
    assert len(sol.boundary_residuals) == len(sol.times) == len(sol.u) == len(sol.parity_residuals)
    assert max(max(r[1:]) for r in sol.boundary_residuals) < 1e-9
    assert max(r[1] for r in sol.parity_residuals) < 1e-9
    assert sol.blowup.slope_identity_gap < 1e-9


def test_extension_evolution_commutation():
    # evolving sin(2 pi x) directly on the circle gives the same samples
    c = Controls(t_end=0.05, dt_init=1e-3)
    sol = solve_ibvp(IbvpProblem("mhs", sin_iv(), c))
    direct = integrate(MhsState(GridFunction.from_callable(make_grid(256), lambda x: np.sin(TWO_PI * x))), c)
    assert sol.times == direct.times
    for u, s in zip(sol.u, direct.states):
        assert np.max(np.abs(u.values - restrict_to_interval(s.u).values)) < 1e-15


def test_resolution_independence_of_restricted_solution():
    c = Controls(t_end=0.1, dt_init=1e-4)
    a = solve_ibvp(IbvpProblem("mhs", sin_iv(128), c))
    b = solve_ibvp(IbvpProblem("mhs", sin_iv(256), c))
    assert np.max(np.abs(a.u[-1].values - b.u[-1].values[::2])) < 1e-7


def test_interval_blowup_report_matches_riccati():
    sol = solve_ibvp(IbvpProblem("mhs", sin_iv(256), Controls(t_end=0.5, dt_init=1e-3)))
    rep = interval_blowup_report(sol)
    assert rep.detected and rep.slope_identity_gap < 1e-9
    assert rep.t_detect == pytest.approx(riccati_blowup_time(-TWO_PI, 2 * np.pi ** 2), rel=0.02)
    assert rep.t_detect == pytest.approx(sol.blowup.t_detect, rel=1e-12)


# two-component system


def test_hs2_reduces_to_mhs():
    c = Controls(t_end=0.2, dt_init=1e-3)
    a = solve_ibvp(IbvpProblem("mhs", sin_iv(), c))
    b = solve_ibvp(IbvpProblem("hs2", sin_iv(), c, rho0=zero_iv(128), kappa=1.0))
    assert a.times == b.times
    assert max(np.max(np.abs(x.values - y.values)) for x, y in zip(a.u, b.u)) < 1e-8
    assert all(r.values.max() == 0.0 == r.values.min() for r in b.rho)
    assert all(row[2] == 0.0 for row in persistence_series(b))


def test_hs2_persistence_and_conservation():
    sol = solve_ibvp(IbvpProblem("hs2", sin_iv(), Controls(t_end=0.4, dt_init=1e-3), rho0=sin_iv(), kappa=1.0))
    rows = persistence_series(sol)
    assert len(rows) == len(sol.times)
    for t, u_int, rho_int, u_circ, rho_circ in rows:
        assert u_int <= u_circ + 1e-10 and rho_int <= rho_circ + 1e-10
    # odd data: interval integrals are exactly half of the circle means
    assert rows[-1][1] == pytest.approx(rows[-1][3] / np.sqrt(2), rel=1e-12)
    e = sol.trajectory.series("hs2_energy")
    half = sol.trajectory.series("t") <= 0.5 * sol.blowup.t_detect
    assert np.max(np.abs(e[half] - e[0])) / e[0] < 1e-7
    assert max(max(r[1:]) for r in sol.boundary_residuals) < 1e-9
    assert max(max(r[1:]) for r in sol.parity_residuals) < 1e-9


# D^s_k propagation


def test_dsk_residuals_tracked():
    sol = solve_ibvp(IbvpProblem("mhs-dsk", sin_iv(512), Controls(t_end=0.1, dt_init=1e-3, sample_stride=10), k=1))
    assert len(sol.dsk_residuals) == len(sol.times)
    assert set(sol.dsk_residuals[0][1]) == {(0, 0.0), (0, 0.5), (2, 0.0), (2, 0.5)}
    assert max(max(r.values()) for _, r in sol.dsk_residuals) < 1e-6


# muHS obstruction


def test_mu_obstruction():
    c = Controls(t_end=0.2, dt_init=1e-3)
    zero = mu_obstruction_demo(zero_iv(128), c)
    assert zero.deviation == 0.0
    odd = mu_obstruction_demo(sin_iv(), c)
    assert odd.deviation < 1e-8 and odd.times[-1] == pytest.approx(0.2)
    assert np.max(np.abs(odd.mean_series)) < 1e-12
    shifted = GridFunction.from_callable(make_grid(256), lambda x: 1 + np.sin(TWO_PI * x))
    direct = compare_mu_hs(shifted, c)
    assert direct.deviation > 1e-3
    assert np.max(np.abs(np.array(direct.mean_series) - 1.0)) < 1e-10


# problem files and reports


def test_problem_json_round_trip(tmp_path):
    d = {
        "kind": "hs2",
        "m": 64,
        "kappa": 2.0,
        "u0": {"builtin": "sine", "amplitude": 0.5},
        "rho0": {"builtin": "poly-x-half-minus-x"},
        "controls": {"t_end": 0.05},
    }
    prob = problem_from_dict(d)
    assert prob.kappa == 2.0 and prob.resolved_controls.kappa == 2.0
    path = tmp_path / "p.json"
    write_problem(path, prob)
    again = read_problem(path)
    assert np.array_equal(again.u0.values, prob.u0.values) and np.array_equal(again.rho0.values, prob.rho0.values)
    assert problem_to_dict(again) == problem_to_dict(prob)


@pytest.mark.parametrize(
    "patch,field",
    [
        ({"kind": "burgers"}, "kind"),
        ({"m": 2}, "m"),
        ({"kappa": None}, "kappa"),
        ({"controls": None}, "controls"),
        ({"controls": {"t_end": 1.0, "bogus": 1}}, "controls"),
        ({"u0": {"builtin": "sine", "wavenumber": 1.5}}, "u0.wavenumber"),
        ({"u0": {"samples": [0.0, 1.0]}}, "u0.samples"),
    ],
)
def test_problem_json_errors_name_field(patch, field):
    d = {"kind": "hs2", "m": 8, "kappa": 1.0, "u0": {"builtin": "zero"}, "rho0": {"builtin": "zero"},
         "controls": {"t_end": 0.1}}
    d.update(patch)
    with pytest.raises(ValueError) as exc:
        problem_from_dict(d)
    assert str(exc.value).startswith(field)


def test_solution_report_is_json_ready():
    sol = solve_ibvp(IbvpProblem("mhs-dsk", sin_iv(64), Controls(t_end=0.02), k=1))
    rep = solution_report(sol, "r1", {"echo": True})
    text = json.dumps(rep, sort_keys=True, allow_nan=False)
    back = json.loads(text)
    assert back["run_id"] == "r1" and back["config"] == {"echo": True}
    assert back["halt_reason"] == "t-end-reached" and back["blowup"]["detected"] is False
    assert back["max_residuals"]["boundary"] < 1e-9 and "dsk" in back["max_residuals"]
    assert back["max_drift"]["energy_rel"] < 1e-8
