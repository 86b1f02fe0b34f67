import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from hslab.spectral import (
    GridFunction,
    NonFiniteError,
    antideriv_mean_zero,
    dealias,
    deriv,
    from_coeffs,
    make_grid,
    mean,
    sobolev_norm_circle,
    to_coeffs,
)

TWO_PI = 2 * np.pi


def trig_poly(grid, cos_c, sin_c, const=0.0):
    x = grid.nodes
    out = np.full(grid.n, const)
    for k, (a, b) in enumerate(zip(cos_c, sin_c), start=1):
        out += a * np.cos(TWO_PI * k * x) + b * np.sin(TWO_PI * k * x)
    return GridFunction(grid, out)


coeff_lists = st.lists(st.floats(-1, 1, allow_nan=False), min_size=1, max_size=12)


# grid and grid functions


def test_grid_nodes_and_tie_point():
    g = make_grid(8)
    assert np.allclose(g.nodes, np.arange(8) * 0.125)
    assert g.nodes[g.half] == 0.5
    g = make_grid(256)
    assert g.dx == 1 / 256 and g.nodes[128] == 0.5


@pytest.mark.parametrize("n", [7, 6, 0, -8, 9.5])
def test_grid_rejects_bad_sizes(n):
    with pytest.raises(ValueError):
        make_grid(n)


def test_gridfunction_rejects_nonfinite_and_is_immutable():
    g = make_grid(8)
    with pytest.raises(NonFiniteError):
        GridFunction(g, [np.nan] + [0.0] * 7)
    with pytest.raises(ValueError):
        GridFunction(g, np.zeros(9))
    f = GridFunction.zeros(g)
    with pytest.raises(AttributeError):
        f.values = np.ones(8)
    with pytest.raises(ValueError):
        f.values[0] = 1.0
    with pytest.raises(NonFiniteError), np.errstate(divide="ignore"):
        GridFunction(g, np.ones(8)) / 0.0


def test_arithmetic_checks_grids():
    a = GridFunction.zeros(make_grid(8))
    b = GridFunction.zeros(make_grid(16))
    with pytest.raises(ValueError):
        a + b


@given(coeff_lists, coeff_lists, st.floats(-3, 3))
@settings(max_examples=25, deadline=None)
def test_coefficient_round_trip_and_hermitian(a, b, c):
    g = make_grid(64)
    f = trig_poly(g, a, b, c)
    co = to_coeffs(f)
    back = from_coeffs(g, co)
    assert np.max(np.abs(back.values - f.values)) <= 1e-12 * max(1.0, f.max_abs())
    for k in range(1, 31):
        assert abs(co.coefficient(-k) - np.conj(co.coefficient(k))) < 1e-14


# derivatives


def test_deriv_examples():
    g = make_grid(32)
    s = GridFunction.from_callable(g, lambda x: np.sin(TWO_PI * x))
    c = np.cos(TWO_PI * g.nodes)
    assert np.max(np.abs(deriv(s).values - TWO_PI * c)) < 1e-12
    assert np.max(np.abs(deriv(s, 2).values + TWO_PI ** 2 * s.values)) < 1e-11
    assert np.max(np.abs(deriv(s, 3).values + TWO_PI ** 3 * c)) < 1e-10
    const = GridFunction(g, np.full(32, 3.7))
    assert np.max(np.abs(deriv(const).values)) < 1e-14


def test_deriv_drops_nyquist_for_odd_orders():
    g = make_grid(16)
    nyq = GridFunction(g, np.cos(np.pi * np.arange(16)))
    assert np.max(np.abs(deriv(nyq).values)) < 1e-12
    assert np.max(np.abs(deriv(nyq, 2).values + (np.pi * 16) ** 2 * nyq.values)) < 1e-9


@pytest.mark.parametrize("order", [0, -1, 1.5])
def test_deriv_rejects_bad_order(order):
    with pytest.raises(ValueError):
        deriv(GridFunction.zeros(make_grid(8)), order)


# means


def test_mean_examples():
    g = make_grid(64)
    assert abs(mean(GridFunction.from_callable(g, lambda x: np.sin(TWO_PI * x)))) < 1e-15
    assert abs(mean(GridFunction.from_callable(g, lambda x: 2 + np.cos(4 * np.pi * x))) - 2) < 1e-15


# antiderivative


def test_antideriv_examples():
    g = make_grid(64)
    x = g.nodes
    got = antideriv_mean_zero(GridFunction(g, np.cos(TWO_PI * x)))
    assert np.max(np.abs(got.values - np.sin(TWO_PI * x) / TWO_PI)) < 1e-15
    assert np.max(np.abs(antideriv_mean_zero(GridFunction(g, np.ones(64))).values)) == 0.0
    got = antideriv_mean_zero(GridFunction(g, np.sin(TWO_PI * x) ** 2))
    assert np.max(np.abs(got.values + np.sin(4 * np.pi * x) / (8 * np.pi))) < 1e-15


@given(coeff_lists, coeff_lists, st.floats(-3, 3))
@settings(max_examples=50, deadline=None)
def test_deriv_inverts_antideriv_up_to_mean(a, b, c):
    g = make_grid(64)
    f = trig_poly(g, a, b, c)
    F = antideriv_mean_zero(f)
    assert np.max(np.abs(deriv(F).values - (f - mean(f)).values)) < 1e-10
    assert abs(mean(F)) < 1e-14


@given(coeff_lists)
@settings(max_examples=25, deadline=None)
def test_antideriv_flips_parity(a):
    g = make_grid(64)
    rev = lambda v: np.roll(v[::-1], 1)  # samples at -x_j
    even = antideriv_mean_zero(trig_poly(g, a, [0.0] * len(a))).values
    odd = antideriv_mean_zero(trig_poly(g, [0.0] * len(a), a)).values
    assert np.max(np.abs(even + rev(even))) < 1e-13
    assert np.max(np.abs(odd - rev(odd))) < 1e-13


@pytest.mark.parametrize("a", [0.0, 0.3])
def test_antideriv_matches_double_integral_formula(a):
    # independent oracle: F(x) = int_a^x f - int_0^1 int_a^y f dy by adaptive quadrature
    rng = np.random.default_rng(11)
    cc, sc = rng.normal(size=5), rng.normal(size=5)

    def f(x):
        k = np.arange(1, 6)
        return float(cc @ np.cos(TWO_PI * k * x) + sc @ np.sin(TWO_PI * k * x))

    def prim(y):
        return quad(f, a, y, epsabs=1e-13, epsrel=1e-13, limit=200)[0]

    offset = quad(prim, 0.0, 1.0, epsabs=1e-13, epsrel=1e-13, limit=200)[0]
    g = make_grid(64)
    spectral = antideriv_mean_zero(trig_poly(g, cc, sc)).values
    for j in range(0, 64, 7):
        assert abs(prim(g.nodes[j]) - offset - spectral[j]) < 1e-10


# norms


def test_sobolev_norm_examples():
    g = make_grid(32)
    s = GridFunction.from_callable(g, lambda x: np.sin(TWO_PI * x))
    assert sobolev_norm_circle(GridFunction.zeros(g), 1.3) == 0.0
    assert abs(sobolev_norm_circle(s, 0) - np.sqrt(0.5)) < 1e-15
    assert abs(sobolev_norm_circle(s, 1) - np.sqrt(0.5 * (1 + TWO_PI ** 2))) < 1e-13
    with pytest.raises(ValueError):
        sobolev_norm_circle(s, -0.5)


@given(st.lists(st.floats(-10, 10, allow_nan=False), min_size=16, max_size=16))
@settings(max_examples=50, deadline=None)
def test_parseval(vals):
    f = GridFunction(make_grid(16), vals)
    assert abs(sobolev_norm_circle(f, 0) - np.sqrt(np.mean(np.square(vals)))) < 1e-12 * (1 + max(map(abs, vals)))


# dealiasing


def test_dealias_examples():
    g = make_grid(48)
    low = trig_poly(g, [0.3] * 16, [0.1] * 16)
    assert np.max(np.abs(dealias(low).values - low.values)) < 1e-14
    high = GridFunction.from_callable(g, lambda x: np.cos(TWO_PI * 23 * x))
    assert np.max(np.abs(dealias(high).values)) < 1e-13
    noise = GridFunction(g, np.random.default_rng(0).normal(size=48))
    c = np.fft.rfft(dealias(noise).values)
    assert np.max(np.abs(c[g.rwavenumbers > 16])) < 1e-13
    assert dealias(noise, 1.0) is noise
    for bad in (0.0, 1.2):
        with pytest.raises(ValueError):
            dealias(noise, bad)
