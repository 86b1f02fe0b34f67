"""Odd periodic extension of data on [0, 1/2] and the Sobolev checks around it.

Interval data live on ``x_j = j/(2m)``, ``j = 0..m``.  Extending oddly about
``x = 0`` and 1-periodically gives a function on the circle whose grid
(``n = 2m``) contains the interval nodes verbatim, so extension and
restriction never interpolate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy.interpolate import make_interp_spline

from .spectral import Grid, GridFunction, NonFiniteError, _mode_weights

__all__ = [
    "IntervalFunction",
    "DskReport",
    "TraceError",
    "NormEstimate",
    "odd_periodic_extend",
    "restrict_to_interval",
    "fd_weights",
    "endpoint_derivative",
    "check_dsk",
    "interval_hn_norm",
    "slobodeckij_norm",
    "extension_regularity_scan",
    "scan_is_divergent",
    "read_interval",
    "write_interval",
]

TRACE_TOL = 1e-12
DSK_RTOL = 1e-6


class TraceError(ValueError):
    """Interval data do not vanish at a tie point."""

    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual


class IntervalFunction:
    """Samples of a real function on ``[0, 1/2]`` at ``x_j = j/(2m)``."""

    __slots__ = ("m", "values")

    def __init__(self, m: int, values):
        if int(m) != m or m < 1:
            raise ValueError(f"subinterval count must be a positive integer, got {m!r}")
        vals = np.array(values, dtype=float)
        if vals.shape != (int(m) + 1,):
            raise ValueError(f"expected {int(m) + 1} samples, got shape {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise NonFiniteError("interval function has nonfinite samples")
        vals.flags.writeable = False
        object.__setattr__(self, "m", int(m))
        object.__setattr__(self, "values", vals)

    def __setattr__(self, name, value):
        raise AttributeError("IntervalFunction is immutable")

    def __repr__(self):
        return f"IntervalFunction(m={self.m})"

    @property
    def h(self) -> float:
        return 0.5 / self.m

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.m + 1) / (2 * self.m)

    @classmethod
    def from_callable(cls, func, m: int = 512) -> "IntervalFunction":
        return cls(m, func(np.arange(m + 1) / (2 * m)))

    def compatible(self, grid: Grid) -> bool:
        return grid.n == 2 * self.m


def odd_periodic_extend(v: IntervalFunction, trace_tol: float = TRACE_TOL) -> GridFunction:
    """Odd, 1-periodic extension of trace-zero interval data.

    Raises
    ------
    TraceError
        If ``|v(0)|`` or ``|v(1/2)|`` exceeds ``trace_tol``; the extension
        would jump at a tie point.
    """
    m = v.m
    if m < 4:
        raise ValueError(f"need at least 4 subintervals, got m={m}")
    for x, val in (("0", v.values[0]), ("1/2", v.values[m])):
        if abs(val) > trace_tol:
            raise TraceError(f"nonzero trace v({x}) = {val:.3e}", abs(val))
    out = np.empty(2 * m)
    out[: m + 1] = v.values
    out[m + 1 :] = -v.values[m - 1 : 0 : -1]
    # tie points are snapped so the extension is odd bit-for-bit
    out[0] = 0.0
    out[m] = 0.0
    return GridFunction(Grid(2 * m), out)


def restrict_to_interval(f: GridFunction) -> IntervalFunction:
    m = f.grid.half
    return IntervalFunction(m, f.values[: m + 1])


def fd_weights(z: float, x, order: int) -> np.ndarray:
    """Finite-difference weights for derivatives ``0..order`` at ``z``.

    Fornberg's recursion on arbitrary nodes ``x``; row ``d`` of the returned
    ``(order+1, len(x))`` array approximates the ``d``-th derivative.
    """
    x = np.asarray(x, dtype=float)
    npts = len(x)
    c = np.zeros((order + 1, npts))
    c1 = 1.0
    c4 = x[0] - z
    c[0, 0] = 1.0
    for i in range(1, npts):
        mn = min(i, order)
        c2 = 1.0
        c5 = c4
        c4 = x[i] - z
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[k, i] = c1 * (k * c[k - 1, i - 1] - c5 * c[k, i - 1]) / c2
                c[0, i] = -c1 * c5 * c[0, i - 1] / c2
            for k in range(mn, 0, -1):
                c[k, j] = (c4 * c[k, j] - k * c[k - 1, j]) / c3
            c[0, j] = c4 * c[0, j] / c3
        c1 = c2
    return c


def _one_sided(v: IntervalFunction, order: int, side: str, npts: int, stride: int):
    # returns (estimate, roundoff bound)
    m = v.m
    idx = np.arange(npts) * stride
    if side == "left":
        samples = v.values[idx]
        xs = idx * v.h
        z = 0.0
    elif side == "right":
        samples = v.values[m - idx]
        xs = (m - idx) * v.h
        z = 0.5
    else:
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    w = fd_weights(z, xs, order)[order]
    return float(np.dot(w, samples)), float(np.finfo(float).eps * np.dot(np.abs(w), np.abs(samples)))


def endpoint_derivative(
    v: IntervalFunction, order: int, side: str, accuracy: int = 6, stride: int | str | None = None
) -> float:
    """One-sided finite-difference estimate of ``v^(order)`` at 0 or 1/2.

    By default the stencil spacing is widened from ``h`` toward
    ``eps**(1/(order+q)) / (2 pi)`` so truncation and cancellation error stay
    balanced at large ``m`` for data varying on the unit-circle scale.  In
    double precision the fourth derivative of O(1) data has a noise floor
    near 1e-4.  An integer ``stride`` (in grid steps) fixes the spacing.
    ``stride="adaptive"`` suits data of unknown scale, such as a steepening
    solution: every stride up to the default one is tried and the one with the smallest
    error estimate wins, the estimate being the gap to a stencil two orders
    less accurate plus a cancellation bound.
    """
    if order == 0:
        return float(v.values[0] if side == "left" else v.values[-1])
    m = v.m
    q = min(accuracy, m + 1 - order)
    if q < 2:
        raise ValueError(f"m={m} too small for a one-sided stencil of derivative order {order}")
    npts = order + q
    smax = m // (npts - 1)
    h_opt = np.finfo(float).eps ** (1.0 / npts) / (2 * np.pi)
    unit = max(1, min(int(round(h_opt / v.h)), smax))
    if stride == "adaptive":
        best = None
        for st in range(1, unit + 1):
            d, noise = _one_sided(v, order, side, npts, st)
            if q > 2:
                coarse, _ = _one_sided(v, order, side, npts - 2, st)
                err = abs(d - coarse) + 10 * noise
            else:
                err = 10 * noise
            if best is None or err < best[0]:
                best = (err, d)
        return best[1]
    if stride is None:
        stride = unit
    elif isinstance(stride, str) or int(stride) != stride or not 1 <= stride <= smax:
        raise ValueError(f"stride must be 'adaptive' or an integer in [1, {smax}], got {stride!r}")
    return _one_sided(v, order, side, npts, int(stride))[0]


@dataclass(frozen=True)
class DskReport:
    """Endpoint residuals for membership in ``D^s_k(0, 1/2)``.

    ``residuals`` maps ``(derivative order, endpoint)`` to the absolute value
    of the estimated derivative there; endpoints are ``0.0`` and ``0.5``.
    """

    k: int
    residuals: dict
    tol: float
    passed: bool = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "passed", all(r <= self.tol for r in self.residuals.values()))

    @property
    def max_residual(self) -> float:
        return max(self.residuals.values())


def check_dsk(v: IntervalFunction, k: int, tol: float | None = None) -> DskReport:
    """Check ``v^(2k-2j)(0) = v^(2k-2j)(1/2) = 0`` for ``j = 0..k``.

    ``tol`` defaults to ``1e-6 * max|v|``.
    """
    if int(k) != k or k < 0:
        raise ValueError(f"k must be a nonnegative integer, got {k!r}")
    k = int(k)
    if v.m < 2 * k + 2:
        raise ValueError(f"m={v.m} too small for order-{2 * k} endpoint stencils (need m >= {2 * k + 2})")
    if tol is None:
        tol = DSK_RTOL * float(np.max(np.abs(v.values)))
    residuals = {}
    for j in range(k + 1):
        d = 2 * k - 2 * j
        residuals[(d, 0.0)] = abs(endpoint_derivative(v, d, "left"))
        residuals[(d, 0.5)] = abs(endpoint_derivative(v, d, "right"))
    return DskReport(k=k, residuals=residuals, tol=float(tol))


class NormEstimate(NamedTuple):
    value: float
    error: float


def _spline(v: IntervalFunction, degree: int):
    if v.m + 1 <= degree:
        raise ValueError(f"need more than {degree} samples for a degree-{degree} spline")
    return make_interp_spline(v.nodes, v.values, k=degree)


def _gauss_panels(a: float, b: float, panels: int, order: int):
    t, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    x = (mid[:, None] + half[:, None] * t[None, :]).ravel()
    wx = (half[:, None] * w[None, :]).ravel()
    return x, wx


def _hn_part(spl, n: int, order: int) -> float:
    # spline pieces are polynomials; Gauss on each knot span is exact for
    # squares once order > degree
    knots = np.unique(spl.t)
    t, w = np.polynomial.legendre.leggauss(order)
    total = 0.0
    for a, b in zip(knots[:-1], knots[1:]):
        x = 0.5 * (a + b) + 0.5 * (b - a) * t
        wx = 0.5 * (b - a) * w
        for i in range(n + 1):
            total += float(np.dot(wx, spl(x, nu=i) ** 2))
    return total


def interval_hn_norm(v: IntervalFunction, n: int) -> float:
    """Integer-order norm ``(sum_{i<=n} int_0^{1/2} |v^(i)|^2)^{1/2}``."""
    degree = max(5, 2 * (n // 2) + 3)
    spl = _spline(v, degree)
    return math.sqrt(_hn_part(spl, n, degree + 1))


def _slobodeckij_double(g, gp, sigma, length, order, panels, rel_tail):
    # 2 * int_0^L h^{-1-2 sigma} int_0^{L-h} |g(y+h) - g(y)|^2 dy dh on
    # dyadic h-bands [L 2^{-j-1}, L 2^{-j}]; the band [0, delta] uses
    # g(y+h) - g(y) ~ h g'(y)
    t, w = np.polynomial.legendre.leggauss(order)
    yq, wy = _gauss_panels(0.0, length, panels, order)
    gp2 = float(np.dot(wy, gp(yq) ** 2))
    total = 0.0
    tail = 0.0
    for j in range(200):
        hi = length * 2.0 ** (-j)
        lo = 0.5 * hi
        hs = 0.5 * (lo + hi) + 0.5 * (hi - lo) * t
        wh = 0.5 * (hi - lo) * w
        band = 0.0
        for h, whi in zip(hs, wh):
            ys, wys = _gauss_panels(0.0, length - h, panels, order)
            band += whi * h ** (-1.0 - 2.0 * sigma) * float(np.dot(wys, (g(ys + h) - g(ys)) ** 2))
        total += 2.0 * band
        tail = 2.0 * lo ** (2.0 - 2.0 * sigma) / (2.0 - 2.0 * sigma) * gp2
        if tail <= rel_tail * (total + tail) or lo < length * 2.0 ** -40:
            break
    return total + tail


def slobodeckij_norm(
    v: IntervalFunction,
    s: float,
    order: int = 8,
    panels: int = 16,
    rel_tail: float = 1e-8,
) -> NormEstimate:
    r"""Fractional Sobolev norm on ``(0, 1/2)`` for ``s = n + sigma``.

    .. math::

        \|v\|^2 = \|v\|_{H^n}^2
            + \iint \frac{|v^{(n)}(x) - v^{(n)}(y)|^2}{|x - y|^{1 + 2\sigma}}\,dx\,dy

    The samples are interpolated by a quintic (or higher) spline.  The
    singular double integral is split into dyadic bands in ``|x - y|``
    toward the diagonal, with Gauss-Legendre rules in each band; the
    innermost band is closed with its leading-order asymptotics.  The
    returned error is the change when the Gauss order and panel count are
    both doubled.
    """
    n = int(math.floor(s))
    sigma = s - n
    if not 0.0 < sigma < 1.0:
        raise ValueError(f"fractional part of s must lie in (0, 1), got s={s}; use interval_hn_norm for integer s")
    if n > 4:
        raise ValueError(f"s={s} above the supported range s < 5")
    degree = max(5, 2 * ((n + 1) // 2) + 3)
    spl = _spline(v, degree)
    g = spl.derivative(n) if n else spl
    gp = spl.derivative(n + 1)
    hn = _hn_part(spl, n, degree + 1)

    def value(order_, panels_):
        dbl = _slobodeckij_double(g, gp, sigma, 0.5, order_, panels_, rel_tail)
        return math.sqrt(hn + dbl)

    coarse = value(order, panels)
    fine = value(2 * order, 2 * panels)
    return NormEstimate(fine, abs(fine - coarse))


def extension_regularity_scan(v: IntervalFunction, s: float, cutoffs=None) -> list:
    """Partial sums of the ``H^s(S)`` weight series of the odd extension.

    Returns ``[(K, sum_{|k|<=K} (1 + (2 pi k)^2)^s |c_k|^2), ...]``.  The
    default cutoffs are the four octaves ending at ``n/2``.  Coefficients
    at the transform's rounding floor (``4 eps max|v|``) count as zero;
    otherwise large ``s`` would amplify rounding noise into spurious growth.
    """
    f = odd_periodic_extend(v)
    n = f.grid.n
    if cutoffs is None:
        cutoffs = [n // 16, n // 8, n // 4, n // 2]
    cutoffs = [int(K) for K in cutoffs]
    if any(b <= a for a, b in zip(cutoffs, cutoffs[1:])):
        raise ValueError("cutoffs must be strictly increasing")
    if cutoffs[0] < 0 or cutoffs[-1] > n // 2:
        raise ValueError(f"cutoffs must lie in [0, {n // 2}]")
    c = np.fft.rfft(f.values) / n
    c[np.abs(c) <= 4 * np.finfo(float).eps * f.max_abs()] = 0.0
    k = f.grid.rwavenumbers
    terms = _mode_weights(f.grid) * (1.0 + (2 * np.pi * k) ** 2) ** s * np.abs(c) ** 2
    partial = np.cumsum(terms)
    return [(K, float(partial[K])) for K in cutoffs]


def scan_is_divergent(scan, growth: float = 0.05, octaves: int = 3) -> bool:
    """True when each of the last ``octaves`` octaves grows by more than ``growth``.

    Consecutive cutoffs in ``scan`` must double.
    """
    if len(scan) < octaves + 1:
        raise ValueError(f"need {octaves + 1} cutoffs for {octaves} octaves")
    tail = scan[-(octaves + 1) :]
    for (k0, s0), (k1, s1) in zip(tail, tail[1:]):
        if k1 != 2 * k0:
            raise ValueError(f"cutoffs {k0} and {k1} are not an octave apart")
        if s0 <= 0.0 or s1 <= (1.0 + growth) * s0:
            return False
    return True


def write_interval(path, v: IntervalFunction) -> None:
    lines = [f"# interval-function m={v.m}"]
    lines += [f"{x:.17g} {y:.17g}" for x, y in zip(v.nodes, v.values)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_interval(path) -> IntervalFunction:
    """Read the two-column ``x value`` format written by :func:`write_interval`."""
    text = Path(path).read_text().splitlines()
    if not text or not text[0].startswith("# interval-function m="):
        raise ValueError(f"{path}: missing '# interval-function m=<m>' header")
    try:
        m = int(text[0].split("m=", 1)[1])
    except ValueError as exc:
        raise ValueError(f"{path}: bad header {text[0]!r}") from exc
    rows = [ln.split() for ln in text[1:] if ln.strip() and not ln.startswith("#")]
    if len(rows) != m + 1:
        raise ValueError(f"{path}: expected {m + 1} rows for m={m}, got {len(rows)}")
    data = np.array(rows, dtype=float)
    if data.shape[1] != 2:
        raise ValueError(f"{path}: expected two columns")
    expected = np.arange(m + 1) / (2 * m)
    bad = np.flatnonzero(np.abs(data[:, 0] - expected) > 1e-12)
    if bad.size:
        j = int(bad[0])
        raise ValueError(f"{path}: row {j} has x={data[j, 0]!r}, expected {expected[j]!r}")
    return IntervalFunction(m, data[:, 1])
