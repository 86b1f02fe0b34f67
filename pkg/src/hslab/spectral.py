"""Fourier calculus for real 1-periodic functions on a uniform grid.

All transforms use the convention ``f(x) = sum_k c_k exp(2 pi i k x)`` on the
unit circle ``S = R/Z``, so every wavenumber carries its ``2 pi`` factor
explicitly.  Functions here are pure; grid functions are immutable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Grid",
    "GridFunction",
    "SpectralCoeffs",
    "NonFiniteError",
    "make_grid",
    "to_coeffs",
    "from_coeffs",
    "deriv",
    "mean",
    "antideriv_mean_zero",
    "sobolev_norm_circle",
    "dealias",
    "DEFAULT_DEALIAS",
]

DEFAULT_DEALIAS = 2.0 / 3.0


class NonFiniteError(FloatingPointError):
    """Raised when a grid function would hold NaN or Inf samples."""


@dataclass(frozen=True)
class Grid:
    """Uniform grid ``x_j = j/n`` on one period of the unit circle."""

    n: int

    def __post_init__(self):
        if isinstance(self.n, bool) or int(self.n) != self.n:
            raise ValueError(f"grid size must be an integer, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))
        if self.n % 2:
            raise ValueError(f"grid size must be even so x=0 and x=1/2 are nodes, got n={self.n}")
        if self.n < 8:
            raise ValueError(f"grid size must be at least 8, got n={self.n}")

    @property
    def dx(self) -> float:
        return 1.0 / self.n

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.n) / self.n

    @property
    def half(self) -> int:
        """Index of the node x = 1/2."""
        return self.n // 2

    @property
    def rwavenumbers(self) -> np.ndarray:
        """Nonnegative integer wavenumbers ``0..n/2`` in ``rfft`` order."""
        return np.arange(self.n // 2 + 1)


def make_grid(n: int) -> Grid:
    """Return the uniform grid with ``n`` nodes (``n`` even, ``n >= 8``)."""
    return Grid(n)


class GridFunction:
    """Samples of a real 1-periodic function on a :class:`Grid`.

    Values are copied on construction and made read-only.  Nonfinite samples
    raise :class:`NonFiniteError` immediately instead of propagating.
    Arithmetic with scalars or other grid functions on the same grid is
    pointwise.
    """

    __slots__ = ("grid", "values")

    def __init__(self, grid: Grid, values):
        vals = np.array(values, dtype=float)
        if vals.shape != (grid.n,):
            raise ValueError(f"expected {grid.n} samples, got shape {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise NonFiniteError("grid function has nonfinite samples")
        vals.flags.writeable = False
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", vals)

    def __setattr__(self, name, value):
        raise AttributeError("GridFunction is immutable")

    @classmethod
    def from_callable(cls, grid: Grid, func) -> "GridFunction":
        return cls(grid, func(grid.nodes))

    @classmethod
    def zeros(cls, grid: Grid) -> "GridFunction":
        return cls(grid, np.zeros(grid.n))

    def __repr__(self):
        return f"GridFunction(n={self.grid.n}, max|f|={self.max_abs():.6g})"

    def __len__(self):
        return self.grid.n

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))

    def _other(self, other):
        if isinstance(other, GridFunction):
            if other.grid != self.grid:
                raise ValueError("grid functions live on different grids")
            return other.values
        return other

    def __add__(self, other):
        return GridFunction(self.grid, self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return GridFunction(self.grid, self.values - self._other(other))

    def __rsub__(self, other):
        return GridFunction(self.grid, self._other(other) - self.values)

    def __mul__(self, other):
        return GridFunction(self.grid, self.values * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return GridFunction(self.grid, self.values / self._other(other))

    def __neg__(self):
        return GridFunction(self.grid, -self.values)

    def __pow__(self, p):
        return GridFunction(self.grid, self.values ** p)


@dataclass(frozen=True)
class SpectralCoeffs:
    """Fourier coefficients ``c_k`` for ``k = -n/2 .. n/2-1`` (ascending)."""

    k: np.ndarray
    c: np.ndarray

    def coefficient(self, k: int) -> complex:
        n = len(self.k)
        return complex(self.c[k + n // 2])


def _rfft(f: GridFunction) -> np.ndarray:
    return np.fft.rfft(f.values) / f.grid.n


def _irfft(grid: Grid, c: np.ndarray) -> GridFunction:
    return GridFunction(grid, np.fft.irfft(c * grid.n, grid.n))


def to_coeffs(f: GridFunction) -> SpectralCoeffs:
    n = f.grid.n
    full = np.fft.fft(f.values) / n
    k = np.arange(-n // 2, n // 2)
    return SpectralCoeffs(k=k, c=full[k % n])


def from_coeffs(grid: Grid, coeffs: SpectralCoeffs) -> GridFunction:
    n = grid.n
    if len(coeffs.k) != n:
        raise ValueError("coefficient count does not match the grid")
    full = np.zeros(n, dtype=complex)
    full[coeffs.k % n] = coeffs.c
    return GridFunction(grid, np.fft.ifft(full * n).real)


def deriv(f: GridFunction, order: int = 1) -> GridFunction:
    """Spectral derivative of the given order.

    The Nyquist mode is dropped for odd orders, which keeps the result real
    and the first-derivative matrix skew-symmetric.
    """
    if int(order) != order or order < 1:
        raise ValueError(f"derivative order must be a positive integer, got {order!r}")
    grid = f.grid
    k = grid.rwavenumbers
    symbol = (2j * np.pi * k) ** order
    if order % 2:
        symbol[-1] = 0.0
    return _irfft(grid, symbol * _rfft(f))


def mean(f: GridFunction) -> float:
    """Circle mean ``int_0^1 f dx`` (trapezoid rule, exact on the grid)."""
    return float(np.mean(f.values))


def antideriv_mean_zero(f: GridFunction) -> GridFunction:
    """Mean-zero periodic primitive of ``f - mean(f)``.

    This is the Fourier multiplier ``1/(2 pi i k)`` with the zero mode and the
    Nyquist mode set to zero.  On mean-zero input it agrees with
    ``int_a^x f - int_0^1 int_a^y f`` for every base point ``a``.
    """
    grid = f.grid
    c = _rfft(f)
    out = np.zeros_like(c)
    k = grid.rwavenumbers[1:-1]
    out[1:-1] = c[1:-1] / (2j * np.pi * k)
    return _irfft(grid, out)


def _mode_weights(grid: Grid) -> np.ndarray:
    # multiplicity of each rfft mode in the full k = -n/2..n/2-1 sum
    w = np.full(grid.n // 2 + 1, 2.0)
    w[0] = 1.0
    w[-1] = 1.0
    return w


def sobolev_norm_circle(f: GridFunction, s: float) -> float:
    r"""``H^s(S)`` norm ``(sum_k (1 + (2 pi k)^2)^s |c_k|^2)^{1/2}``.

    Exact for bandlimited ``f``; otherwise the truncation to resolved modes.
    """
    if s < 0:
        raise ValueError(f"Sobolev index must be nonnegative, got s={s}")
    grid = f.grid
    c = _rfft(f)
    k = grid.rwavenumbers
    weight = (1.0 + (2 * np.pi * k) ** 2) ** s
    return float(np.sqrt(np.sum(_mode_weights(grid) * weight * np.abs(c) ** 2)))


def dealias(f: GridFunction, fraction: float = DEFAULT_DEALIAS) -> GridFunction:
    """Zero every mode with ``|k| > fraction * n/2``."""
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"dealias fraction must lie in (0, 1], got {fraction}")
    if fraction == 1.0:
        return f
    grid = f.grid
    c = _rfft(f)
    c[grid.rwavenumbers > fraction * (grid.n / 2)] = 0.0
    return _irfft(grid, c)
