"""Builtin initial data, specified as small JSON-shaped dictionaries.

A spec is ``{"builtin": name, ...}`` with ``name`` one of

* ``zero``
* ``sine`` -- ``amplitude * sin(2 pi wavenumber x) + offset`` (integer
  wavenumber; ``offset`` defaults to 0 and is only sensible on the circle)
* ``poly-x-half-minus-x`` -- ``x (1/2 - x)`` on the interval
* ``random-sine`` -- ``sum_j a_j sin(2 pi j x)``, ``j = 1..modes``, with
  ``a_j ~ N(0, 1) / j^decay`` drawn from a seeded generator
* ``custom-file`` -- interval samples read from ``path``
"""

from __future__ import annotations

import numpy as np

from .extension import IntervalFunction, odd_periodic_extend, read_interval
from .spectral import GridFunction, make_grid

__all__ = ["BUILTINS", "validate_spec", "interval_data", "circle_data"]

BUILTINS = ("zero", "sine", "poly-x-half-minus-x", "random-sine", "custom-file")


def _field_error(field: str, why: str) -> ValueError:
    return ValueError(f"{field}: {why}")


def _number(spec: dict, key: str, default: float, field: str) -> float:
    val = spec.get(key, default)
    if isinstance(val, bool) or not isinstance(val, (int, float)) or not np.isfinite(val):
        raise _field_error(f"{field}.{key}", f"expected a finite number, got {val!r}")
    return float(val)


def validate_spec(spec, field: str = "u0") -> dict:
    """Return a normalized copy of ``spec`` with defaults filled in."""
    if not isinstance(spec, dict):
        raise _field_error(field, "initial data must be an object with a 'builtin' key")
    name = spec.get("builtin")
    if name not in BUILTINS:
        raise _field_error(f"{field}.builtin", f"expected one of {', '.join(BUILTINS)}, got {name!r}")
    out = {"builtin": name}
    if name == "sine":
        wn = spec.get("wavenumber", 1)
        if isinstance(wn, bool) or not isinstance(wn, int) or wn < 1:
            raise _field_error(f"{field}.wavenumber", f"must be a positive integer, got {wn!r}")
        out.update(amplitude=_number(spec, "amplitude", 1.0, field), wavenumber=wn,
                   offset=_number(spec, "offset", 0.0, field))
    elif name == "random-sine":
        modes = spec.get("modes", 8)
        if isinstance(modes, bool) or not isinstance(modes, int) or modes < 1:
            raise _field_error(f"{field}.modes", f"must be a positive integer, got {modes!r}")
        out.update(modes=modes, decay=_number(spec, "decay", 2.0, field))
    elif name == "custom-file":
        if not isinstance(spec.get("path"), str):
            raise _field_error(f"{field}.path", "custom-file data needs a 'path' string")
        out["path"] = spec["path"]
    unknown = set(spec) - set(out) - {"builtin"}
    if unknown:
        raise _field_error(field, f"unknown keys {sorted(unknown)}")
    return out


def _func(spec: dict, seed: int):
    name = spec["builtin"]
    if name == "zero":
        return lambda x: np.zeros_like(x)
    if name == "sine":
        a, w, c = spec["amplitude"], spec["wavenumber"], spec["offset"]
        return lambda x: c + a * np.sin(2 * np.pi * w * x)
    if name == "poly-x-half-minus-x":
        return lambda x: x * (0.5 - x)
    if name == "random-sine":
        rng = np.random.default_rng(seed)
        j = np.arange(1, spec["modes"] + 1)
        amps = rng.standard_normal(len(j)) / j ** spec["decay"]
        return lambda x: np.sin(2 * np.pi * np.outer(x, j)) @ amps
    raise ValueError(f"no closed form for {name}")


def interval_data(spec: dict, m: int, seed: int = 0) -> IntervalFunction:
    """Sample ``spec`` on ``x_j = j/(2m)``; custom files must have matching ``m``."""
    spec = validate_spec(spec)
    if spec["builtin"] == "custom-file":
        v = read_interval(spec["path"])
        if v.m != m:
            raise _field_error("m", f"custom file has m={v.m}, problem asks for m={m}")
        return v
    return IntervalFunction.from_callable(_func(spec, seed), m=m)


def circle_data(spec: dict, n: int, seed: int = 0) -> GridFunction:
    """Sample ``spec`` on the circle grid with ``n`` nodes.

    Closed-form data are evaluated directly; the polynomial and file data
    only live on ``[0, 1/2]`` and are extended oddly.
    """
    spec = validate_spec(spec)
    grid = make_grid(n)
    if spec["builtin"] in ("poly-x-half-minus-x", "custom-file"):
        return odd_periodic_extend(interval_data(spec, n // 2, seed))
    return GridFunction.from_callable(grid, _func(spec, seed))
