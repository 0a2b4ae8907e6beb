"""Helpers for mixing exact rationals with float fallbacks."""

from __future__ import annotations

from fractions import Fraction
from numbers import Rational

import numpy as np

REL_TOL = 1e-12


def is_exact(values) -> bool:
    return isinstance(values, np.ndarray) and values.dtype == object


def as_exact(values) -> np.ndarray:
    """Convert array-like values to an object array of ``Fraction``."""
    arr = np.asarray(values, dtype=object).ravel()
    out = np.empty(arr.shape[0], dtype=object)
    for i, v in enumerate(arr):
        out[i] = v if isinstance(v, Fraction) else Fraction(v)
    return out


def as_float(values) -> np.ndarray:
    return np.asarray(values, dtype=float)


def zeros_like(values) -> np.ndarray:
    if is_exact(values):
        out = np.empty(len(values), dtype=object)
        out[:] = Fraction(0)
        return out
    return np.zeros(len(values), dtype=float)


def is_integral(p) -> bool:
    return not isinstance(p, bool) and (
        isinstance(p, int) or (isinstance(p, Fraction) and p.denominator == 1)
    )


def power(x, p):
    """``x**p`` staying exact when ``x`` is rational and ``p`` an integer."""
    if isinstance(x, Rational) and is_integral(p):
        return Fraction(x) ** int(p)
    return float(x) ** float(p)


def abs_pow(values: np.ndarray, p) -> np.ndarray:
    """Elementwise ``|values|**p``; exact for object arrays and integer ``p``."""
    if is_exact(values) and is_integral(p):
        p = int(p)
        out = np.empty(len(values), dtype=object)
        for i, v in enumerate(values):
            out[i] = abs(v) ** p
        return out
    return np.abs(np.asarray(values, dtype=float)) ** float(p)


def le(x, y) -> bool:
    """``x <= y`` exactly for rationals, with a relative tolerance for floats."""
    if isinstance(x, Rational) and isinstance(y, Rational):
        return x <= y
    x, y = float(x), float(y)
    return x <= y + REL_TOL * max(abs(x), abs(y), 1.0)


def le_root(x, y, c, p) -> bool:
    """Decide ``x <= y * c**(1/p)`` for nonnegative ``x, y, c``.

    Exact when all three are rational and ``p`` is an integer (both sides are
    raised to the power ``p``); otherwise a float comparison.
    """
    if x <= 0:
        return True
    if all(isinstance(v, Rational) for v in (x, y, c)) and is_integral(p):
        p = int(p)
        return Fraction(x) ** p <= Fraction(y) ** p * c
    return le(float(x), float(y) * float(c) ** (1.0 / float(p)))


def to_str(x) -> str:
    """Serialize a number: rationals as ``num/den``, floats shortest round-trip."""
    if isinstance(x, bool):
        return str(x).lower()
    if isinstance(x, int):
        return str(x)
    if isinstance(x, Fraction):
        return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"
    return repr(float(x))
