"""Coefficient fields: exact rationals (gmpy2.mpq in object arrays) or float64."""
from fractions import Fraction

import numpy as np
from gmpy2 import mpq

RATIONAL = "rational"
FLOAT = "float"
MODES = (RATIONAL, FLOAT)


def Q(x, den=None):
    """Exact rational from int, str ('3/4', '0.25'), Fraction or mpq."""
    if den is not None:
        return mpq(int(x), int(den))
    if isinstance(x, str):
        x = x.strip()
        if "/" in x:
            return mpq(x)
        return mpq(Fraction(x))
    if isinstance(x, (float, np.floating)):
        return mpq(Fraction(float(x)))
    if isinstance(x, Fraction):
        return mpq(x.numerator, x.denominator)
    return mpq(x)


def check_mode(mode):
    if mode not in MODES:
        raise ValueError(f"unknown scalar mode {mode!r}")
    return mode


def dtype_of(mode):
    return object if check_mode(mode) == RATIONAL else np.float64


def mode_of(arr):
    return RATIONAL if arr.dtype == object else FLOAT


def zeros(shape, mode):
    if mode == RATIONAL:
        out = np.empty(shape, dtype=object)
        out.fill(mpq(0))
        return out
    return np.zeros(shape, dtype=np.float64)


def convert(value, mode):
    """Convert a Python scalar or array to the coefficient field of ``mode``."""
    if mode == RATIONAL:
        if isinstance(value, np.ndarray):
            if value.dtype == object:
                return np.vectorize(Q, otypes=[object])(value) if value.size else value.copy()
            if value.dtype.kind == "f":
                raise TypeError("refusing to convert float data to exact rationals")
            return np.vectorize(Q, otypes=[object])(value) if value.size else value.astype(object)
        if isinstance(value, (float, np.floating)):
            raise TypeError("refusing to convert a float to an exact rational")
        return Q(value)
    if isinstance(value, np.ndarray):
        return value.astype(np.float64)
    return float(value)


def to_float(x):
    if isinstance(x, np.ndarray):
        return x.astype(np.float64)
    return float(x)


def fmt(x):
    """Canonical text for a scalar: 'p/q' for rationals, repr for floats."""
    if isinstance(x, type(mpq(0))):
        return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"
    if isinstance(x, Fraction):
        return str(x)
    return repr(float(x))


def is_zero_array(a):
    return not np.any(a != 0)
