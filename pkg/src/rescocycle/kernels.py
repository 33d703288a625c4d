"""Backend selection for the hot contraction kernels.

The compiled extension is used for float64 data when it is importable;
exact (object dtype) data always goes through numpy.  Set
``RESCOCYCLE_PURE=1`` to force the numpy path.
"""
import os

import numpy as np

from . import _kernels_py

try:
    if os.environ.get("RESCOCYCLE_PURE", "") not in ("", "0"):
        raise ImportError("pure backend forced")
    from . import _ckernels
    BACKEND = "cython"
except ImportError:
    _ckernels = None
    BACKEND = "numpy"


def bilinear(a, b, ia, ib, io, sign, out):
    """Accumulate ``sign[t] * a[ia[t]] * b[ib[t]]`` into ``out[io[t]]``.

    Arrays ``a``, ``b``, ``out`` are 2-d with a shared trailing batch axis.
    ``sign`` is float64 (values may be any real weight); ``io`` sorted.
    """
    if _ckernels is not None and out.dtype == np.float64:
        _ckernels.bilinear_f64(np.ascontiguousarray(a), np.ascontiguousarray(b),
                               ia, ib, io, sign, out)
        return out
    return _kernels_py.bilinear(a, b, ia, ib, io, sign, out)


def rows_nonzero(a):
    """Mask of rows of a 2-d array that are not identically zero."""
    if _ckernels is not None and a.dtype == np.float64:
        return _ckernels.gather_rows_nonzero(np.ascontiguousarray(a))
    return _kernels_py.rows_nonzero(a)
