"""Pure numpy implementations of the bilinear kernels.

These work for float64 and for object arrays holding exact rationals.
"""
import numpy as np

# elements of the temporary product buffer per chunk
_CHUNK = 1 << 21


def bilinear(a, b, ia, ib, io, sign, out):
    """out[io[t], :] += sign[t] * a[ia[t], :] * b[ib[t], :]

    ``io`` must be sorted ascending.
    """
    nt = len(ia)
    if nt == 0:
        return out
    nb = a.shape[1]
    step = max(1, _CHUNK // max(nb, 1))
    exact = a.dtype == object
    for s in range(0, nt, step):
        e = min(nt, s + step)
        prod = a[ia[s:e]] * b[ib[s:e]]
        sg = sign[s:e]
        if exact:
            neg = sg < 0
            if neg.any():
                prod[neg] = -prod[neg]
        else:
            prod *= sg[:, None]
        idx = io[s:e]
        starts = np.flatnonzero(np.r_[True, idx[1:] != idx[:-1]])
        out[idx[starts]] += np.add.reduceat(prod, starts, axis=0)
    return out


def rows_nonzero(a):
    return np.any(a != 0, axis=1)
