"""Exterior/Clifford algebra of R^n on bitmask blades.

A blade is an int whose bit ``i`` marks the basis vector e_{i+1}.  The
Clifford product uses e_i e_i = -1 and is identified with the exterior
algebra by the symbol map, so forms and Clifford elements share storage.

Coefficients carry a trailing batch axis: exact work uses batch 1 with
gmpy2 rationals, float work uses a batch of quadrature points.
"""
from functools import lru_cache
from math import comb, factorial

import numpy as np
from gmpy2 import mpq

from . import kernels
from .scalars import FLOAT, RATIONAL, Q, convert, dtype_of, fmt, mode_of, zeros

CLIFFORD = "clifford"
WEDGE = "wedge"

_POP8 = np.array([bin(i).count("1") for i in range(256)], dtype=np.int64)


def popcount(x):
    x = np.asarray(x, dtype=np.int64)
    return _POP8[x & 255] + _POP8[(x >> 8) & 255]


def grade_of(blade):
    return bin(blade).count("1")


def blade_indices(blade):
    """1-based sorted indices of a blade."""
    return tuple(i + 1 for i in range(blade.bit_length()) if blade >> i & 1)


def blade_from_indices(idx):
    """Blade and reordering sign for an index sequence (1-based)."""
    idx = list(idx)
    if len(set(idx)) != len(idx):
        return 0, 0
    sign = 1
    for i in range(len(idx)):
        for j in range(i + 1, len(idx)):
            if idx[i] > idx[j]:
                sign = -sign
    mask = 0
    for i in idx:
        mask |= 1 << (i - 1)
    return mask, sign


def blade_name(blade):
    if blade == 0:
        return "1"
    return "e" + "".join(str(i) for i in blade_indices(blade)) if max(blade_indices(blade)) < 10 \
        else "e{" + ",".join(str(i) for i in blade_indices(blade)) + "}"


@lru_cache(maxsize=None)
def sign_tables(n):
    """(clifford, wedge) sign tables of shape (2^n, 2^n), int8."""
    N = 1 << n
    I = np.arange(N, dtype=np.int64)[:, None]
    J = np.arange(N, dtype=np.int64)[None, :]
    swaps = np.zeros((N, N), dtype=np.int64)
    for j in range(n):
        swaps += ((J >> j) & 1) * popcount(I >> (j + 1))
    reorder = 1 - 2 * (swaps & 1)
    cl = reorder * (1 - 2 * (popcount(I & J) & 1))
    wd = np.where((I & J) == 0, reorder, 0)
    return cl.astype(np.int8), wd.astype(np.int8)


@lru_cache(maxsize=8192)
def blade_table(n, ba, bb, kind):
    """Product table between blade supports ``ba`` and ``bb``.

    Returns (ia, ib, io, sign, out_blades) sorted by io.
    """
    cl, wd = sign_tables(n)
    tab = cl if kind == CLIFFORD else wd
    A = np.asarray(ba, dtype=np.int64)
    Bm = np.asarray(bb, dtype=np.int64)
    ia = np.repeat(np.arange(len(A)), len(Bm))
    ib = np.tile(np.arange(len(Bm)), len(A))
    s = tab[A[ia], Bm[ib]].astype(np.float64)
    keep = s != 0
    ia, ib, s = ia[keep], ib[keep], s[keep]
    out = A[ia] ^ Bm[ib]
    out_blades = tuple(int(b) for b in np.unique(out))
    io = np.searchsorted(np.asarray(out_blades, dtype=np.int64), out)
    order = np.argsort(io, kind="stable")
    return (ia[order].astype(np.intp), ib[order].astype(np.intp),
            io[order].astype(np.intp), s[order], out_blades)


def _union(ba, bb):
    return tuple(sorted(set(ba) | set(bb)))


def _scatter(coeffs, blades, target, mode):
    """Embed rows indexed by ``blades`` into support ``target``."""
    if blades == target:
        return coeffs
    out = zeros((len(target),) + coeffs.shape[1:], mode)
    pos = {b: i for i, b in enumerate(target)}
    idx = [pos[b] for b in blades]
    out[idx] = coeffs
    return out


class Multivector:
    """Element of Lambda(R^n) = Cl(R^n) with batched coefficients."""

    __slots__ = ("n", "blades", "coeffs")

    def __init__(self, n, blades, coeffs):
        self.n = n
        self.blades = tuple(blades)
        self.coeffs = coeffs

    # construction ----------------------------------------------------
    @classmethod
    def zero(cls, n, batch=1, mode=RATIONAL):
        return cls(n, (), zeros((0, batch), mode))

    @classmethod
    def scalar(cls, n, value, batch=1, mode=RATIONAL):
        c = zeros((1, batch), mode)
        c[0, :] = convert(value, mode) if not isinstance(value, np.ndarray) else value
        return cls(n, (0,), c)

    @classmethod
    def basis(cls, n, *idx, mode=RATIONAL, batch=1):
        """Blade e_{i1} ... e_{ik} (Clifford product of 1-based indices)."""
        mask, sign = blade_from_indices(idx)
        if sign == 0:
            raise ValueError("repeated index in blade specification")
        c = zeros((1, batch), mode)
        c[0, :] = convert(sign, mode)
        return cls(n, (mask,), c)

    @classmethod
    def from_dict(cls, n, terms, mode=RATIONAL, batch=1):
        """``terms`` maps index tuples (1-based, any order) or masks to values."""
        acc = {}
        for key, val in terms.items():
            if isinstance(key, (int, np.integer)):
                mask, sign = int(key), 1
            else:
                mask, sign = blade_from_indices(key)
                if sign == 0:
                    continue
            if mask >> n:
                raise ValueError(f"blade index out of range for n={n}")
            v = convert(val, mode) if not isinstance(val, np.ndarray) else val
            acc[mask] = acc.get(mask, 0) + sign * v
        blades = tuple(sorted(acc))
        c = zeros((len(blades), batch), mode)
        for i, b in enumerate(blades):
            c[i, :] = acc[b]
        return cls(n, blades, c).pruned()

    @classmethod
    def vector(cls, n, values, mode=RATIONAL, batch=1):
        return cls.from_dict(n, {(i + 1,): v for i, v in enumerate(values)}, mode, batch)

    # basic properties --------------------------------------------------
    @property
    def mode(self):
        return mode_of(self.coeffs)

    @property
    def batch(self):
        return self.coeffs.shape[1]

    def pruned(self):
        if not self.blades:
            return self
        keep = kernels.rows_nonzero(self.coeffs)
        if keep.all():
            return self
        blades = tuple(b for b, k in zip(self.blades, keep) if k)
        return Multivector(self.n, blades, self.coeffs[keep])

    def coeff(self, key):
        """Coefficient array (batch,) of a blade given as mask or index tuple."""
        if isinstance(key, (int, np.integer)):
            mask, sign = int(key), 1
        else:
            mask, sign = blade_from_indices(key)
        if sign == 0 or mask not in self.blades:
            return zeros((self.batch,), self.mode)
        c = self.coeffs[self.blades.index(mask)]
        return c if sign == 1 else -c

    def as_dict(self, b=0):
        return {blade_indices(bl): self.coeffs[i, b] for i, bl in enumerate(self.blades)
                if self.coeffs[i, b] != 0}

    def grade(self, k):
        keep = [i for i, b in enumerate(self.blades) if grade_of(b) == k]
        return Multivector(self.n, [self.blades[i] for i in keep], self.coeffs[keep])

    def grades(self, pred):
        keep = [i for i, b in enumerate(self.blades) if pred(grade_of(b))]
        return Multivector(self.n, [self.blades[i] for i in keep], self.coeffs[keep])

    def grade_set(self):
        return sorted({grade_of(b) for b in self.pruned().blades})

    def is_zero(self):
        return not np.any(self.coeffs != 0)

    def __eq__(self, other):
        if isinstance(other, (int, Q(0).__class__)) and not isinstance(other, Multivector):
            other = Multivector.scalar(self.n, other, self.batch, self.mode)
        if not isinstance(other, Multivector):
            return NotImplemented
        return (self - other).is_zero()

    __hash__ = None

    # linear structure --------------------------------------------------
    def _binary_linear(self, other, sub):
        if self.n != other.n:
            raise ValueError(f"dimension mismatch {self.n} vs {other.n}")
        mode = self.mode
        blades = _union(self.blades, other.blades)
        a = _scatter(self.coeffs, self.blades, blades, mode)
        b = _scatter(other.coeffs, other.blades, blades, mode)
        return Multivector(self.n, blades, a - b if sub else a + b)

    def __add__(self, other):
        if not isinstance(other, Multivector):
            other = Multivector.scalar(self.n, other, self.batch, self.mode)
        return self._binary_linear(other, False)

    __radd__ = __add__

    def __sub__(self, other):
        if not isinstance(other, Multivector):
            other = Multivector.scalar(self.n, other, self.batch, self.mode)
        return self._binary_linear(other, True)

    def __rsub__(self, other):
        return (-self) + other

    def __neg__(self):
        return Multivector(self.n, self.blades, -self.coeffs)

    def scale(self, s):
        """Multiply by a scalar or a batch array of shape (batch,)."""
        if isinstance(s, np.ndarray):
            return Multivector(self.n, self.blades, self.coeffs * s[None, :])
        return Multivector(self.n, self.blades, self.coeffs * convert(s, self.mode))

    def __mul__(self, other):
        if isinstance(other, Multivector):
            return clifford(self, other)
        return self.scale(other)

    def __rmul__(self, other):
        return self.scale(other)

    def __xor__(self, other):
        return wedge(self, other)

    def __repr__(self):
        if self.is_zero():
            return "0"
        parts = []
        for i, b in enumerate(self.blades):
            c = self.coeffs[i, 0] if self.batch == 1 else self.coeffs[i]
            parts.append(f"{fmt(c) if self.batch == 1 else c}*{blade_name(b)}")
        return " + ".join(parts)


def _product(a, b, kind):
    if a.n != b.n:
        raise ValueError(f"dimension mismatch {a.n} vs {b.n}")
    ia, ib, io, sign, out_blades = blade_table(a.n, a.blades, b.blades, kind)
    out = zeros((len(out_blades), max(a.batch, b.batch)), a.mode)
    kernels.bilinear(a.coeffs, b.coeffs, ia, ib, io, sign, out)
    return Multivector(a.n, out_blades, out)


def clifford(a, b):
    """Clifford product with e_i e_i = -1."""
    return _product(a, b, CLIFFORD)


def wedge(a, b):
    return _product(a, b, WEDGE)


def contract(v, a):
    """Interior product iota(v) a for a grade-1 element v."""
    if v.n != a.n:
        raise ValueError("dimension mismatch")
    if any(grade_of(bl) != 1 for bl in v.pruned().blades):
        raise ValueError("contraction requires a grade-1 multivector")
    out = Multivector.zero(a.n, a.batch, a.mode)
    for i, vb in enumerate(v.blades):
        k = vb.bit_length() - 1
        out = out + contract_basis(k + 1, a).scale(v.coeffs[i])
    return out


def contract_basis(k, a):
    """iota(e_k) a, k 1-based."""
    bit = 1 << (k - 1)
    rows, blades, signs = [], [], []
    for i, b in enumerate(a.blades):
        if b & bit:
            below = grade_of(b & (bit - 1))
            rows.append(i)
            blades.append(b ^ bit)
            signs.append(-1 if below & 1 else 1)
    if not rows:
        return Multivector.zero(a.n, a.batch, a.mode)
    c = a.coeffs[rows]
    neg = np.array(signs) < 0
    if neg.any():
        c = c.copy()
        c[neg] = -c[neg]
    order = np.argsort(blades, kind="stable")
    return Multivector(a.n, tuple(blades[j] for j in order), c[order])


def berezin(a):
    """Coefficient of e_1...e_n, shape (batch,)."""
    return a.coeff((1 << a.n) - 1)


def supertrace(a):
    """Pointwise supertrace (-2i)^{n/2} * berezin(a) as a (real, imag) pair."""
    if a.n % 2:
        raise ValueError("supertrace needs even n")
    m = a.n // 2
    mag = 2 ** m
    # (-i)^m
    unit = [(1, 0), (0, -1), (-1, 0), (0, 1)][m % 4]
    top = berezin(a)
    return (top * (unit[0] * mag), top * (unit[1] * mag))


def supertrace_factor(n):
    """(-2i)^{n/2} as (real, imag) ints."""
    m = n // 2
    unit = [(1, 0), (0, -1), (-1, 0), (0, 1)][m % 4]
    return unit[0] * 2 ** m, unit[1] * 2 ** m


# ---------------------------------------------------------------------------
# matrices of forms

class FormMatrix:
    """n x n matrix of Multivectors; entry [a][b] = g(A e_a, e_b)."""

    __slots__ = ("n", "entries")

    def __init__(self, entries):
        self.entries = [list(row) for row in entries]
        self.n = len(self.entries)

    @classmethod
    def zero(cls, n, batch=1, mode=RATIONAL):
        return cls([[Multivector.zero(n, batch, mode) for _ in range(n)] for _ in range(n)])

    def __getitem__(self, ij):
        i, j = ij
        return self.entries[i][j]

    def map(self, fn):
        return FormMatrix([[fn(x) for x in row] for row in self.entries])

    def __add__(self, other):
        return FormMatrix([[x + y for x, y in zip(r, s)] for r, s in zip(self.entries, other.entries)])

    def __sub__(self, other):
        return FormMatrix([[x - y for x, y in zip(r, s)] for r, s in zip(self.entries, other.entries)])

    def __neg__(self):
        return self.map(lambda x: -x)

    def scale(self, s):
        return self.map(lambda x: x.scale(s))

    def __matmul__(self, other):
        """Matrix product with wedge-multiplied entries."""
        n = self.n
        out = []
        for i in range(n):
            row = []
            for j in range(n):
                acc = None
                for k in range(n):
                    a, b = self.entries[i][k], other.entries[k][j]
                    if not a.blades or not b.blades:
                        continue
                    t = wedge(a, b)
                    acc = t if acc is None else acc + t
                if acc is None:
                    acc = Multivector.zero(self.entries[i][j].n, self.entries[i][j].batch,
                                           self.entries[i][j].mode)
                row.append(acc)
            out.append(row)
        return FormMatrix(out)

    def trace(self):
        acc = self.entries[0][0]
        for i in range(1, self.n):
            acc = acc + self.entries[i][i]
        return acc

    def transpose(self):
        return FormMatrix([[self.entries[j][i] for j in range(self.n)] for i in range(self.n)])

    def is_antisymmetric(self):
        return all((self.entries[i][j] + self.entries[j][i]).is_zero()
                   for i in range(self.n) for j in range(i, self.n))

    def __eq__(self, other):
        return all(x == y for r, s in zip(self.entries, other.entries) for x, y in zip(r, s))

    __hash__ = None

    def __repr__(self):
        return "FormMatrix(" + repr(self.entries) + ")"


def pair_coefficient(A, a, b, c, d):
    """A_{ab,cd}: coefficient of e_c ^ e_d in entry (a, b) (0-based indices)."""
    if c == d:
        return None
    mask, sign = blade_from_indices((c + 1, d + 1))
    v = A.entries[a][b].coeff(mask)
    return v if sign == 1 else -v


def transpose_top(A):
    """Swap the index pairs of a 2-form valued matrix: (A^T)_{ab,cd} = A_{cd,ab}."""
    n = A.n
    e0 = A.entries[0][0]
    out = []
    for a in range(n):
        row = []
        for b in range(n):
            terms = {}
            if a != b:
                for c in range(n):
                    for d in range(c + 1, n):
                        v = pair_coefficient(A, c, d, a, b)
                        if np.any(v != 0):
                            terms[(c + 1, d + 1)] = v
            row.append(Multivector.from_dict(e0.n, terms, e0.mode, e0.batch))
        out.append(row)
    return FormMatrix(out)


def o_flat(A):
    """Matrix with g(A_o(X..) e_a, e_b) = 2 A(X.., e_a, e_b), i.e. 2 iota(e_b) iota(e_a) A."""
    n = A.n
    out = []
    for a in range(n):
        row = []
        for b in range(n):
            row.append(contract_basis(b + 1, contract_basis(a + 1, A)).scale(2))
        out.append(row)
    return FormMatrix(out)


def spin_lift(A):
    """Clifford element tau(A) = 1/4 sum_{a,b} A_ab e_a e_b of a scalar o(n) matrix.

    With A_ab = g(A e_a, e_b) this satisfies [tau(A), c(v)] = c(A v).
    """
    n = A.n
    e0 = A.entries[0][0]
    q = Q(1, 4) if e0.mode == RATIONAL else 0.25
    terms = {}
    for a in range(n):
        for b in range(a + 1, n):
            # e_a e_b = -e_b e_a for a != b
            terms[(a + 1, b + 1)] = (A.entries[a][b].coeff(0) - A.entries[b][a].coeff(0)) * q
    return Multivector.from_dict(e0.n, terms, e0.mode, e0.batch)


# ---------------------------------------------------------------------------
# A-hat form

@lru_cache(maxsize=None)
def bernoulli(m):
    """Bernoulli number B_m (B_1 = -1/2) as an exact rational."""
    B = [mpq(1)]
    for k in range(1, m + 1):
        B.append(-sum(comb(k + 1, j) * B[j] for j in range(k)) / mpq(k + 1))
    return B[m]


def ahat_log_coefficient(k):
    """Coefficient of z^{2k} in log((z/2)/sinh(z/2))."""
    return -bernoulli(2 * k) / (2 * k * factorial(2 * k))


def _top_limited(x, deg):
    return x.grades(lambda g: g <= deg)


def ahat_form(X, top_degree=None):
    """det^{1/2}((X/2)/sinh(X/2)) for a matrix of 2-forms, up to form degree ``top_degree``."""
    n = X.n
    e0 = X.entries[0][0]
    dim = e0.n
    mode, batch = e0.mode, e0.batch
    top = dim if top_degree is None else top_degree
    for row in X.entries:
        for x in row:
            if any(g % 2 for g in x.grade_set()):
                raise ValueError("ahat_form needs even-degree entries")
    one = Multivector.scalar(dim, 1, batch, mode)
    # half trace of the log series
    L = Multivector.zero(dim, batch, mode)
    P = X @ X
    k = 1
    while 4 * k <= top:
        c = ahat_log_coefficient(k) / 2
        L = L + P.trace().scale(c if mode == RATIONAL else float(c))
        k += 1
        if 4 * k <= top:
            P = (P @ X) @ X
    L = _top_limited(L, top)
    # exp in the commutative even subalgebra
    out, term = one, one
    m = 1
    while 4 * m <= top:
        term = _top_limited(wedge(term, L), top).scale(Q(1, m) if mode == RATIONAL else 1.0 / m)
        out = out + term
        m += 1
    return out.pruned()
