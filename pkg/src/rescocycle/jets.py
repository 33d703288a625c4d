"""Truncated multivariate Taylor polynomials with scalar or multivector values.

Monomials are stored densely in graded lexicographic order, so the jet of
order K is a prefix of the jet of order K+1 and truncation is slicing.
Coefficient arrays have shape (nmono, nblades, batch).
"""
from functools import lru_cache
from math import comb, factorial

import numpy as np
from gmpy2 import mpq

from . import kernels
from .multivector import CLIFFORD, WEDGE, Multivector, blade_table, _union
from .scalars import FLOAT, RATIONAL, Q, convert, mode_of, zeros


def nmono(n, K):
    return comb(n + K, n) if K >= 0 else 0


@lru_cache(maxsize=None)
def monomials(n, K):
    """Exponent array (nmono, n) in graded lexicographic order."""
    out = []

    def rec(prefix, left, slots):
        if slots == 1:
            out.append(prefix + (left,))
            return
        for e in range(left, -1, -1):
            rec(prefix + (e,), left - e, slots - 1)

    for d in range(K + 1):
        rec((), d, n)
    arr = np.array(out, dtype=np.int64).reshape(-1, n)
    arr.setflags(write=False)
    return arr


@lru_cache(maxsize=None)
def degrees(n, K):
    d = monomials(n, K).sum(axis=1)
    d.setflags(write=False)
    return d


@lru_cache(maxsize=None)
def mono_index(n, K):
    return {tuple(int(v) for v in row): i for i, row in enumerate(monomials(n, K))}


def _keys(expo, K):
    base = K + 1
    w = base ** np.arange(expo.shape[1], dtype=np.int64)
    return expo @ w


@lru_cache(maxsize=None)
def _key_lookup(n, K):
    keys = _keys(monomials(n, K), K)
    order = np.argsort(keys)
    return keys[order], order


@lru_cache(maxsize=256)
def mono_table(n, K):
    """Pairs (i, j) of monomials with deg_i + deg_j <= K and the product index."""
    M = monomials(n, K)
    deg = degrees(n, K)
    off = [nmono(n, d - 1) for d in range(K + 2)]
    ia, ib = [], []
    for da in range(K + 1):
        for db in range(K + 1 - da):
            a = np.arange(off[da], off[da + 1])
            b = np.arange(off[db], off[db + 1])
            ia.append(np.repeat(a, len(b)))
            ib.append(np.tile(b, len(a)))
    ia = np.concatenate(ia)
    ib = np.concatenate(ib)
    keys, order = _key_lookup(n, K)
    prod = _keys(M[ia] + M[ib], K)
    io = order[np.searchsorted(keys, prod)]
    srt = np.argsort(io, kind="stable")
    return ia[srt].astype(np.intp), ib[srt].astype(np.intp), io[srt].astype(np.intp)


@lru_cache(maxsize=256)
def jet_table(n, K, ba, bb, kind):
    """Combined (monomial x blade) product table for flattened coefficient rows."""
    ma, mb, mo = mono_table(n, K)
    bia, bib, bio, bs, out_blades = blade_table(n, ba, bb, kind)
    nba, nbb, nbo = len(ba), len(bb), len(out_blades)
    ra = (ma[:, None] * nba + bia[None, :]).ravel()
    rb = (mb[:, None] * nbb + bib[None, :]).ravel()
    ro = (mo[:, None] * nbo + bio[None, :]).ravel()
    sg = np.broadcast_to(bs[None, :], (len(ma), len(bs))).ravel()
    srt = np.argsort(ro, kind="stable")
    return (ra[srt].astype(np.intp), rb[srt].astype(np.intp), ro[srt].astype(np.intp),
            np.ascontiguousarray(sg[srt]), out_blades)


@lru_cache(maxsize=None)
def deriv_table(n, K, i):
    """For d/dx_i on a jet of order K: source rows and integer factors (order K-1)."""
    M = monomials(n, K - 1)
    src = M.copy()
    src[:, i] += 1
    keys, order = _key_lookup(n, K)
    idx = order[np.searchsorted(keys, _keys(src, K))]
    return idx.astype(np.intp), (M[:, i] + 1).astype(np.int64)


@lru_cache(maxsize=None)
def xmul_table(n, K, i):
    """For multiplication by x_i of an order-K jet: target rows in order K+1."""
    src = monomials(n, K).copy()
    src[:, i] += 1
    keys, order = _key_lookup(n, K + 1)
    return order[np.searchsorted(keys, _keys(src, K + 1))].astype(np.intp)


def _degree_scale(n, K, fn, mode):
    deg = degrees(n, K)
    vals = [fn(int(d)) for d in deg]
    if mode == RATIONAL:
        arr = np.empty(len(vals), dtype=object)
        arr[:] = vals
        return arr
    return np.array([float(v) for v in vals])


class Jet:
    """Taylor polynomial of order ``order`` in ``n`` variables.

    ``blades`` is the multivector support; a scalar jet has blades (0,).
    """

    __slots__ = ("n", "order", "blades", "coeffs")

    def __init__(self, n, order, blades, coeffs):
        self.n = n
        self.order = order
        self.blades = tuple(blades)
        self.coeffs = coeffs

    # construction -----------------------------------------------------
    @classmethod
    def zero(cls, n, K, batch=1, mode=RATIONAL, blades=()):
        return cls(n, K, blades, zeros((nmono(n, K), len(blades), batch), mode))

    @classmethod
    def const(cls, n, K, value, batch=1, mode=RATIONAL):
        c = zeros((nmono(n, K), 1, batch), mode)
        c[0, 0, :] = value if isinstance(value, np.ndarray) else convert(value, mode)
        return cls(n, K, (0,), c)

    @classmethod
    def from_mv(cls, mv, K):
        c = zeros((nmono(mv.n, K), len(mv.blades), mv.batch), mv.mode)
        c[0] = mv.coeffs
        return cls(mv.n, K, mv.blades, c)

    @classmethod
    def var(cls, n, K, i, batch=1, mode=RATIONAL):
        """The coordinate x_{i+1} (0-based ``i``)."""
        c = zeros((nmono(n, K), 1, batch), mode)
        if K >= 1:
            e = [0] * n
            e[i] = 1
            c[mono_index(n, K)[tuple(e)], 0, :] = convert(1, mode)
        return cls(n, K, (0,), c)

    @classmethod
    def from_poly(cls, n, K, terms, mode=RATIONAL, batch=1):
        """Scalar jet from {exponent tuple: value}; terms above K are dropped."""
        c = zeros((nmono(n, K), 1, batch), mode)
        idx = mono_index(n, K)
        for alpha, v in terms.items():
            if sum(alpha) <= K:
                c[idx[tuple(alpha)], 0, :] += v if isinstance(v, np.ndarray) else convert(v, mode)
        return cls(n, K, (0,), c)

    @classmethod
    def from_mv_poly(cls, n, K, terms, mode=RATIONAL, batch=1):
        """Jet from {exponent tuple: Multivector}."""
        out = cls.zero(n, K, batch, mode)
        for alpha, mv in terms.items():
            if sum(alpha) <= K:
                out = out + cls.monomial(n, K, alpha, mode, batch).mul_mv(mv)
        return out

    @classmethod
    def monomial(cls, n, K, alpha, mode=RATIONAL, batch=1):
        return cls.from_poly(n, K, {tuple(alpha): 1}, mode, batch)

    # properties ---------------------------------------------------------
    @property
    def mode(self):
        return mode_of(self.coeffs)

    @property
    def batch(self):
        return self.coeffs.shape[2]

    @property
    def is_scalar(self):
        return self.blades in ((0,), ())

    def is_zero(self):
        return not np.any(self.coeffs != 0)

    def pruned(self):
        if not self.blades:
            return self
        keep = np.any(self.coeffs != 0, axis=(0, 2))
        if keep.all():
            return self
        blades = tuple(b for b, k in zip(self.blades, keep) if k)
        return Jet(self.n, self.order, blades, self.coeffs[:, keep])

    def with_blades(self, blades):
        """Re-express on a larger blade support."""
        if blades == self.blades:
            return self
        out = zeros((self.coeffs.shape[0], len(blades), self.batch), self.mode)
        pos = {b: i for i, b in enumerate(blades)}
        out[:, [pos[b] for b in self.blades]] = self.coeffs
        return Jet(self.n, self.order, blades, out)

    def truncate(self, K):
        if K > self.order:
            raise ValueError(f"cannot raise jet order {self.order} to {K}")
        if K == self.order:
            return self
        return Jet(self.n, K, self.blades, self.coeffs[:nmono(self.n, K)])

    def extend(self, K):
        """Pad with zeros up to order K; only valid when the jet is known to be polynomial."""
        if K <= self.order:
            return self.truncate(K)
        c = zeros((nmono(self.n, K), len(self.blades), self.batch), self.mode)
        c[:self.coeffs.shape[0]] = self.coeffs
        return Jet(self.n, K, self.blades, c)

    def value(self):
        """Multivector at the origin."""
        return Multivector(self.n, self.blades, self.coeffs[0].copy()).pruned()

    eval_at_origin = value

    def scalar_part_array(self):
        """Coefficients (nmono, batch) of the grade-0 blade."""
        if 0 in self.blades:
            return self.coeffs[:, self.blades.index(0), :]
        return zeros((self.coeffs.shape[0], self.batch), self.mode)

    def component(self, blade):
        """Scalar jet of a single blade coefficient."""
        if blade in self.blades:
            c = self.coeffs[:, self.blades.index(blade):self.blades.index(blade) + 1, :]
        else:
            c = zeros((self.coeffs.shape[0], 1, self.batch), self.mode)
        return Jet(self.n, self.order, (0,), c)

    def coefficient(self, alpha):
        """Multivector coefficient of x^alpha."""
        i = mono_index(self.n, self.order)[tuple(alpha)]
        return Multivector(self.n, self.blades, self.coeffs[i].copy()).pruned()

    def grades(self, pred):
        from .multivector import grade_of
        keep = [i for i, b in enumerate(self.blades) if pred(grade_of(b))]
        return Jet(self.n, self.order, [self.blades[i] for i in keep], self.coeffs[:, keep])

    def take_batch(self, idx):
        return Jet(self.n, self.order, self.blades, self.coeffs[:, :, idx])

    # linear structure -----------------------------------------------------
    def _lin(self, other, sub):
        if self.n != other.n:
            raise ValueError("variable count mismatch")
        K = min(self.order, other.order)
        a, b = self.truncate(K), other.truncate(K)
        blades = _union(a.blades, b.blades)
        a, b = a.with_blades(blades), b.with_blades(blades)
        return Jet(self.n, K, blades, a.coeffs - b.coeffs if sub else a.coeffs + b.coeffs)

    def _coerce(self, other):
        if isinstance(other, Jet):
            return other
        if isinstance(other, Multivector):
            return Jet.from_mv(other, self.order)
        return Jet.const(self.n, self.order, other, self.batch, self.mode)

    def __add__(self, other):
        return self._lin(self._coerce(other), False)

    __radd__ = __add__

    def __sub__(self, other):
        return self._lin(self._coerce(other), True)

    def __rsub__(self, other):
        return self._coerce(other)._lin(self, True)

    def __neg__(self):
        return Jet(self.n, self.order, self.blades, -self.coeffs)

    def scale(self, s):
        if isinstance(s, np.ndarray):
            return Jet(self.n, self.order, self.blades, self.coeffs * s[None, None, :])
        return Jet(self.n, self.order, self.blades, self.coeffs * convert(s, self.mode))

    def __mul__(self, other):
        if isinstance(other, Jet):
            return jet_mul(self, other)
        if isinstance(other, Multivector):
            return self.mul_mv(other)
        return self.scale(other)

    def __rmul__(self, other):
        if isinstance(other, Multivector):
            return Jet.from_mv(other, self.order) * self
        return self.scale(other)

    def mul_mv(self, mv, kind=CLIFFORD):
        return jet_mul(self, Jet.from_mv(mv, self.order), kind)

    def __repr__(self):
        return f"Jet(n={self.n}, K={self.order}, blades={self.blades}, batch={self.batch})"

    # calculus ---------------------------------------------------------------
    def deriv(self, i):
        """d/dx_{i+1}; order drops by one."""
        if self.order == 0:
            raise ValueError("cannot differentiate an order-0 jet")
        src, fac = deriv_table(self.n, self.order, i)
        return Jet(self.n, self.order - 1, self.blades, self.coeffs[src] * fac[:, None, None])

    def deriv_multi(self, beta):
        out = self
        for i, b in enumerate(beta):
            for _ in range(b):
                out = out.deriv(i)
        return out

    def xmul(self, i):
        """Multiply by x_{i+1}; the result is known to order K+1."""
        c = zeros((nmono(self.n, self.order + 1), len(self.blades), self.batch), self.mode)
        c[xmul_table(self.n, self.order, i)] = self.coeffs
        return Jet(self.n, self.order + 1, self.blades, c)

    def degree_scale(self, fn):
        s = _degree_scale(self.n, self.order, fn, self.mode)
        return Jet(self.n, self.order, self.blades, self.coeffs * s[:, None, None])

    def homogeneous(self, d):
        lo, hi = nmono(self.n, d - 1), nmono(self.n, d)
        c = zeros(self.coeffs.shape, self.mode)
        c[lo:hi] = self.coeffs[lo:hi]
        return Jet(self.n, self.order, self.blades, c)

    def without_constant(self):
        c = self.coeffs.copy()
        c[0] = 0 if self.mode == FLOAT else mpq(0)
        return Jet(self.n, self.order, self.blades, c)


def jet_mul(a, b, kind=CLIFFORD):
    """Truncated product; multivector coefficients multiply by ``kind``."""
    if a.n != b.n:
        raise ValueError("variable count mismatch")
    K = min(a.order, b.order)
    n = a.n
    m = nmono(n, K)
    batch = max(a.batch, b.batch)
    if not a.blades or not b.blades:
        return Jet.zero(n, K, batch, a.mode)
    ra, rb, ro, sg, out_blades = jet_table(n, K, a.blades, b.blades, kind)
    A = a.coeffs[:m].reshape(m * len(a.blades), a.batch)
    B = b.coeffs[:m].reshape(m * len(b.blades), b.batch)
    if a.batch != batch:
        A = np.repeat(A, batch, axis=1)
    if b.batch != batch:
        B = np.repeat(B, batch, axis=1)
    out = zeros((m * len(out_blades), batch), a.mode)
    za = kernels.rows_nonzero(A)
    zb = kernels.rows_nonzero(B)
    if not (za.all() and zb.all()):
        keep = za[ra] & zb[rb]
        ra, rb, ro, sg = ra[keep], rb[keep], ro[keep], sg[keep]
    kernels.bilinear(A, B, ra, rb, ro, sg, out)
    return Jet(n, K, out_blades, out.reshape(m, len(out_blades), batch))


def wedge_mul(a, b):
    return jet_mul(a, b, WEDGE)


def radial_integral(j, f):
    """f -> int_0^1 t^{j-1} f(t x) dt: monomial of degree d scaled by 1/(j+d)."""
    if j <= 0:
        raise ValueError("radial_integral needs j >= 1")
    if f.mode == RATIONAL:
        return f.degree_scale(lambda d: mpq(1, j + d))
    return f.degree_scale(lambda d: 1.0 / (j + d))


def euler_apply(f):
    """Euler operator sum x_a d/dx_a: monomial of degree d scaled by d."""
    return f.degree_scale(lambda d: d)


def inverse_euler(f, shift=0):
    """Solve (E + shift) u = f for u without constant term when shift = 0."""
    if f.mode == RATIONAL:
        return f.degree_scale(lambda d: mpq(1, d + shift) if d + shift else mpq(0))
    return f.degree_scale(lambda d: 1.0 / (d + shift) if d + shift else 0.0)


def series(h, coeffs):
    """sum_k coeffs[k] h^k for a scalar jet ``h`` without constant term (Horner)."""
    K = h.order
    cs = list(coeffs)[:K + 1]
    out = Jet.const(h.n, K, cs[-1], h.batch, h.mode)
    for c in reversed(cs[:-1]):
        out = jet_mul(out, h) + Jet.const(h.n, K, c, h.batch, h.mode)
    return out


def _num(x, mode):
    return x if mode == RATIONAL else float(x)


def constant_array(f):
    """Scalar constant term of a scalar jet, shape (batch,)."""
    return f.scalar_part_array()[0]


def jet_log(f):
    """log of a scalar jet with constant term 1."""
    _check_unit(f)
    h = f - 1
    K = f.order
    cs = [_num(mpq(0), f.mode)] + [_num(mpq((-1) ** (k + 1), k), f.mode) for k in range(1, K + 1)]
    return series(h, cs)


def jet_exp(f):
    """exp of a scalar jet; rational mode needs a zero constant term."""
    c0 = constant_array(f)
    h = f.without_constant()
    K = f.order
    out = series(h, [_num(mpq(1, factorial(k)), f.mode) for k in range(K + 1)])
    if f.mode == RATIONAL:
        if np.any(c0 != 0):
            raise ValueError("exact exp needs a zero constant term")
        return out
    return out.scale(np.exp(c0))


def _check_unit(f):
    c0 = constant_array(f)
    if f.mode == RATIONAL:
        ok = np.all(c0 == 1)
    else:
        ok = np.all(np.abs(c0 - 1.0) < 1e-12)
    if not ok:
        raise ValueError("log/pow series need a jet with constant term 1")


def jet_exp_log_pow(f, r):
    """f^r for a scalar jet with constant term 1, via exp(r log f)."""
    _check_unit(f)
    r = Q(r) if f.mode == RATIONAL else float(Q(r) if isinstance(r, str) else r)
    return jet_exp(jet_log(f).scale(r))


def jet_pow(f, r):
    """Binomial series f^r = f0^r (1 + h/f0)^r; float mode or f0 = 1."""
    c0 = constant_array(f)
    K = f.order
    if f.mode == RATIONAL:
        if np.any(c0 != 1):
            raise ValueError("exact powers need a unit constant term")
        base = 1
        h = f.without_constant()
        rr = Q(r)
    else:
        if np.any(c0 <= 0):
            raise ValueError("non-positive constant term in power series")
        h = f.without_constant().scale(1.0 / c0)
        rr = float(r)
    cs, c = [], (mpq(1) if f.mode == RATIONAL else 1.0)
    for k in range(K + 1):
        cs.append(c)
        c = c * (rr - k) / (k + 1)
    out = series(h, cs)
    if f.mode == FLOAT:
        out = out.scale(c0 ** rr)
    return out


def jet_inv(f):
    """1/f for a scalar jet with invertible constant term."""
    c0 = constant_array(f)
    if np.any(c0 == 0):
        raise ZeroDivisionError("jet with zero constant term is not invertible")
    inv0 = (np.array([1 / x for x in c0], dtype=object) if f.mode == RATIONAL else 1.0 / c0)
    h = f.without_constant().scale(inv0)
    K = f.order
    one = mpq(1) if f.mode == RATIONAL else 1.0
    out = series(-h, [one] * (K + 1))
    return out.scale(inv0)


class PowerTable:
    """Powers F^alpha (|alpha| <= K) of coordinate jets F without constant term.

    ``P[alpha, beta]`` is the coefficient of v^beta in F(v)^alpha.
    """

    __slots__ = ("P", "n_in", "n_out", "order")

    def __init__(self, F, K=None):
        self.n_in = len(F)
        self.n_out = F[0].n
        if K is None:
            K = min(f.order for f in F)
        self.order = K
        F = [f.truncate(K) for f in F]
        for f in F:
            if np.any(f.scalar_part_array()[0] != 0):
                raise ValueError("composition needs coordinate jets without constant term")
        M = monomials(self.n_in, K)
        idx = mono_index(self.n_in, K)
        batch = max(f.batch for f in F)
        mode = F[0].mode
        P = zeros((len(M), nmono(self.n_out, K), batch), mode)
        powers = [None] * len(M)
        powers[0] = Jet.const(self.n_out, K, 1, batch, mode)
        for r in range(1, len(M)):
            alpha = M[r]
            i = int(np.flatnonzero(alpha)[0])
            prev = alpha.copy()
            prev[i] -= 1
            powers[r] = jet_mul(powers[idx[tuple(int(v) for v in prev)]], F[i])
        for r, pw in enumerate(powers):
            P[r] = pw.scalar_part_array()
        self.P = P

    def take_batch(self, idx):
        out = object.__new__(PowerTable)
        out.n_in, out.n_out, out.order = self.n_in, self.n_out, self.order
        out.P = self.P[:, :, idx]
        return out

    def apply(self, f):
        """f(F(v)) to order min(f.order, table order)."""
        if f.n != self.n_in:
            raise ValueError("variable count mismatch in composition")
        K = min(f.order, self.order)
        m_in, m_out = nmono(self.n_in, K), nmono(self.n_out, K)
        fc = f.coeffs[:m_in]
        Pc = self.P[:m_in, :m_out]
        if f.mode == RATIONAL or (fc.shape[2] == 1 and Pc.shape[2] == 1):
            out = np.tensordot(Pc[:, :, 0], fc[:, :, 0], axes=(0, 0))[:, :, None]
        else:
            out = np.einsum("amz,abz->mbz", Pc, fc, optimize=True)
        return Jet(self.n_out, K, f.blades, np.ascontiguousarray(out))


def compose(f, F):
    """f(F(v)) for coordinate jets F without constant term."""
    return PowerTable(F).apply(f)
