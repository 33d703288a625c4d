"""s-fibred differential operators with Clifford-valued jet coefficients.

An operator is a finite sum  C(x) d^beta t^m  with C a Jet, beta a
multi-index and m an integer power of the formal heat-time variable t.
Coefficients multiply from the left by Clifford product.  All
coefficients share one truncation order; composition computes the order
it can certify and truncates to it.
"""
from functools import lru_cache
from itertools import product
from math import comb

import numpy as np
from gmpy2 import mpq

from .jets import Jet, jet_mul, nmono, wedge_mul
from .multivector import Multivector, grade_of
from .scalars import FLOAT, RATIONAL, convert


class TruncationError(ValueError):
    pass


def _zero_beta(n):
    return (0,) * n


def _beta_add(a, b):
    return tuple(x + y for x, y in zip(a, b))


def _beta_sub(a, b):
    return tuple(x - y for x, y in zip(a, b))


def _sub_multi(beta):
    """All delta <= beta with the product of binomials."""
    for d in product(*[range(b + 1) for b in beta]):
        c = 1
        for bi, di in zip(beta, d):
            c *= comb(bi, di)
        yield d, c


class SFibredOp:
    """Sum of terms C_{beta,m}(x) d^beta t^m."""

    __slots__ = ("n", "order", "terms", "mode", "batch")

    def __init__(self, n, order, terms, mode=RATIONAL, batch=1):
        self.n = n
        self.order = order
        self.mode = mode
        self.terms = {}
        b = batch
        for key, c in terms.items():
            if c.order < order:
                raise TruncationError("coefficient order below operator order")
            self.terms[key] = c.truncate(order) if c.order > order else c
            b = max(b, c.batch)
        self.batch = b

    # construction -------------------------------------------------------
    @classmethod
    def zero(cls, n, K, mode=RATIONAL, batch=1):
        return cls(n, K, {}, mode, batch)

    @classmethod
    def mult(cls, f, m=0):
        """Multiplication by the jet f (times t^m)."""
        return cls(f.n, f.order, {(_zero_beta(f.n), m): f}, f.mode, f.batch)

    @classmethod
    def identity(cls, n, K, mode=RATIONAL, batch=1):
        return cls.mult(Jet.const(n, K, 1, 1, mode))

    @classmethod
    def partial(cls, n, a, K, mode=RATIONAL):
        """d/dx_{a+1}."""
        beta = tuple(1 if i == a else 0 for i in range(n))
        return cls(n, K, {(beta, 0): Jet.const(n, K, 1, 1, mode)}, mode)

    @classmethod
    def euler(cls, n, K, mode=RATIONAL):
        """Euler field sum x_a d_a."""
        terms = {}
        for a in range(n):
            beta = tuple(1 if i == a else 0 for i in range(n))
            terms[(beta, 0)] = Jet.var(n, K, a, 1, mode)
        return cls(n, K, terms, mode)

    # structure ----------------------------------------------------------
    def pruned(self):
        terms = {k: c for k, c in self.terms.items() if not c.is_zero()}
        return SFibredOp(self.n, self.order, terms, self.mode, self.batch)

    @property
    def diff_order(self):
        d = [sum(b) for (b, m), c in self.terms.items() if not c.is_zero()]
        return max(d) if d else 0

    @property
    def t_powers(self):
        return sorted({m for (b, m), c in self.terms.items() if not c.is_zero()})

    def t_part(self, m):
        """Coefficient of t^m as a t-free operator."""
        terms = {(b, 0): c for (b, mm), c in self.terms.items() if mm == m}
        return SFibredOp(self.n, self.order, terms, self.mode, self.batch)

    def truncate(self, K):
        return SFibredOp(self.n, K, {k: c.truncate(K) for k, c in self.terms.items()},
                         self.mode, self.batch)

    def take_batch(self, idx):
        return SFibredOp(self.n, self.order, {k: c.take_batch(idx) for k, c in self.terms.items()},
                         self.mode, 1 if np.isscalar(idx) else len(idx))

    def is_zero(self):
        return all(c.is_zero() for c in self.terms.values())

    def coefficient(self, beta, m=0):
        c = self.terms.get((tuple(beta), m))
        if c is None:
            return Jet.zero(self.n, self.order, self.batch, self.mode, (0,))
        return c

    def __repr__(self):
        return (f"SFibredOp(n={self.n}, K={self.order}, terms={len(self.terms)}, "
                f"diff_order={self.diff_order}, t_powers={self.t_powers})")

    # linear structure ---------------------------------------------------
    def _lin(self, other, sign):
        K = min(self.order, other.order)
        terms = {k: c.truncate(K) for k, c in self.terms.items()}
        for k, c in other.terms.items():
            c = c.truncate(K)
            if sign < 0:
                c = -c
            terms[k] = terms[k] + c if k in terms else c
        return SFibredOp(self.n, K, terms, self.mode, max(self.batch, other.batch))

    def __add__(self, other):
        if not isinstance(other, SFibredOp):
            other = SFibredOp.mult(Jet._coerce(Jet.zero(self.n, self.order, 1, self.mode), other))
        return self._lin(other, 1)

    def __sub__(self, other):
        if not isinstance(other, SFibredOp):
            other = SFibredOp.mult(Jet._coerce(Jet.zero(self.n, self.order, 1, self.mode), other))
        return self._lin(other, -1)

    def __neg__(self):
        return SFibredOp(self.n, self.order, {k: -c for k, c in self.terms.items()},
                         self.mode, self.batch)

    def scale(self, s):
        return SFibredOp(self.n, self.order, {k: c.scale(s) for k, c in self.terms.items()},
                         self.mode, self.batch)

    def shift_t(self, dm):
        return SFibredOp(self.n, self.order, {(b, m + dm): c for (b, m), c in self.terms.items()},
                         self.mode, self.batch)

    def __matmul__(self, other):
        return compose(self, other)

    def __eq__(self, other):
        return (self - other).is_zero()

    __hash__ = None

    # action on jets -----------------------------------------------------
    def apply_laurent(self, f):
        """{m: jet} with sum_m t^m (T f)."""
        out = {}
        for (beta, m), c in self.terms.items():
            g = f.deriv_multi(beta) if any(beta) else f
            K = min(c.order, g.order)
            t = jet_mul(c.truncate(K), g.truncate(K))
            out[m] = out[m] + t if m in out else t
        return out

    def apply(self, f):
        parts = self.apply_laurent(f)
        if not parts:
            return Jet.zero(self.n, min(self.order, f.order - self.diff_order), f.batch, f.mode)
        if set(parts) != {0}:
            raise ValueError("operator carries powers of t; use apply_laurent")
        return parts[0]

    def vanishes_on_diagonal(self):
        """Every coefficient vanishes at the origin, so (T f)(0) = 0 for every f."""
        return all(not np.any(c.coeffs[0] != 0) for c in self.terms.values())


def compose(A, B):
    """A o B with Leibniz expansion; order min(K_A, K_B - ord(A))."""
    n = A.n
    d1 = A.diff_order
    K = min(A.order, B.order - d1)
    if K < 0:
        raise TruncationError(f"composition needs coefficient order {d1}, have {B.order}")
    terms = {}
    dcache = {}
    for (b1, m1), c1 in A.terms.items():
        if c1.is_zero():
            continue
        c1K = c1.truncate(K)
        for (b2, m2), c2 in B.terms.items():
            if c2.is_zero():
                continue
            for delta, bc in _sub_multi(b1):
                key = ((b2, m2), delta)
                dc = dcache.get(key)
                if dc is None:
                    dc = c2.deriv_multi(delta).truncate(K) if any(delta) else c2.truncate(K)
                    dcache[key] = dc
                if dc.is_zero():
                    continue
                t = jet_mul(c1K, dc)
                if bc != 1:
                    t = t.scale(bc)
                out_key = (_beta_add(_beta_sub(b1, delta), b2), m1 + m2)
                terms[out_key] = terms[out_key] + t if out_key in terms else t
    return SFibredOp(n, K, terms, A.mode, max(A.batch, B.batch))


def commutator(A, B):
    return compose(A, B) - compose(B, A)


# ---------------------------------------------------------------------------
# operators built from geometry data

def covariant_derivative(gd, b):
    """nabla_{d_b} = d_b + Omega_b on spinors in the synchronous frame."""
    n, mode = gd.n, gd.mode
    K = gd.Omega[b].order
    one = Jet.const(n, K, 1, 1, mode)
    beta = tuple(1 if i == b else 0 for i in range(n))
    return SFibredOp(n, K, {(beta, 0): one, (_zero_beta(n), 0): gd.Omega[b]}, mode, gd.batch)


def frame_covariant_derivative(gd, i):
    """nabla_{E_i} = sum_b E_i^b (d_b + Omega_b)."""
    n, mode = gd.n, gd.mode
    K = gd.Omega[0].order
    terms = {}
    zero = (_zero_beta(n), 0)
    for b in range(n):
        Eb = gd.E[b][i].truncate(K)
        beta = tuple(1 if j == b else 0 for j in range(n))
        terms[(beta, 0)] = Eb
        t = jet_mul(Eb, gd.Omega[b])
        terms[zero] = terms[zero] + t if zero in terms else t
    return SFibredOp(n, K, terms, mode, gd.batch)


def build_dirac(gd):
    """D = sum_b theta^b (d_b + Omega_b) - 2 c(B) in the synchronous frame.

    sum_i c(e_i) nabla_{e_i} equals D^LC + 3 c(B) for the connection with
    torsion, hence the -2 c(B) correction.
    """
    n, mode = gd.n, gd.mode
    K = min(gd.Omega[0].order, gd.Bfr.order)
    terms = {}
    zero = (_zero_beta(n), 0)
    acc = None
    for b in range(n):
        th = gd.theta[b].truncate(K)
        beta = tuple(1 if j == b else 0 for j in range(n))
        terms[(beta, 0)] = th
        t = jet_mul(th, gd.Omega[b].truncate(K))
        acc = t if acc is None else acc + t
    acc = acc - gd.Bfr.truncate(K).scale(2)
    terms[zero] = acc
    return SFibredOp(n, K, terms, mode, gd.batch)


def build_laplacian(gd, include_dB=True):
    """Delta = -sum_i nabla_{E_i}^2 + nabla_nu + kappa/4 + c(dB) - 2|B|^2.

    nu = sum_i nabla^LC_{E_i} E_i.  With include_dB=False the c(dB) term is
    dropped, giving Delta-bar.
    """
    n, mode = gd.n, gd.mode
    acc = None
    for i in range(n):
        Ni = frame_covariant_derivative(gd, i)
        t = compose(Ni, Ni)
        acc = t if acc is None else acc + t
    acc = -acc
    # nabla_nu
    Kn = min(gd.nu[0].order, gd.Omega[0].order)
    terms = {}
    zero = (_zero_beta(n), 0)
    for a in range(n):
        nu_a = gd.nu[a].truncate(Kn)
        beta = tuple(1 if j == a else 0 for j in range(n))
        terms[(beta, 0)] = nu_a
        t = jet_mul(nu_a, gd.Omega[a].truncate(Kn))
        terms[zero] = terms[zero] + t if zero in terms else t
    acc = acc + SFibredOp(n, Kn, terms, mode, gd.batch)
    q = mpq(1, 4) if mode == RATIONAL else 0.25
    pot = gd.kappa_jet.scale(q)
    pot = pot - gd.normB2_jet.truncate(min(pot.order, gd.normB2_jet.order)).scale(2)
    if include_dB and not gd.dBfr.is_zero():
        pot = pot + gd.dBfr
    return acc + SFibredOp.mult(pot)


def clifford_differential(gd, f):
    """c(df) = sum_a d_a f theta^a for a scalar jet f."""
    acc = None
    for a in range(gd.n):
        df = f.deriv(a)
        K = min(df.order, gd.theta[a].order)
        t = jet_mul(df.truncate(K), gd.theta[a].truncate(K))
        acc = t if acc is None else acc + t
    return acc


def ad_power(L, X, k):
    for _ in range(k):
        X = commutator(L, X)
    return X


def build_Pk(gd, a_jets, k, use_bar=False, laplacian=None):
    """a_0 ad^{k_1}(c(da_1)) ... ad^{k_p}(c(da_p)) with ad taken in Delta or Delta-bar."""
    if len(a_jets) < 2:
        raise ValueError("build_Pk needs at least a_0 and a_1")
    p = len(a_jets) - 1
    k = tuple(k)
    if len(k) != p or any(ki < 0 for ki in k):
        raise ValueError("multi-index k must have one non-negative entry per a_1..a_p")
    L = laplacian
    if L is None and any(k):
        L = build_laplacian(gd, include_dB=not use_bar)
    P = SFibredOp.mult(a_jets[0])
    for ai, ki in zip(a_jets[1:], k):
        X = SFibredOp.mult(clifford_differential(gd, ai))
        P = compose(P, ad_power(L, X, ki))
    return P


# ---------------------------------------------------------------------------
# Gaussian conjugation

@lru_cache(maxsize=512)
def _h_power(n, K, beta, mode):
    """h^{-1} d^beta h = prod_a (d_a - x_a/(2t))^{beta_a} at order K."""
    Kb = K + sum(beta)
    half = mpq(-1, 2) if mode == RATIONAL else -0.5
    op = SFibredOp.identity(n, Kb, mode)
    for a, ba in enumerate(beta):
        for _ in range(ba):
            e = tuple(1 if i == a else 0 for i in range(n))
            H = SFibredOp(n, Kb, {(e, 0): Jet.const(n, Kb, 1, 1, mode),
                                  (_zero_beta(n), -1): Jet.var(n, Kb, a, 1, mode).scale(half)},
                          mode)
            op = compose(H, op)
    return op.truncate(K)


def conjugate_by_h(T):
    """h_t^{-1} T h_t with h_t = (4 pi t)^{-n/2} exp(-x^2/4t): d_a -> d_a - x_a/(2t)."""
    n, K = T.n, T.order
    out = SFibredOp.zero(n, K, T.mode, T.batch)
    for (beta, m), c in T.terms.items():
        if c.is_zero():
            continue
        if not any(beta):
            out = out + SFibredOp.mult(c, m)
            continue
        H = _h_power(n, K, beta, T.mode)
        out = out + compose(SFibredOp.mult(c), H).shift_t(m)
    return out


def hP_components(T, k_abs=None):
    """{l: P_{k,l}} with h^{-1} P h = sum_l t^{-|k|+l} P_{k,l}."""
    C = conjugate_by_h(T)
    if k_abs is None:
        k_abs = T.diff_order
    out = {}
    for m in C.t_powers:
        l = m + k_abs
        if l < 0 or l > k_abs:
            raise ValueError(f"unexpected power t^{m} for an operator of order {k_abs}")
        out[l] = C.t_part(m)
    for l in range(k_abs + 1):
        out.setdefault(l, SFibredOp.zero(T.n, C.order, T.mode, T.batch))
    return out


# ---------------------------------------------------------------------------
# Getzler calculus

def _mono_degrees(n, K):
    from .jets import degrees
    return np.asarray(degrees(n, K))


def _weights(T):
    """(known max weight, bound on weights of truncated-away monomials)."""
    known, unknown = None, None
    for (beta, m), c in T.terms.items():
        if m != 0:
            raise ValueError("Getzler rescaling applies to t-free operators")
        if not c.blades:
            continue
        gr = np.array([grade_of(b) for b in c.blades])
        deg = _mono_degrees(T.n, c.order)
        nz = np.any(c.coeffs != 0, axis=2)
        bb = sum(beta)
        if nz.any():
            w = bb + gr[None, :] - deg[:, None]
            wmax = int(w[nz].max())
            known = wmax if known is None else max(known, wmax)
        u = bb + int(gr.max()) - (c.order + 1)
        unknown = u if unknown is None else max(unknown, u)
    return known, unknown


def getzler_order(T):
    known, unknown = _weights(T)
    if known is None:
        return None  # the zero operator
    if unknown is not None and unknown > known:
        raise TruncationError("truncation order too low to determine the Getzler order")
    return known


def getzler_rescale(T, m):
    """Getzler symbol sigma^G_m(T); raises if m is below the Getzler order."""
    known, unknown = _weights(T)
    if known is not None and m < known:
        raise ValueError(f"requested order {m} below Getzler order {known}")
    if unknown is not None and m < unknown:
        raise TruncationError(f"truncation order too low to certify Getzler order {m}")
    n = T.n
    terms = {}
    for (beta, _), c in T.terms.items():
        if not c.blades:
            continue
        bb = sum(beta)
        gr = np.array([grade_of(b) for b in c.blades])
        need = bb + int(gr.max()) - m
        if need > c.order:
            raise TruncationError("truncation order too low for the requested symbol")
        deg = _mono_degrees(n, c.order)
        keep = (bb + gr[None, :] - deg[:, None]) == m
        if not keep.any():
            continue
        coeffs = np.where(keep[:, :, None], c.coeffs, 0 if c.mode == FLOAT else mpq(0))
        if c.mode == RATIONAL:
            coeffs = coeffs.astype(object)
        poly = Jet(n, c.order, c.blades, coeffs)
        Dmax = max(int(need), 0)
        poly = poly.truncate(min(c.order, Dmax)).pruned()
        if poly.is_zero():
            continue
        terms[tuple(beta)] = poly
    return GetzlerSymbol(n, terms, T.mode, T.batch)


def _poly_degree(j):
    nz = np.any(j.coeffs != 0, axis=(1, 2))
    if not nz.any():
        return -1
    deg = _mono_degrees(j.n, j.order)
    return int(deg[nz].max())


class GetzlerSymbol:
    """Polynomial-coefficient differential operator with exterior-form values.

    terms maps a derivative multi-index to a polynomial Jet whose blades are
    read as forms; products use the wedge product.
    """

    __slots__ = ("n", "terms", "mode", "batch")

    def __init__(self, n, terms, mode=RATIONAL, batch=1):
        self.n = n
        self.mode = mode
        self.batch = batch
        self.terms = {}
        for b, j in terms.items():
            d = _poly_degree(j)
            if d < 0:
                continue
            self.terms[tuple(b)] = j.truncate(d) if d < j.order else j

    @classmethod
    def from_op(cls, T):
        """Read a t-free operator with polynomial coefficients as a symbol."""
        return cls(T.n, {b: c for (b, m), c in T.terms.items()}, T.mode, T.batch)

    @classmethod
    def const(cls, mv):
        return cls(mv.n, {_zero_beta(mv.n): Jet.from_mv(mv, 0)}, mv.mode, mv.batch)

    @classmethod
    def partial(cls, n, a, mode=RATIONAL):
        beta = tuple(1 if i == a else 0 for i in range(n))
        return cls(n, {beta: Jet.const(n, 0, 1, 1, mode)}, mode)

    def is_zero(self):
        return not self.terms

    @property
    def degree(self):
        return max((_poly_degree(j) for j in self.terms.values()), default=-1)

    def _pad(self, j, K):
        return j.extend(K)

    def __add__(self, other):
        terms = dict(self.terms)
        for b, j in other.terms.items():
            if b in terms:
                K = max(terms[b].order, j.order)
                terms[b] = terms[b].extend(K) + j.extend(K)
            else:
                terms[b] = j
        return GetzlerSymbol(self.n, terms, self.mode, max(self.batch, other.batch))

    def __neg__(self):
        return GetzlerSymbol(self.n, {b: -j for b, j in self.terms.items()}, self.mode, self.batch)

    def __sub__(self, other):
        return self + (-other)

    def scale(self, s):
        return GetzlerSymbol(self.n, {b: j.scale(s) for b, j in self.terms.items()},
                             self.mode, self.batch)

    def __matmul__(self, other):
        """Composition with wedge-valued coefficients (exact on polynomials)."""
        terms = {}
        for b1, c1 in self.terms.items():
            for b2, c2 in other.terms.items():
                K = c1.order + c2.order
                p1 = c1.extend(K)
                for delta, bc in _sub_multi(b1):
                    if any(di > 0 for di in delta) and sum(delta) > c2.order:
                        continue
                    dc = c2.extend(K + sum(delta)).deriv_multi(delta) if any(delta) else c2.extend(K)
                    t = wedge_mul(p1, dc.truncate(K))
                    if bc != 1:
                        t = t.scale(bc)
                    key = _beta_add(_beta_sub(b1, delta), b2)
                    if key in terms:
                        Kk = max(terms[key].order, t.order)
                        terms[key] = terms[key].extend(Kk) + t.extend(Kk)
                    else:
                        terms[key] = t
        return GetzlerSymbol(self.n, terms, self.mode, max(self.batch, other.batch))

    def __eq__(self, other):
        d = self - other
        return all(j.is_zero() for j in d.terms.values())

    __hash__ = None

    def constant_part(self):
        """{beta: Multivector}: polynomial coefficients evaluated at the origin."""
        out = {}
        for b, j in self.terms.items():
            v = j.value()
            if not v.is_zero():
                out[b] = v
        return out

    def __repr__(self):
        return f"GetzlerSymbol(n={self.n}, terms={sorted(self.terms)})"


def nabla_symbol_reference(R_top, n, a, mode=RATIONAL):
    """d_a - 1/4 sum_b x_b R^T_ab as a Getzler symbol."""
    q = mpq(-1, 4) if mode == RATIONAL else -0.25
    S = GetzlerSymbol.partial(n, a, mode)
    acc = None
    for b in range(n):
        mv = R_top.entries[a][b]
        if mv.is_zero():
            continue
        t = Jet.var(n, 1, b, 1, mode).mul_mv(mv).scale(q)
        acc = t if acc is None else acc + t
    if acc is not None:
        S = S + GetzlerSymbol(n, {_zero_beta(n): acc}, mode)
    return S


def bar_laplacian_symbol_reference(R_top, n, mode=RATIONAL):
    """-sum_a (d_a - 1/4 sum_b x_b R^T_ab)^2."""
    acc = None
    for a in range(n):
        S = nabla_symbol_reference(R_top, n, a, mode)
        t = S @ S
        acc = t if acc is None else acc + t
    return -acc
