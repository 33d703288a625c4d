"""Pointwise integrands of the residue cocycle and their closed forms.

phi_p(a_0..a_p) = sum_k c'_pk (4 pi)^{-n/2} sum_j int tr_s(P_{k,l} Theta_j |_0) dV,
l = (n-p)/2 - j.  Since (4 pi)^{-n/2} tr_s = (2 pi i)^{-n/2} Berezin, all
pointwise values are reported as Berezin coefficients of top forms; the
factor (2 pi i)^{-n/2} is applied only when a number is needed.
"""
import cmath
from fractions import Fraction
from itertools import product
from math import factorial, gamma

import numpy as np
from gmpy2 import mpq

from .heat import heat_coeffs
from .jets import Jet
from .multivector import Multivector, ahat_form, berezin, wedge
from .operators import build_laplacian, build_Pk, clifford_differential, hP_components, SFibredOp
from .scalars import FLOAT, RATIONAL, Q, fmt


class CocycleConstants:
    """c'_pk exactly, and c_pk = Gamma(p/2 + |k|) c'_pk kept symbolically."""

    def __init__(self, p, k, c_prime):
        self.p = p
        self.k = tuple(k)
        self.c_prime = c_prime
        self.gamma_arg = mpq(p, 2) + sum(self.k)

    @property
    def c_value(self):
        return float(self.c_prime) * gamma(float(self.gamma_arg)) if self.gamma_arg > 0 \
            else float("nan")

    def symbolic(self):
        return f"Gamma({fmt(self.gamma_arg)})*({fmt(self.c_prime)})"

    def __repr__(self):
        return f"CocycleConstants(p={self.p}, k={self.k}, c'={fmt(self.c_prime)})"


def cpk(p, k=()):
    """c'_pk = (-1)^|k| / (k! (k_1+1)(k_1+k_2+2)...(k_1+..+k_p+p))."""
    k = tuple(k)
    if p < 0 or p % 2:
        raise ValueError("p must be a non-negative even integer")
    if len(k) != p or any((not isinstance(x, (int, np.integer))) or x < 0 for x in k):
        raise ValueError(f"k must be {p} non-negative integers")
    den = 1
    s = 0
    for i, ki in enumerate(k):
        den *= factorial(ki)
        s += ki + 1
        den *= s
    return CocycleConstants(p, k, mpq((-1) ** sum(k), den))


def multi_indices(p, total_max):
    return [k for k in product(range(total_max + 1), repeat=p) if sum(k) <= total_max]


def admissible_terms(n, p):
    """[(k, j, l)] entering phi_p, with Theta_j = 0 for j < 0 dropped."""
    if p % 2 or p > n:
        raise ValueError("p must be even and at most n")
    h = (n - p) // 2
    out = []
    for k in multi_indices(p, n - p):
        kk = sum(k)
        for j in range(h - kk, h - (kk + 1) // 2 + 1):
            if j < 0:
                continue
            out.append((k, j, h - j))
    return out


def prefactor(n):
    """(2 pi i)^{-n/2} both as text and as a complex number."""
    return {"symbolic": f"(2*pi*i)^(-{n // 2})", "value": (2j * cmath.pi) ** (-(n // 2)),
            "supertrace": f"(-2i)^{n // 2} * Berezin",
            "heat": f"(4*pi)^(-{n // 2})"}


class IntegrandResult:
    """Top-form Berezin coefficients: total and per (k, j) parts."""

    def __init__(self, n, p, parts, total):
        self.n = n
        self.p = p
        self.parts = parts
        self.total = total

    @property
    def berezin(self):
        return berezin(self.total)

    def by_k(self):
        out = {}
        for (k, j), d in self.parts.items():
            v = d["weighted"]
            out[k] = out[k] + v if k in out else v
        return out


def phi_integrand(gd, a_jets, p, heat=None, laplacian=None, ks=None):
    """Sum_k c'_pk sum_j (P_{k,l} Theta_j)(0) as a Multivector, with breakdown."""
    n = gd.n
    if len(a_jets) != p + 1:
        raise ValueError(f"phi_{p} takes {p + 1} functions")
    terms = admissible_terms(n, p)
    if ks is not None:
        ks = {tuple(k) for k in ks}
        for k in ks:
            if sum(k) > n - p:
                raise ValueError(f"|k| = {sum(k)} exceeds n - p = {n - p}")
        terms = [t for t in terms if t[0] in ks]
    jmax = (n - p) // 2
    L = laplacian
    if L is None and (jmax > 0 or any(sum(k) for k, _, _ in terms)):
        L = build_laplacian(gd, include_dB=True)
    if heat is None:
        heat = heat_coeffs(L, gd, jmax)
    parts = {}
    total = Multivector.zero(n, gd.batch, gd.mode)
    comps_cache = {}
    for k, j, l in terms:
        if k not in comps_cache:
            if p == 0:
                P = SFibredOp.mult(a_jets[0])
            else:
                P = build_Pk(gd, a_jets, k, laplacian=L)
            comps_cache[k] = hP_components(P, sum(k))
        comp = comps_cache[k][l]
        val = comp.apply(heat[j]).value() if comp.terms else Multivector.zero(n, gd.batch, gd.mode)
        c = cpk(p, k).c_prime
        w = val.scale(c if gd.mode == RATIONAL else float(c))
        parts[(k, j)] = {"c_prime": c, "value": val, "weighted": w}
        total = total + w
    return IntegrandResult(n, p, parts, total.pruned())


# ---------------------------------------------------------------------------
# closed forms (top-degree forms at the point, frame = coordinates at 0)

def gradient_form(gd, f):
    return clifford_differential(gd, f).value()


def _scalar(x, gd):
    return Multivector.scalar(gd.n, x, gd.batch, gd.mode)


def dbzero_form(gd, a_jets):
    """(1/p!) a_0 da_1 ... da_p A-hat(R_-)_{[n-p]}."""
    n = gd.n
    p = len(a_jets) - 1
    form = _scalar(a_jets[0].scalar_part_array()[0], gd)
    for a in a_jets[1:]:
        form = wedge(form, gradient_form(gd, a))
    A = ahat_form(gd.R_minus, n - p).grade(n - p)
    c = Q(1, factorial(p)) if gd.mode == RATIONAL else 1.0 / factorial(p)
    return wedge(form, A).scale(c)


def phi0_forms(gd, a0=None):
    """{'R_top': A-hat(R^T) + (kappa/12 - 2|B|^2) dB + dd*dB/6, 'R_minus': A-hat(R_-) + dd*dB/6}."""
    n = gd.n
    if n != 4:
        raise ValueError("the dB-corrected phi_0 closed forms are stated for n = 4")
    exact = gd.mode == RATIONAL
    sixth = Q(1, 6) if exact else 1.0 / 6
    twelfth = Q(1, 12) if exact else 1.0 / 12
    dcod = gd.dcodB if gd.dcodB is not None else Multivector.zero(n, gd.batch, gd.mode)
    At = ahat_form(gd.R_top, n).grade(n)
    Am = ahat_form(gd.R_minus, n).grade(n)
    pot = gd.kappa * twelfth - 2 * gd.normB2
    f1 = At + gd.dB.scale(pot) + dcod.scale(sixth)
    f2 = Am + dcod.scale(sixth)
    if a0 is not None:
        v = a0.scalar_part_array()[0]
        f1, f2 = f1.scale(v), f2.scale(v)
    return {"R_top": f1, "R_minus": f2}


def theta_half_route_b(gd, Lb=None, L=None):
    """Theta_2(0) from the Delta-bar recursion plus the dB corrections, n = 4.

    Theta_2 = Theta-bar_2 - 1/2 (c(dB) Theta-bar_1 + Delta Theta^B_1) at 0,
    with Theta^B_1 = Theta_1 - Theta-bar_1 built directly from c(dB).
    """
    from .heat import theta1B
    from .jets import jet_mul
    if gd.n != 4:
        raise ValueError("the two-route check is implemented for n = 4")
    Lb = Lb if Lb is not None else build_laplacian(gd, include_dB=False)
    L = L if L is not None else build_laplacian(gd, include_dB=True)
    Tb = heat_coeffs(Lb, gd, 2)
    T1B = theta1B(gd)
    K = min(gd.dBfr.order, Tb[1].order)
    corr = jet_mul(gd.dBfr.truncate(K), Tb[1].truncate(K)).value() + L.apply(T1B).value()
    half = Q(1, 2) if gd.mode == RATIONAL else 0.5
    return Tb.at_origin(2) - corr.scale(half)


def p2_form(gd, a_jets):
    """(1/6) a_0 g(da_1, da_2) dB."""
    a0, a1, a2 = a_jets
    d1, d2 = gradient_form(gd, a1), gradient_form(gd, a2)
    gdot = None
    for i in range(gd.n):
        t = d1.coeff((i + 1,)) * d2.coeff((i + 1,))
        gdot = t if gdot is None else gdot + t
    c = Q(1, 6) if gd.mode == RATIONAL else 1.0 / 6
    return gd.dB.scale(gdot * a0.scalar_part_array()[0] * c)


def trace_identities(gd):
    """Terms of tr(R^T ^ R^T) in the decomposition R^T = R_- + (dB)_o, n = 4.

    Products are taken in the standard orientation (row a = components of A e_a
    transposed), so every matrix is transposed first.
    """
    dBo, Bo, R, RLC = (m.transpose() for m in (gd.dB_o, gd.B_o, gd.R, gd.R_LC))
    Bo2 = Bo @ Bo
    dLCBo = R - RLC - Bo2
    return {
        "tr(dB_o^2)": (dBo @ dBo).trace(),
        "tr(d_LC B_o dB_o)": (dLCBo @ dBo).trace(),
        "tr(R_LC dB_o)": (RLC @ dBo).trace(),
        "2 kappa dB": gd.dB.scale(gd.kappa * 2),
        "tr(B_o^2 dB_o)": (Bo2 @ dBo).trace(),
        "-48 |B|^2 dB": gd.dB.scale(gd.normB2 * -48),
    }


# ---------------------------------------------------------------------------
# n = 6 closed form

def _christoffel_at_origin(gd, connection):
    n = gd.n
    src = {"lc": gd.Gamma, "torsion": gd.Gamma_t, "minus": gd.Gamma_m}[connection]
    from .scalars import zeros
    G = zeros((n, n, n, gd.batch), gd.mode)
    for a in range(n):
        for b in range(n):
            for c in range(n):
                G[a, b, c] = src[a][b][c].scalar_part_array()[0]
    return G


def p6_terms(gd, connection="torsion", transpose=False):
    """The two 6-forms of the n = 6 formula, before the 1/18 factor.

    T1 = 1/2 sum_{a,c} nabla_a R^T_{ac} ^ nabla_c dB,
    T2 = sum_{a,c,e} B_{ace} R^T_{ae} ^ nabla_c dB,
    with nabla one of the connections lc / torsion / minus and R^T_{ab} read
    as g(R^T e_a, e_b) (transpose=True uses g(R^T e_b, e_a)).
    """
    from .geometry import _jet_derivs, curvature_derivative_at_origin
    from .multivector import blade_from_indices, blade_indices
    from .scalars import zeros
    n, mode, batch = gd.n, gd.mode, gd.batch
    R0, dR = curvature_derivative_at_origin(gd.Gamma_t, n, mode, batch)
    G = _christoffel_at_origin(gd, connection)
    # lowered Rm(a,b,c,d) = g(R(d_a,d_b) d_c, d_d) = R^d_{cab}; g = id and dg = 0 at 0
    Rm = np.empty((n, n, n, n, batch), dtype=R0.dtype)
    dRm = np.empty((n, n, n, n, n, batch), dtype=R0.dtype)
    for a, b, c, d in product(range(n), repeat=4):
        Rm[a, b, c, d] = R0[d, c, a, b]
        dRm[a, b, c, d] = dR[d, c, a, b]
    # covariant derivative of the 4-tensor at the origin
    nRm = dRm.copy()
    for a, b, c, d, x in product(range(n), repeat=5):
        v = nRm[a, b, c, d, x]
        for m in range(n):
            v = v - G[m, x, a] * Rm[m, b, c, d] - G[m, x, b] * Rm[a, m, c, d] \
                - G[m, x, c] * Rm[a, b, m, d] - G[m, x, d] * Rm[a, b, c, m]
        nRm[a, b, c, d, x] = v

    def rt(p_, q_, src):
        """2-form R^T_{pq}: sum_{c<d} Rm(p, q, c, d) e_cd (or with p, q swapped)."""
        if transpose:
            p_, q_ = q_, p_
        terms = {}
        for c in range(n):
            for d in range(c + 1, n):
                v = src(p_, q_, c, d)
                if np.any(v != 0):
                    terms[(c + 1, d + 1)] = v
        return Multivector.from_dict(n, terms, mode, batch)

    # nabla_x dB at the origin from coordinate components
    dBc = gd.dBcoord
    top4 = [blade for blade in range(1 << n) if bin(blade).count("1") == 4]
    comp0 = {}
    comp1 = {}
    for blade in top4:
        idx = blade_indices(blade)
        if blade in dBc.blades and dBc.order >= 1:
            v0, d1, _ = _jet_derivs(dBc.component(blade).truncate(1), n, mode, batch)
            comp0[idx], comp1[idx] = v0, d1
        else:
            comp0[idx] = zeros((batch,), mode)
            comp1[idx] = zeros((n, batch), mode)

    def dB_comp(ind):
        """Antisymmetric component (value, derivatives) for index tuple (1-based)."""
        mask, sign = blade_from_indices(ind)
        if sign == 0:
            return None
        key = blade_indices(mask)
        return (comp0[key] * sign, comp1[key] * sign)

    nabla_dB = []
    for x in range(n):
        terms = {}
        for blade in top4:
            ind = blade_indices(blade)
            v = comp1[ind][x]
            for slot in range(4):
                for m in range(n):
                    g_ = G[m, x, ind[slot] - 1]
                    if not np.any(g_ != 0):
                        continue
                    rep = list(ind)
                    rep[slot] = m + 1
                    c = dB_comp(tuple(rep))
                    if c is not None:
                        v = v - g_ * c[0]
            if np.any(v != 0):
                terms[ind] = v
        nabla_dB.append(Multivector.from_dict(n, terms, mode, batch))

    half = Q(1, 2) if mode == RATIONAL else 0.5
    T1 = Multivector.zero(n, batch, mode)
    T2 = Multivector.zero(n, batch, mode)
    Bfr = gd.B0
    for a in range(n):
        for c in range(n):
            if nabla_dB[c].is_zero():
                continue
            nab = rt(a, c, lambda p_, q_, c_, d_: nRm[p_, q_, c_, d_, a])
            T1 = T1 + wedge(nab, nabla_dB[c]).scale(half)
            for e in range(n):
                if len({a, c, e}) < 3:
                    continue
                Bace = Bfr.coeff((a + 1, c + 1, e + 1))
                if not np.any(Bace != 0):
                    continue
                r = rt(a, e, lambda p_, q_, c_, d_: Rm[p_, q_, c_, d_])
                T2 = T2 + wedge(r, nabla_dB[c]).scale(Bace)
    return T1, T2


def p6_form(gd, connection="torsion", transpose=False):
    T1, T2 = p6_terms(gd, connection, transpose)
    c = Q(1, 18) if gd.mode == RATIONAL else 1.0 / 18
    return (T1 + T2).scale(c)
