"""Exact verification suites on random rational jets at a point."""
import random
import time
from itertools import combinations, product

import numpy as np
from gmpy2 import mpq

from . import cocycle as cc
from .geometry import MetricJet, ThreeFormJet, geom_data, to_normal_coordinates
from .heat import heat_coeffs, heat_pair, mehler_symbols, theta1B
from .jets import Jet, monomials
from .multivector import berezin, wedge
from .operators import (SFibredOp, bar_laplacian_symbol_reference, build_dirac, build_laplacian,
                        covariant_derivative, getzler_order, getzler_rescale,
                        nabla_symbol_reference, GetzlerSymbol)
from .scalars import RATIONAL, Q, fmt


# ---------------------------------------------------------------------------
# random exact data

def random_jet(rng, n, K, lo=0, density=1.0, num=3, den=4):
    terms = {}
    for a in monomials(n, K):
        a = tuple(int(v) for v in a)
        if lo <= sum(a) <= K and (sum(a) <= 1 or rng.random() < density):
            c = Q(rng.randint(-num, num), rng.randint(1, den))
            if c != 0:
                terms[a] = c
    return Jet.from_poly(n, K, terms)


def random_metric(rng, n, K, density=1.0, amplitude=1):
    comp = [[None] * n for _ in range(n)]
    for a in range(n):
        for b in range(a, n):
            j = random_jet(rng, n, K, 1, density, amplitude, 4)
            if a == b:
                j = j + 1
            comp[a][b] = comp[b][a] = j
    return MetricJet(comp)


def random_three_form(rng, n, K, density=1.0, ncomp=None):
    trip = list(combinations(range(n), 3))
    if ncomp is not None:
        trip = sorted(rng.sample(trip, min(ncomp, len(trip))))
    return ThreeFormJet(n, {t: random_jet(rng, n, K, 0, density) for t in trip}, K)


def exact_three_form(rng, n, K, density=1.0, ncomp=None):
    """B = dC for a random 2-form C, so dB = 0 identically."""
    pairs = list(combinations(range(n), 2))
    if ncomp is not None:
        pairs = sorted(rng.sample(pairs, min(ncomp, len(pairs))))
    C = {pq: random_jet(rng, n, K + 1, 1, density) for pq in pairs}

    def comp(i, j):
        if i == j:
            return None
        if (i, j) in C:
            return C[(i, j)], 1
        if (j, i) in C:
            return C[(j, i)], -1
        return None

    out = {}
    for a, b, c in combinations(range(n), 3):
        acc = None
        for (x, y, z), s in (((a, b, c), 1), ((b, a, c), -1), ((c, a, b), 1)):
            cyz = comp(y, z)
            if cyz is None:
                continue
            t = cyz[0].deriv(x).scale(s * cyz[1])
            acc = t if acc is None else acc + t
        if acc is not None and not acc.is_zero():
            out[(a, b, c)] = acc.truncate(K)
    return ThreeFormJet(n, out, K)


class Sample:
    def __init__(self, gd, a_jets, seed, dB_zero):
        self.gd = gd
        self.a = a_jets
        self.seed = seed
        self.dB_zero = dB_zero


def random_sample(seed, n=4, K=None, dB_zero=False, density=1.0, nfun=None, ncomp=None):
    """Random metric (g(0) = I) and 3-form jets in normal coordinates plus test functions."""
    rng = random.Random(seed)
    K = n if K is None else K
    g = random_metric(rng, n, K, density)
    B = exact_three_form(rng, n, K - 1, density, ncomp) if dB_zero \
        else random_three_form(rng, n, K - 1, density, ncomp)
    gn, Bn = to_normal_coordinates(g, B, K)
    gd = geom_data(gn, Bn, K)
    nfun = n + 1 if nfun is None else nfun
    a = [random_jet(rng, n, K, 0, density) for _ in range(nfun)]
    if a[0].scalar_part_array()[0, 0] == 0:
        a[0] = a[0] + 1
    return Sample(gd, a, seed, dB_zero)


# ---------------------------------------------------------------------------
# report

def _s(x):
    """JSON-safe scalar: exact rational text or float."""
    if isinstance(x, np.ndarray):
        x = x.reshape(-1)[0]
    if isinstance(x, complex):
        return {"re": x.real, "im": x.imag}
    try:
        return fmt(x)
    except Exception:
        return float(x)


class CocycleReport:
    """Residual table: each row is recursion side vs closed-form side."""

    def __init__(self):
        self.rows = []
        self.notes = {}
        self.timings = {}

    def add(self, check, sample, computed, closed, expect_zero=True, detail=None):
        res = computed - closed
        zero = bool(np.all(np.asarray(res) == 0))
        row = {"check": check, "sample": sample, "computed": _s(computed), "closed_form": _s(closed),
               "residual": _s(res), "expected_zero": expect_zero,
               "ok": zero if expect_zero else True}
        if detail:
            row["detail"] = detail
        self.rows.append(row)
        return zero

    def add_bool(self, check, sample, value, detail=None):
        row = {"check": check, "sample": sample, "computed": bool(value), "closed_form": True,
               "residual": 0 if value else 1, "expected_zero": True, "ok": bool(value)}
        if detail:
            row["detail"] = detail
        self.rows.append(row)
        return bool(value)

    @property
    def failures(self):
        return [r for r in self.rows if not r["ok"]]

    def summary(self):
        out = {}
        for r in self.rows:
            s = out.setdefault(r["check"], {"rows": 0, "ok": 0, "nonzero_residuals": 0})
            s["rows"] += 1
            s["ok"] += r["ok"]
            if r["residual"] not in (0, "0"):
                s["nonzero_residuals"] += 1
        return out

    def to_dict(self):
        return {"summary": self.summary(), "rows": self.rows, "notes": self.notes,
                "all_expected_zero_residuals_zero": not self.failures}


def _bz(mv):
    return berezin(mv)[0]


# ---------------------------------------------------------------------------
# suites

def suite_n4(report, samples):
    """phi_0 closed forms and two routes, tr identities, Theta_1^B sign, phi_2, phi_4."""
    signs = set()
    for S in samples:
        gd, a = S.gd, S.a
        tag = f"n4/seed{S.seed}"
        Th, Tb, L, Lb = heat_pair(gd, 2)
        r0 = cc.phi_integrand(gd, [a[0]], 0, heat=Th, laplacian=L)
        forms = cc.phi0_forms(gd, a[0])
        report.add("phi0 vs A-hat(R^T) + dB terms", tag, _bz(r0.total), _bz(forms["R_top"]))
        report.add("phi0 vs A-hat(R_-) + dd*dB/6", tag, _bz(r0.total), _bz(forms["R_minus"]))
        report.add("phi0 closed forms agree", tag, _bz(forms["R_top"]), _bz(forms["R_minus"]))
        rb = cc.theta_half_route_b(gd, Lb, L)
        report.add("Theta_2 via Delta-bar + dB corrections", tag, _bz(Th.at_origin(2)), _bz(rb))
        tri = cc.trace_identities(gd)
        report.add("tr((dB)_o^2) = 0", tag, _bz(tri["tr(dB_o^2)"]), mpq(0))
        report.add("tr(d_LC B_o (dB)_o) = 0", tag, _bz(tri["tr(d_LC B_o dB_o)"]), mpq(0))
        report.add("tr(R_LC (dB)_o) = 2 kappa dB", tag, _bz(tri["tr(R_LC dB_o)"]), _bz(tri["2 kappa dB"]))
        report.add("tr(B_o^2 (dB)_o) = -48 |B|^2 dB", tag, _bz(tri["tr(B_o^2 dB_o)"]),
                   _bz(tri["-48 |B|^2 dB"]))
        # sign of Theta_1 - Theta-bar_1 at the origin
        d1 = Th.at_origin(1) - Tb.at_origin(1)
        plus, minus = d1 == gd.dB, d1 == -gd.dB
        sign = "+c(dB)" if plus and not minus else "-c(dB)" if minus and not plus else "0" if plus else "other"
        signs.add(sign)
        report.add_bool("Theta_1 - Theta-bar_1 = -c(dB) at 0", tag, minus,
                        {"observed": sign})
        if len(a) >= 3 and gd.order >= 5:
            r2 = cc.phi_integrand(gd, a[:3], 2, laplacian=L)
            closed = _bz(cc.p2_form(gd, a[:3]))
            bd = {str(k): _s(_bz(v)) for k, v in r2.by_k().items()}
            ratio = {str(k): _s(_bz(v) / closed) for k, v in r2.by_k().items()} if closed != 0 else None
            report.add("phi2 = a0 g(da1,da2) dB / 6", tag, _bz(r2.total), closed,
                       detail={"per_k": bd, "per_k_over_closed": ratio,
                               "c_prime": {str(k): fmt(cc.cpk(2, k).c_prime) for k in r2.by_k()}})
            for k, v in r2.by_k().items():
                if sum(k) == 2:
                    report.add(f"phi2 |k|=2 part vanishes k={k}", tag, _bz(v), mpq(0))
        if len(a) >= 5:
            r4 = cc.phi_integrand(gd, a[:5], 4)
            report.add("phi4 = a0 da1 da2 da3 da4 / 4!", tag, _bz(r4.total), _bz(cc.dbzero_form(gd, a[:5])))
    report.notes["Theta_1^B sign"] = sorted(signs)


def suite_dbzero(report, samples):
    for S in samples:
        gd, a = S.gd, S.a
        tag = f"dbzero/n{gd.n}/seed{S.seed}"
        report.add_bool("dB = 0 at the point", tag, gd.dB.is_zero())
        for p in range(0, gd.n + 1, 2):
            if gd.order < cc_required_order(gd.n, p):
                continue
            r = cc.phi_integrand(gd, a[:p + 1], p)
            report.add(f"dB=0: phi{p} = a0 da1..da{p} A-hat(R_-)/{p}!", tag, _bz(r.total),
                       _bz(cc.dbzero_form(gd, a[:p + 1])))


def cc_required_order(n, p):
    from .torus import required_order
    return required_order(n, p)


def suite_n6(report, samples):
    """Theta_3 against the n = 6 closed form, with a term-level breakdown."""
    fits = []
    for S in samples:
        gd = S.gd
        tag = f"n6/seed{S.seed}"
        Th, Tb, L, Lb = heat_pair(gd, 3)
        b3 = _bz(Th.at_origin(3))
        bb3 = _bz(Tb.at_origin(3))
        variants = {}
        for conn in ("torsion", "lc", "minus"):
            for tr in (False, True):
                T1, T2 = cc.p6_terms(gd, conn, tr)
                variants[f"{conn}{'/transposed' if tr else ''}"] = (_bz(T1), _bz(T2))
        T1, T2 = variants["torsion"]
        closed = (T1 + T2) / 18
        detail = {"B(Theta-bar_3)": fmt(bb3), "B(Theta_3 - Theta-bar_3)": fmt(b3 - bb3),
                  "variants": {k: {"T1": fmt(v[0]), "T2": fmt(v[1]), "closed": fmt((v[0] + v[1]) / 18)}
                               for k, v in variants.items()}}
        report.add("n6 phi0 vs (1/2 nabla R^T + B R^T) nabla dB / 18", tag, b3, closed,
                   detail=detail)
        report.add("n6 Theta-bar_3 supertrace vanishes", tag, bb3, mpq(0))
        fits.append(variants)
    report.notes["n6 variants"] = "torsion/lc/minus connection for nabla; transposed = R^T_ab read as g(R^T e_b, e_a)"
    # a T1 + b T2 can only vanish on every sample for (a, b) != 0 if T1/T2 is constant
    report.notes["n6 T1/T2 ratios"] = {
        k: [fmt(v[k][0] / v[k][1]) if v[k][1] != 0 else None for v in fits] for k in (fits[0] if fits else {})}
    return fits


def suite_mehler(report, samples):
    for S in samples:
        gd = S.gd
        tag = f"mehler/n{gd.n}/seed{S.seed}"
        jmax = gd.n // 2
        Tb = heat_coeffs(build_laplacian(gd, include_dB=False), gd, jmax)
        ms = mehler_symbols(gd, jmax)
        for j in range(jmax + 1):
            report.add_bool(f"Theta-bar_{j} degree-{2 * j} part = A-hat coefficient", tag,
                            Tb.at_origin(j).grade(2 * j) == ms[j])
            op = SFibredOp.mult(Tb[j])
            report.add_bool(f"Getzler order of Theta-bar_{j} <= {2 * j}", tag,
                            (getzler_order(op) or 0) <= 2 * j)
        Lb = build_laplacian(gd, include_dB=False)
        report.add_bool("sigma_2(Delta-bar) = -sum (d_a - x_b R^T_ab / 4)^2", tag,
                        getzler_rescale(Lb, 2) == bar_laplacian_symbol_reference(gd.R_top, gd.n))
        for a in range(gd.n):
            report.add_bool(f"sigma_1(nabla_{a + 1}) = d_a - x_b R^T_ab / 4", tag,
                            getzler_rescale(covariant_derivative(gd, a), 1)
                            == nabla_symbol_reference(gd.R_top, gd.n, a))


def suite_bismut(report, samples):
    for S in samples:
        gd = S.gd
        tag = f"bismut/n{gd.n}/seed{S.seed}"
        D = build_dirac(gd)
        L = build_laplacian(gd, include_dB=True)
        D2 = D @ D
        K = min(D2.order, L.order)
        report.add_bool("D^2 = Delta", tag, (D2.truncate(K) - L.truncate(K)).is_zero())
        report.add_bool("R^T = R_- + (dB)_o", tag, gd.R_top == gd.R_minus + gd.dB_o)


def random_operator(rng, n, K, dmax=2, grades=(0, 1, 2), nterms=3):
    """Random t-free operator with polynomial Clifford coefficients."""
    from .multivector import Multivector
    terms = {}
    betas = [tuple(int(v) for v in m) for m in monomials(n, dmax)]
    for _ in range(nterms):
        beta = rng.choice(betas)
        mvs = {}
        for _ in range(2):
            gr = rng.choice(grades)
            idx = tuple(sorted(rng.sample(range(1, n + 1), gr)))
            mvs[idx] = Q(rng.randint(-3, 3), rng.randint(1, 3))
        c = None
        for alpha in rng.sample([tuple(int(v) for v in m) for m in monomials(n, 2)], 3):
            mv = Multivector.from_dict(n, {k: v for k, v in mvs.items()})
            t = Jet.monomial(n, K, alpha).mul_mv(mv)
            c = t if c is None else c + t
        key = (beta, 0)
        terms[key] = terms[key] + c if key in terms else c
    return SFibredOp(n, K, terms)


def suite_symbol_multiplicativity(report, count=100, seed=0, n=2, K=8):
    rng = random.Random(seed)
    ok = 0
    for i in range(count):
        A = random_operator(rng, n, K)
        B = random_operator(rng, n, K)
        mA, mB = getzler_order(A), getzler_order(B)
        if mA is None or mB is None:
            good = True
        else:
            good = getzler_rescale(A @ B, mA + mB) == (getzler_rescale(A, mA) @ getzler_rescale(B, mB))
        ok += good
        report.add_bool("sigma(A B) = sigma(A) sigma(B)", f"sym/{seed}/{i}", good)
    return ok


def verify_theorems(seed=0, n4=20, n6=5, include=None, progress=None):
    """Run the suites; each row is a recursion-vs-closed-form residual."""
    include = set(include or ["n4", "dbzero", "n6", "mehler", "bismut", "symbols"])
    rep = CocycleReport()
    say = progress or (lambda msg: None)

    def timed(name, fn):
        t = time.time()
        fn()
        rep.timings[name] = round(time.time() - t, 3)
        say(f"{name}: {rep.timings[name]}s")

    if "n4" in include or "mehler" in include or "bismut" in include:
        s4 = [random_sample(seed * 1000 + i, 4, 5) for i in range(n4)]
        if "n4" in include:
            timed("n4", lambda: suite_n4(rep, s4))
        if "mehler" in include:
            timed("mehler", lambda: suite_mehler(rep, s4))
        if "bismut" in include:
            timed("bismut", lambda: suite_bismut(rep, s4))
    if "dbzero" in include:
        sz = [random_sample(seed * 1000 + 500 + i, 4, 5, dB_zero=True) for i in range(n4)]
        timed("dbzero", lambda: suite_dbzero(rep, sz))
    if "n6" in include and n6:
        s6 = [random_sample(seed * 1000 + 900 + i, 6, 6, density=0.05, nfun=1, ncomp=4)
              for i in range(n6)]
        timed("n6", lambda: suite_n6(rep, s6))
    if "symbols" in include:
        timed("symbols", lambda: suite_symbol_multiplicativity(rep, 100, seed))
    return rep
