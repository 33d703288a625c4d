"""Acceptance suite: one PASS/FAIL line per criterion, pinned tolerances and budgets.

Run alone with  python3 -m pytest -v -s tests/test_acceptance.py
"""
import cmath
import itertools
import math
import time

import pytest

from conftest import ACCEPTANCE_LINES
from rescocycle import cocycle as cc
from rescocycle.heat import heat_pair
from rescocycle.multivector import Multivector, ahat_form, berezin, supertrace, wedge
from rescocycle.scalars import Q
from rescocycle.torus import TorusManifold, TorusQuadrature, bB_residuals, index_pairing, phi_value
from rescocycle.verify import (CocycleReport, random_sample, suite_bismut, suite_mehler, suite_n4, suite_n6,
                               suite_symbol_multiplicativity)

# budgets (seconds) and tolerances
BUDGET = {1: 1.0, 2: 60.0, 3: 300.0, 4: 300.0, 5: 60.0, 6: 1800.0, 7: 300.0, 8: 300.0, 9: 900.0}
TOL_PHI0 = 1e-6
TOL_BB = 1e-6
TOL_REFINE = 1e-8
TOL_INTEGER = 1e-6
N4, N6, NSYM = 20, 5, 100
SEED = 0


def bz(mv):
    return berezin(mv)[0]


def _st_eq(pair, re):
    return bool(pair[0][0] == re and pair[1][0] == 0)


def record(capsys, crit, ok, elapsed, detail):
    line = f"CRITERION {crit}: {'PASS' if ok else 'FAIL'} ({elapsed:.2f}s / budget {BUDGET[crit]:.0f}s) {detail}"
    ACCEPTANCE_LINES.append(line)
    with capsys.disabled():
        print("\n" + line)
    return ok


def nonzero_dB_samples(start, K, count, keep=lambda S: True):
    """First ``count`` seeds from ``start`` whose dB is nonzero at the point (criteria 3, 4 need dB != 0)."""
    out, seed = [], start
    while len(out) < count:
        S = random_sample(seed, 4, K)
        if not S.gd.dB.is_zero() and keep(S):
            out.append(S)
        seed += 1
    return out


@pytest.fixture(scope="module")
def samples_k4():
    return nonzero_dB_samples(SEED * 1000, 4, N4)


@pytest.fixture(scope="module")
def samples_k5():
    return nonzero_dB_samples(SEED * 1000 + 100, 5, N4, lambda S: bz(cc.p2_form(S.gd, S.a[:3])) != 0)


def test_criterion_1_clifford_kernel(capsys):
    t = time.perf_counter()
    bad = []
    for n in range(1, 9):
        e = [Multivector.basis(n, i) for i in range(1, n + 1)]
        for i, j in itertools.product(range(n), repeat=2):
            if not (e[i] * e[j] + e[j] * e[i]) == (-2 if i == j else 0):
                bad.append((n, i + 1, j + 1))
    top4 = Multivector.basis(4, 1, 2, 3, 4)
    checks = {
        "tr_s(e1234) = -4": _st_eq(supertrace(top4), -4),
        "tr_s(1) = 0, n=4": _st_eq(supertrace(Multivector.scalar(4, 1)), 0),
        "B(e1234) = 1": bz(top4) == 1,
        "B(e12) = 0": bz(Multivector.basis(4, 1, 2)) == 0,
        "B(5 e1234 + e1) = 5": bz(top4.scale(5) + Multivector.basis(4, 1)) == 5,
    }
    dB = Multivector.from_dict(6, {c: Q(k % 7 - 3, 1 + k % 4)
                                   for k, c in enumerate(itertools.combinations(range(1, 7), 4))})
    checks["tr_s(c(dB)^2) = 0, n=6"] = _st_eq(supertrace(dB * dB), 0) and not dB.is_zero()
    dt = time.perf_counter() - t
    ok = not bad and all(checks.values()) and dt < BUDGET[1]
    failed = [k for k, v in checks.items() if not v]
    record(capsys, 1, ok, dt, f"relations n<=8 bad={len(bad)}; supertrace/Berezin examples failed={failed}")
    assert ok


def test_criterion_2_dbzero_index_density(capsys):
    t = time.perf_counter()
    mism = 0
    for i in range(N4):
        S = random_sample(SEED * 1000 + 500 + i, 4, 4, dB_zero=True)
        gd = S.gd
        assert gd.dB.is_zero()
        Th, _, _, _ = heat_pair(gd, 2)
        re, im = supertrace(Th.at_origin(2))
        want = -4 * bz(ahat_form(gd.R_minus, 4).grade(4))
        mism += not (re[0] == want and im[0] == 0)
    dt = time.perf_counter() - t
    ok = mism == 0 and dt < BUDGET[2]
    record(capsys, 2, ok, dt, f"{N4} exact n=4 jets with dB=0; mismatches={mism}")
    assert ok


def test_criterion_3_phi0_closed_forms(capsys, samples_k4):
    t = time.perf_counter()
    rep = CocycleReport()
    suite_n4(rep, samples_k4)
    wanted = ("phi0 vs A-hat(R^T) + dB terms", "phi0 vs A-hat(R_-) + dd*dB/6", "phi0 closed forms agree",
              "Theta_2 via Delta-bar + dB corrections", "tr((dB)_o^2) = 0", "tr(d_LC B_o (dB)_o) = 0",
              "tr(R_LC (dB)_o) = 2 kappa dB", "tr(B_o^2 (dB)_o) = -48 |B|^2 dB")
    rows = [r for r in rep.rows if r["check"] in wanted]
    nonzero_dB = sum(not S.gd.dB.is_zero() for S in samples_k4)
    bad = [r["check"] for r in rows if not r["ok"]]
    dt = time.perf_counter() - t
    sign = rep.notes["Theta_1^B sign"]
    ok = not bad and len(rows) == len(wanted) * N4 and nonzero_dB == N4 and dt < BUDGET[3]
    record(capsys, 3, ok, dt, f"{len(rows)} exact residuals over {N4} jets (dB!=0 on {nonzero_dB}); "
                              f"failed={sorted(set(bad))}; Theta_1 - Theta-bar_1 observed {sign}")
    assert ok


def test_criterion_4_phi2(capsys, samples_k5):
    t = time.perf_counter()
    bad, ratios, cp_ok = [], set(), True
    for S in samples_k5:
        gd, a = S.gd, S.a[:3]
        r = cc.phi_integrand(gd, a, 2)
        closed = bz(cc.p2_form(gd, a))
        if bz(r.total) != closed or closed == 0:
            bad.append(S.seed)
        for (k, j), d in r.parts.items():
            cp_ok &= d["c_prime"] == cc.cpk(2, k).c_prime and bz(d["weighted"]) == d["c_prime"] * bz(d["value"])
        parts = r.by_k()
        if any(bz(v) != 0 for k, v in parts.items() if sum(k) == 2):
            bad.append(S.seed)
        if closed != 0:
            ratios.add(tuple(bz(parts[k]) / closed / 6 for k in ((0, 0), (1, 0), (0, 1))))
    cps = (cc.cpk(2, (1, 0)).c_prime, cc.cpk(2, (0, 1)).c_prime, cc.cpk(2, (0, 0)).c_prime)
    dt = time.perf_counter() - t
    ok = (not bad and cp_ok and cps == (Q(-1, 6), Q(-1, 3), Q(1, 2)) and len(ratios) == 1
          and sum(next(iter(ratios))) == Q(1, 6) and dt < BUDGET[4])
    shares = [str(x) for x in next(iter(ratios))] if len(ratios) == 1 else "not constant"
    record(capsys, 4, ok, dt, f"total = a0 g(da1,da2) dB/6 on {N4} jets, bad={bad}; c'(1,0),c'(0,1),c'(0,0)="
                              f"{[str(c) for c in cps]}; per-k shares k=(0,0),(1,0),(0,1) of a0 g dB: {shares}; "
                              f"|k|=2 parts zero; prefactor {cc.prefactor(4)['symbolic']}")
    assert ok


def test_criterion_5_phi4(capsys, samples_k4):
    t = time.perf_counter()
    bad = []
    for S in samples_k4:
        gd, a = S.gd, S.a[:5]
        r = cc.phi_integrand(gd, a, 4)
        form = Multivector.scalar(4, a[0].scalar_part_array()[0])
        for f in a[1:]:
            form = wedge(form, cc.gradient_form(gd, f))
        if bz(form) == 0 or bz(r.total) / bz(form) != Q(1, 24):
            bad.append(S.seed)
    pref = cc.prefactor(4)["value"] / 24
    dt = time.perf_counter() - t
    ok = not bad and cmath.isclose(pref, (2j * math.pi) ** -2 / math.factorial(4)) and dt < BUDGET[5]
    record(capsys, 5, ok, dt, f"phi4 / (a0 da1..da4) = 1/4! exactly on {N4} jets, bad={bad}; "
                              f"coefficient (2 pi i)^-2/4! = {pref.real:.12e}")
    assert ok


def test_criterion_6_p6(capsys):
    t = time.perf_counter()
    rep = CocycleReport()
    samples = [random_sample(SEED * 1000 + 900 + i, 6, 6, density=0.05, nfun=1, ncomp=4) for i in range(N6)]
    suite_n6(rep, samples)
    rows = [r for r in rep.rows if r["check"].startswith("n6 phi0")]
    bar = [r for r in rep.rows if r["check"] == "n6 Theta-bar_3 supertrace vanishes"]
    nonzero = [r for r in rows if r["residual"] not in (0, "0")]
    dt = time.perf_counter() - t
    ok = len(rows) == N6 and not nonzero and dt < BUDGET[6]
    lines = [f"{r['sample']}: recursion B(Theta_3)={r['computed']} closed={r['closed_form']} "
             f"T1={r['detail']['variants']['torsion']['T1']} T2={r['detail']['variants']['torsion']['T2']}"
             for r in rows]
    record(capsys, 6, ok, dt, f"{N6} exact n=6 jets; nonzero residuals={len(nonzero)}; "
                              f"B(Theta-bar_3)=0 on {sum(r['ok'] for r in bar)}/{len(bar)}; "
                              f"breakdown: " + " | ".join(lines))
    assert ok, "closed form disagrees with the recursion; see breakdown"


def test_criterion_7_mehler_getzler(capsys, samples_k4):
    t = time.perf_counter()
    rep = CocycleReport()
    suite_mehler(rep, samples_k4)
    nmul = suite_symbol_multiplicativity(rep, NSYM, SEED)
    bad = sorted({r["check"] for r in rep.failures})
    dt = time.perf_counter() - t
    ok = not bad and nmul == NSYM and dt < BUDGET[7]
    record(capsys, 7, ok, dt, f"{len(rep.rows)} checks on {N4} jets (Theta-bar_j vs A-hat, sigma_2(Delta-bar), "
                              f"sigma_1(nabla)); multiplicativity {nmul}/{NSYM}; failed={bad}")
    assert ok


def test_criterion_8_bismut(capsys, samples_k4):
    t = time.perf_counter()
    rep = CocycleReport()
    suite_bismut(rep, samples_k4)
    d2 = [r for r in rep.rows if r["check"] == "D^2 = Delta"]
    dt = time.perf_counter() - t
    ok = len(d2) == N4 and all(r["ok"] for r in d2) and dt < BUDGET[8]
    record(capsys, 8, ok, dt, f"D^2 = Delta exactly on {sum(r['ok'] for r in d2)}/{N4} jets")
    assert ok


TORUS = dict(metric={"11": "1+0.1*sin(x1)", "22": "1+0.1*cos(x2)", "12": "0.05*sin(x1+x2)"},
             B={"123": "0.3*sin(x1)+0.2*cos(x2)", "234": "0.1*cos(x1)", "124": "0.2*sin(x2)"})
PHI2_ARGS = ["sin(x1)", "cos(x1)", "cos(x1)"]
PHI4_ARGS = ["cos(x1)*cos(x2)", "sin(x1)", "sin(x2)", "sin(x3)", "sin(x4)"]
# dB only sees x1 here; this family keeps single b-terms O(1) so the residual tests real cancellation
FAMILY = ["2+sin(x1)", "cos(x1)", "sin(x1)*sin(x2)+cos(x1)", "1+sin(x1)+cos(x2)"]


def test_criterion_9_torus(capsys):
    t = time.perf_counter()
    M = TorusManifold(4, **TORUS)
    q16 = TorusQuadrature(M, 16)
    phi0 = phi_value(4, q16.integrate(0, ["1"]))
    idx = index_pairing(M, "1", 16, quad=q16)
    bb = bB_residuals(q16, FAMILY)
    worst_bb = max(r["residual"] for r in bb)
    scale_bb = max(r["term_scale"] for r in bb if r["p"] == 2)
    v16 = {0: q16.integrate(0, ["1"]), 2: q16.integrate(2, PHI2_ARGS), 4: q16.integrate(4, PHI4_ARGS)}
    q32 = TorusQuadrature(M, 32)
    v32 = {0: q32.integrate(0, ["1"]), 2: q32.integrate(2, PHI2_ARGS), 4: q32.integrate(4, PHI4_ARGS)}
    change = {p: abs(phi_value(4, v32[p]) - phi_value(4, v16[p])) for p in v16}
    dt = time.perf_counter() - t
    ok = (abs(phi0) <= TOL_PHI0 and worst_bb <= TOL_BB and max(change.values()) <= TOL_REFINE
          and idx["distance"] <= TOL_INTEGER and abs(v16[2]) > 1e-3 and scale_bb > 1e-3 and dt < BUDGET[9])
    record(capsys, 9, ok, dt, f"16^4: |phi0(1)|={abs(phi0):.2e} (tol {TOL_PHI0:g}); max |b phi_p + B phi_p+2|="
                              f"{worst_bb:.2e} over {len(bb)} tuples (largest single phi2 term {scale_bb:.2e}, tol {TOL_BB:g}); "
                              f"16->32 change phi0/phi2/phi4 = {change[0]:.1e}/{change[2]:.1e}/{change[4]:.1e} "
                              f"(tol {TOL_REFINE:g}; |phi2 Berezin|={abs(v16[2]):.3e}); "
                              f"index distance {idx['distance']:.1e}")
    assert ok


if __name__ == "__main__":
    raise SystemExit(pytest.main(["-v", "-s", __file__]))
