import math

import numpy as np
import pytest

from rescocycle.cocycle import phi_integrand
from rescocycle.exprs import parse, taylor_jet
from rescocycle.geometry import geom_data, to_normal_coordinates
from rescocycle.multivector import berezin
from rescocycle.scalars import FLOAT
from rescocycle.torus import (NumericError, PeriodicityError, TorusManifold, TorusQuadrature, bB_check,
                              index_pairing, phi_p, required_order)

CURVED = dict(metric={"11": "1+0.2*cos(x1)", "22": "1+0.1*sin(x1)", "12": "0.05*sin(x1)"},
              B={"234": "0.3*cos(x1)", "123": "0.2*sin(x1)"})


@pytest.fixture(scope="module")
def flat_q():
    return TorusQuadrature(TorusManifold(4), 8, workers=1)


@pytest.fixture(scope="module")
def curved():
    M = TorusManifold(4, **CURVED)
    return M, TorusQuadrature(M, 8, workers=1)


def test_required_order():
    assert required_order(4, 0) == 4
    assert required_order(4, 4) == 2
    assert required_order(4, 2) == 5
    assert required_order(6, 2) == 9


def test_manifold_validation():
    with pytest.raises(ValueError):
        TorusManifold(3)
    with pytest.raises(PeriodicityError):
        TorusManifold(4, metric={"11": "1+0.1*x1"})
    with pytest.raises(ValueError):
        TorusManifold(4, B={"112": "1"})
    M = TorusManifold(4, B={"213": "cos(x2)"})
    assert M.B_src[(0, 1, 2)] == "-(cos(x2))"
    assert M.geometry_axes() == (1,)


def test_singular_metric():
    M = TorusManifold(4, metric={"11": "cos(x1)"})
    with pytest.raises(NumericError):
        TorusQuadrature(M, 4, ps=[0], workers=1)


def test_flat_examples(flat_q):
    M = flat_q.M
    assert phi_p(M, ["1"], 0, 8, quad=flat_q) == 0
    assert phi_p(M, ["sin(x1)"], 0, 8, quad=flat_q) == 0
    assert abs(phi_p(M, ["cos(x2)", "sin(x1)", "cos(x1+x3)"], 2, 8, quad=flat_q)) == 0


def test_flat_phi4_analytic(flat_q):
    a = ["cos(x1)*cos(x2)*cos(x3)*cos(x4)", "sin(x1)", "sin(x2)", "sin(x3)", "sin(x4)"]
    got = phi_p(flat_q.M, a, 4, 8, quad=flat_q)
    # (2 pi i)^{-2} / 4! * int prod cos^2 = -pi^2 / 96
    assert abs(got - (-math.pi ** 2 / 96)) < 1e-8


def test_index_flat(flat_q):
    r = index_pairing(flat_q.M, "1", 8, quad=flat_q)
    assert r["nearest_integer"] == 0 and r["distance"] < 1e-12
    assert index_pairing(flat_q.M, "0", 8, quad=flat_q)["index"] == 0
    r2 = index_pairing(flat_q.M, [["1", "0"], ["0", "0"]], 8, quad=flat_q)
    assert r2["index"] == r["index"]
    with pytest.raises(NumericError):
        index_pairing(flat_q.M, "0.5", 8, quad=flat_q)


def test_bB_constants_and_flat(flat_q):
    for r in bB_check(flat_q.M, ["1", "2"], 8, quad=flat_q):
        assert r["residual"] == 0
    for r in bB_check(flat_q.M, ["sin(x1)", "cos(x2)", "sin(x3+x4)", "cos(x1-x4)"], 8, quad=flat_q):
        assert r["residual"] < 1e-12


def test_curved_phi0_small(curved):
    M, q = curved
    coarse = abs(phi_p(M, ["1"], 0, 8, quad=q))
    fine = abs(phi_p(M, ["1"], 0, 16))
    assert coarse < 1e-5
    assert fine < 1e-10 and fine < coarse * 1e-3


def test_phi2_kparts(curved):
    M, q = curved
    tot, parts = phi_p(M, ["sin(x1)", "cos(x1)", "cos(x1)"], 2, 8, quad=q, by_k=True)
    assert abs(tot) > 1e-4
    for k, v in parts.items():
        if sum(k) == 2:
            assert abs(v) < 1e-14
    assert math.fsum(parts.values()) == pytest.approx(tot / (2j * math.pi) ** -2, rel=1e-10)


def test_linearized_matches_direct(curved):
    M, q = curved
    srcs = ["2+sin(x1)*cos(x3)", "cos(x1)+sin(x2)", "sin(x1+x4)"]
    args = [[[parse(s, 4)]] for s in srcs]
    pts = np.array([[0.7, 1.1, 2.0, 0.3], [2.5, 0.0, 1.0, 4.0]])
    gidx = np.array([1, 3])
    pts[:, 0] = gidx * q.h[0]
    lin = q.integrand_matrix(2, args, pts, gidx)
    K = required_order(4, 2)
    for i, y in enumerate(pts):
        g, B = M.jets_at(y[None, :], K)
        gn, Bn, chart = to_normal_coordinates(g, B, K, return_chart=True)
        gd = geom_data(gn, Bn, K, check=False, point_curvature=False)
        jets = [chart.pullback(taylor_jet(parse(s, 4), list(y), K, FLOAT, 4), K) for s in srcs]
        direct = berezin(phi_integrand(gd, jets, 2).total)[0]
        assert lin[i] == pytest.approx(direct, rel=1e-9, abs=1e-13)


def test_taylor_degree_independence(curved):
    M, q = curved
    q2 = TorusQuadrature(M, 8, ps=[2], D=2, workers=1)
    a = ["sin(x1)", "cos(x1)+sin(x3)", "cos(x1)"]
    assert q.integrate(2, a) == pytest.approx(q2.integrate(2, a), rel=1e-10, abs=1e-15)


def test_parallel_matches_serial(curved):
    M, q = curved
    qp = TorusQuadrature(M, 8, ps=[0, 2], workers=2, chunk=2)
    assert np.array_equal(qp.T.W[2], q.T.W[2])
    assert qp.integrate(0, ["1"]) == q.integrate(0, ["1"])


def test_bB_cancels_nonzero_terms(curved):
    M, q = curved
    rows = bB_check(M, ["2+sin(x1)", "cos(x1)", "sin(x1)*sin(x2)+cos(x1)", "1+sin(x1)+cos(x2)"], 8, quad=q)
    p2 = [r for r in rows if r["p"] == 2]
    assert max(r["term_scale"] for r in p2) > 1e-3
    assert all(r["residual"] < 1e-12 * max(1.0, r["term_scale"]) for r in rows)
