import random

import pytest
from hypothesis import given, settings, strategies as st

from rescocycle.geometry import MetricJet, ThreeFormJet, geom_data
from rescocycle.heat import heat_coeffs, heat_pair, mehler_symbols, theta1B, transport_residual
from rescocycle.jets import Jet
from rescocycle.multivector import Multivector
from rescocycle.operators import (GetzlerSymbol, SFibredOp, TruncationError, bar_laplacian_symbol_reference,
                                  build_dirac, build_laplacian, build_Pk, clifford_differential,
                                  conjugate_by_h, getzler_order, getzler_rescale, hP_components)
from rescocycle.scalars import Q
from rescocycle.verify import random_operator, random_sample

E = Multivector.basis


def unit(n, a, k=1):
    return tuple(k if i == a else 0 for i in range(n))


def flat(n=4, K=4, B=None):
    return geom_data(MetricJet.identity(n, K), B or ThreeFormJet.zero(n, K))


def const_B(n=4, K=4):
    comp = {(0, 1, 2): Jet.const(n, K, Q(1, 2)), (1, 2, 3): Jet.const(n, K, Q(-1, 3))}
    return ThreeFormJet(n, comp, K)


def test_flat_dirac_and_laplacian():
    gd = flat()
    D = build_dirac(gd)
    want = None
    for a in range(4):
        t = SFibredOp(4, gd.order, {(unit(4, a), 0): Jet.from_mv(E(4, a + 1), gd.order)})
        want = t if want is None else want + t
    assert D == want
    L = build_laplacian(gd)
    want = None
    for a in range(4):
        t = SFibredOp(4, gd.order, {(unit(4, a, 2), 0): Jet.const(4, gd.order, -1)})
        want = t if want is None else want + t
    K = min(L.order, want.order)
    assert L.truncate(K) == want.truncate(K)


def test_constant_B_dirac_square():
    gd = flat(B=const_B())
    D = build_dirac(gd)
    L = build_laplacian(gd)
    D2 = D @ D
    K = min(D2.order, L.order)
    assert D2.truncate(K) == L.truncate(K)
    # flat, dB = 0: Delta = -sum d^2 - 2|B|^2
    assert L.coefficient((0, 0, 0, 0)).value() == -2 * (Q(1, 4) + Q(1, 9))


@pytest.mark.parametrize("seed", range(3))
def test_dirac_square_random(seed):
    gd = random_sample(seed, 4, 4).gd
    D2 = build_dirac(gd) @ build_dirac(gd)
    L = build_laplacian(gd)
    K = min(D2.order, L.order)
    assert (D2.truncate(K) - L.truncate(K)).is_zero()


def test_conjugation_examples():
    n, K = 4, 3
    C = conjugate_by_h(SFibredOp.partial(n, 0, K))
    want = SFibredOp(n, K, {(unit(n, 0), 0): Jet.const(n, K, 1),
                            ((0,) * n, -1): Jet.var(n, K, 0).scale(Q(-1, 2))})
    assert C == want
    f = Jet.from_poly(n, K, {(1, 1, 0, 0): 3, (0, 0, 0, 0): 1})
    assert conjugate_by_h(SFibredOp.mult(f)) == SFibredOp.mult(f)
    L = build_laplacian(flat(n, 4))
    CL = conjugate_by_h(L)
    r2 = sum((Jet.var(n, CL.order, a) * Jet.var(n, CL.order, a) for a in range(n)), Jet.zero(n, CL.order, blades=(0,)))
    want = (L.truncate(CL.order) + SFibredOp.euler(n, CL.order).shift_t(-1)
            + SFibredOp.mult(Jet.const(n, CL.order, Q(n, 2)), -1) + SFibredOp.mult(r2.scale(Q(-1, 4)), -2))
    assert CL == want


def test_hP_components():
    S = random_sample(4, 4, 5)
    gd, a = S.gd, S.a
    P0 = build_Pk(gd, a[:3], (0, 0))
    comps = hP_components(P0, 0)
    assert set(comps) == {0} and comps[0] == P0
    P1 = build_Pk(gd, a[:3], (1, 0))
    comps = hP_components(P1, 1)
    assert comps[0].vanishes_on_diagonal()
    with pytest.raises(ValueError):
        build_Pk(gd, a[:3], (1,))


def test_getzler_examples():
    n, K = 4, 4
    gd = flat(n, K)
    f = Jet.from_poly(n, K, {(1, 0, 0, 0): 2, (0, 0, 1, 0): -1})
    cdf = SFibredOp.mult(clifford_differential(gd, f))
    assert getzler_order(cdf) == 1
    df = Multivector.from_dict(n, {(1,): 2, (3,): -1})
    assert getzler_rescale(cdf, 1) == GetzlerSymbol.const(df)
    Eul = SFibredOp.euler(n, K)
    assert getzler_order(Eul) == 0
    assert getzler_rescale(Eul, 0) == GetzlerSymbol.from_op(Eul)
    with pytest.raises(ValueError):
        getzler_rescale(cdf, 0)


@pytest.mark.parametrize("seed", range(3))
def test_bar_laplacian_symbol(seed):
    gd = random_sample(seed, 4, 4).gd
    Lb = build_laplacian(gd, include_dB=False)
    assert getzler_rescale(Lb, 2) == bar_laplacian_symbol_reference(gd.R_top, 4)


def test_truncation_guard():
    with pytest.raises(TruncationError):
        SFibredOp.partial(2, 0, 0) @ SFibredOp.mult(Jet.var(2, 0, 0))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_symbol_multiplicative(seed):
    rng = random.Random(seed)
    A, B = random_operator(rng, 2, 8), random_operator(rng, 2, 8)
    mA, mB = getzler_order(A), getzler_order(B)
    if mA is None or mB is None:
        return
    assert getzler_rescale(A @ B, mA + mB) == getzler_rescale(A, mA) @ getzler_rescale(B, mB)


# heat coefficients -----------------------------------------------------------

def test_heat_flat_and_const_B():
    Th, Tb, L, Lb = heat_pair(flat(), 2)
    assert Th.at_origin(0) == 1
    assert Th.at_origin(1).is_zero() and Th.at_origin(2).is_zero()
    gd = flat(B=const_B())
    Th, Tb, L, Lb = heat_pair(gd, 1)
    assert Tb.at_origin(1) == 2 * (Q(1, 4) + Q(1, 9))
    assert theta1B(gd).is_zero()


@pytest.mark.parametrize("seed", range(3))
def test_heat_recursion_properties(seed):
    gd = random_sample(seed, 4, 5).gd
    Th, Tb, L, Lb = heat_pair(gd, 2)
    for j in (1, 2):
        assert transport_residual(L, gd, Th, j).is_zero()
        assert transport_residual(Lb, gd, Tb, j).is_zero()
    assert Th.at_origin(1) - Tb.at_origin(1) == -gd.dB
    assert theta1B(gd).value() == -gd.dB
    ms = mehler_symbols(gd, 2)
    assert ms[0] == 1 and ms[1].is_zero()
    assert ms[2] == (gd.R_top @ gd.R_top).trace().scale(Q(-1, 48))
    for j in range(3):
        assert Tb.at_origin(j).grade(2 * j) == ms[j]


def test_heat_order_guard():
    gd = random_sample(0, 4, 2).gd
    with pytest.raises(ValueError):
        heat_coeffs(build_laplacian(gd), gd, 3)
    with pytest.raises(ValueError):
        heat_coeffs(None, gd, -1)
