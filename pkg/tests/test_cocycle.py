import cmath

import pytest

from rescocycle import cocycle as cc
from rescocycle.heat import heat_pair
from rescocycle.multivector import berezin
from rescocycle.scalars import Q
from rescocycle.verify import random_sample


def bz(mv):
    return berezin(mv)[0]


def test_cpk_examples():
    assert cc.cpk(2, (1, 0)).c_prime == Q(-1, 6)
    assert cc.cpk(2, (0, 1)).c_prime == Q(-1, 3)
    assert cc.cpk(2, (0, 0)).c_prime == Q(1, 2)
    assert cc.cpk(0).c_prime == 1
    assert cc.cpk(4, (0, 0, 0, 0)).c_prime == Q(1, 24)
    c = cc.cpk(2, (1, 0))
    assert c.gamma_arg == 2
    assert c.c_value == pytest.approx(-1 / 6)
    for bad in [(3, (0, 0, 0)), (2, (1,)), (2, (-1, 0)), (-2, ())]:
        with pytest.raises(ValueError):
            cc.cpk(*bad)


def test_admissible_terms():
    assert cc.admissible_terms(4, 0) == [((), 2, 0)]
    assert cc.admissible_terms(4, 4) == [((0, 0, 0, 0), 0, 0)]
    t2 = cc.admissible_terms(4, 2)
    ks = {k for k, j, l in t2}
    assert ks == {(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)}
    assert all(j + l == 1 for k, j, l in t2)
    with pytest.raises(ValueError):
        cc.admissible_terms(4, 3)


def test_prefactor_consistency():
    # (4 pi)^{-n/2} (-2i)^{n/2} = (2 pi i)^{-n/2}
    for n in (2, 4, 6):
        lhs = (4 * cmath.pi) ** (-(n // 2)) * (-2j) ** (n // 2)
        assert lhs == pytest.approx(cc.prefactor(n)["value"])


@pytest.mark.parametrize("seed", range(3))
def test_phi0_two_routes(seed):
    S = random_sample(seed, 4, 5)
    gd = S.gd
    Th, Tb, L, Lb = heat_pair(gd, 2)
    r = cc.phi_integrand(gd, [S.a[0]], 0, heat=Th, laplacian=L)
    forms = cc.phi0_forms(gd, S.a[0])
    assert bz(r.total) == bz(forms["R_top"]) == bz(forms["R_minus"])
    assert bz(Th.at_origin(2)) == bz(cc.theta_half_route_b(gd, Lb, L))


@pytest.mark.parametrize("seed", range(3))
def test_trace_identities(seed):
    gd = random_sample(seed, 4, 4).gd
    t = cc.trace_identities(gd)
    assert t["tr(dB_o^2)"].is_zero()
    assert t["tr(d_LC B_o dB_o)"].is_zero()
    assert t["tr(R_LC dB_o)"] == t["2 kappa dB"]
    assert t["tr(B_o^2 dB_o)"] == t["-48 |B|^2 dB"]


@pytest.mark.parametrize("seed", range(2))
def test_phi2_total_and_breakdown(seed):
    S = random_sample(seed, 4, 5)
    gd, a = S.gd, S.a
    r = cc.phi_integrand(gd, a[:3], 2)
    closed = bz(cc.p2_form(gd, a[:3]))
    assert bz(r.total) == closed
    parts = r.by_k()
    for k, v in parts.items():
        if sum(k) == 2:
            assert bz(v) == 0
    if closed != 0:
        # in units of a0 g(da1, da2) dB: 1/2, 1/3, -2/3
        assert bz(parts[(0, 0)]) / closed == 3
        assert bz(parts[(1, 0)]) / closed == 2
        assert bz(parts[(0, 1)]) / closed == -4
    # totals equal the sum of parts
    acc = 0
    for d in r.parts.values():
        acc += bz(d["weighted"])
    assert acc == bz(r.total)


def test_phi4_coefficient():
    S = random_sample(11, 4, 4, nfun=5)
    r = cc.phi_integrand(S.gd, S.a[:5], 4)
    assert bz(r.total) == bz(cc.dbzero_form(S.gd, S.a[:5]))


@pytest.mark.parametrize("seed", range(2))
def test_dbzero(seed):
    S = random_sample(500 + seed, 4, 5, dB_zero=True)
    gd, a = S.gd, S.a
    assert gd.dB.is_zero()
    for p in (0, 2, 4):
        r = cc.phi_integrand(gd, a[:p + 1], p)
        assert bz(r.total) == bz(cc.dbzero_form(gd, a[:p + 1]))


def test_phi_integrand_guards():
    S = random_sample(0, 4, 5)
    with pytest.raises(ValueError):
        cc.phi_integrand(S.gd, S.a[:2], 2)
