import random

import numpy as np
import pytest

from rescocycle.geometry import (MetricJet, ThreeFormJet, codifferential_point, gauge_residual, geom_data,
                                 to_normal_coordinates)
from rescocycle.jets import Jet
from rescocycle.multivector import Multivector, o_flat, transpose_top
from rescocycle.scalars import FLOAT, Q
from rescocycle.verify import random_metric, random_sample, random_three_form


def all_zero(M):
    return all(x.is_zero() for r in M.entries for x in r)


def test_flat_geometry():
    g = MetricJet.identity(4, 4)
    gd = geom_data(g, ThreeFormJet.zero(4, 4))
    assert all_zero(gd.R) and all_zero(gd.R_LC) and all_zero(gd.R_minus)
    assert gd.kappa[0] == 0
    assert (gd.varrho - 1).is_zero()
    assert all(w.is_zero() for mat in gd.omega for row in mat for w in row)


def test_flat_normal_coordinates_unchanged():
    rng = random.Random(2)
    g = MetricJet.identity(4, 3)
    B = random_three_form(rng, 4, 3, ncomp=2)
    gn, Bn = to_normal_coordinates(g, B)
    for key, v in B.comp.items():
        assert (Bn.comp[key] - v).is_zero()
    assert gauge_residual(gn) == 0


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_normal_gauge_reached(seed):
    rng = random.Random(seed)
    g = random_metric(rng, 4, 3, density=0.4)
    gn, _ = to_normal_coordinates(g, None)
    assert gauge_residual(gn) == 0


@pytest.mark.parametrize("seed", range(5))
def test_torsion_curvature_split(seed):
    gd = random_sample(seed, 4, 4).gd
    assert gd.R_top == gd.R_minus + gd.dB_o
    assert gd.R.is_antisymmetric() and gd.R_minus.is_antisymmetric()
    # pair symmetry of the Levi-Civita curvature
    assert transpose_top(gd.R_LC) == gd.R_LC


def test_b_zero_transpose_fixed():
    gd = random_sample(7, 4, 4, dB_zero=True).gd
    gd0 = geom_data(gd.g, ThreeFormJet.zero(4, gd.order))
    assert gd0.R_top == gd0.R


@pytest.mark.parametrize("seed", range(4))
def test_dB_o_square_traceless(seed):
    gd = random_sample(seed, 4, 4).gd
    S = o_flat(gd.dB).transpose()
    assert (S @ S).trace().is_zero()


def test_codifferential_examples():
    g = MetricJet.identity(4, 3)
    nu = Jet.monomial(4, 3, (2, 0, 0, 0)).mul_mv(Multivector.basis(4, 1, 2, 3, 4))
    assert codifferential_point(g, nu) == Multivector.basis(4, 1, 2, 3, 4).scale(-2)
    const = Jet.from_mv(Multivector.basis(4, 1, 2, 3, 4).scale(5), 3)
    assert codifferential_point(g, const).is_zero()
    with pytest.raises(ValueError):
        codifferential_point(g, Jet.from_mv(Multivector.basis(4, 1, 2), 3))


def test_float_matches_rational_geometry():
    S = random_sample(3, 4, 4)
    gd = S.gd
    gf = MetricJet([[Jet(4, c.order, c.blades, c.coeffs.astype(float)) for c in r] for r in gd.g.comp])
    Bf = ThreeFormJet(4, {k: Jet(4, v.order, v.blades, v.coeffs.astype(float)) for k, v in gd.B.comp.items()})
    gdf = geom_data(gf, Bf)
    assert gdf.mode == FLOAT
    for a in range(4):
        for b in range(4):
            ex = gd.R_top[a, b].as_dict()
            fl = gdf.R_top[a, b].as_dict()
            for k in set(ex) | set(fl):
                assert float(fl.get(k, 0.0)) == pytest.approx(float(ex.get(k, Q(0))), abs=1e-12)
