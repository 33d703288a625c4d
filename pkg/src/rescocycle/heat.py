"""Heat-kernel coefficients from the radial transport recursion.

Theta_0 = rho^{-1},  Theta_j = -rho^{-1} int_0^1 t^{j-1} rho(tx) (L Theta_{j-1})(tx) dt,
with rho = det(g)^{1/4} in normal coordinates and L the Laplacian in the
synchronous frame.
"""
from gmpy2 import mpq

from .jets import Jet, euler_apply, jet_mul, radial_integral
from .multivector import ahat_form
from .operators import build_laplacian
from .scalars import RATIONAL


class HeatCoeffs:
    """Theta_0..Theta_jmax as Clifford-valued jets."""

    def __init__(self, thetas, bar, order):
        self.thetas = thetas
        self.bar = bar
        self.order = order

    def __getitem__(self, j):
        if j < 0:
            return None
        return self.thetas[j]

    def __len__(self):
        return len(self.thetas)

    def at_origin(self, j):
        if j < 0:
            return None
        return self.thetas[j].value()


def required_metric_order(jmax):
    """Metric jet order needed for Theta_jmax at the origin."""
    return 2 * jmax


def heat_coeffs(L, gd, jmax, bar=None):
    """Run the recursion with the operator L (Delta or Delta-bar)."""
    if jmax < 0:
        raise ValueError("jmax must be non-negative")
    if jmax > 0 and L.order < 2 * jmax - 2:
        raise ValueError(f"operator order {L.order} too low for Theta_{jmax}: "
                         f"need {2 * jmax - 2}; raise the jet order")
    thetas = [gd.varrho_inv]
    for j in range(1, jmax + 1):
        prev = thetas[-1]
        if prev.order < L.diff_order:
            raise ValueError(f"truncation order too low for Theta_{j}")
        LT = L.apply(prev)
        K = LT.order
        f = jet_mul(gd.varrho.truncate(K), LT)
        f = radial_integral(j, f)
        thetas.append(-jet_mul(gd.varrho_inv.truncate(K), f))
    return HeatCoeffs(thetas, bar, gd.order)


def heat_pair(gd, jmax):
    """(Theta, Theta-bar, Delta, Delta-bar) for the same geometry."""
    L = build_laplacian(gd, include_dB=True)
    Lb = build_laplacian(gd, include_dB=False)
    return heat_coeffs(L, gd, jmax, bar=False), heat_coeffs(Lb, gd, jmax, bar=True), L, Lb


def transport_residual(L, gd, hc, j):
    """E Theta_j + (j + E log rho) Theta_j + L Theta_{j-1}; zero to truncation order."""
    th = hc[j]
    K = th.order
    if j >= 1:
        LT = L.apply(hc[j - 1])
        K = min(K, LT.order)
    q = mpq(1, 4) if gd.mode == RATIONAL else 0.25
    elog = euler_apply(gd.log_det.truncate(K)).scale(q)
    th = th.truncate(K)
    res = euler_apply(th) + th.scale(j) + jet_mul(elog, th)
    if j >= 1:
        res = res + LT.truncate(K)
    return res


def theta1B(gd):
    """-rho^{-1} int_0^1 c(dB)(tx) dt."""
    f = radial_integral(1, gd.dBfr)
    K = f.order
    return -jet_mul(gd.varrho_inv.truncate(K), f)


def mehler_symbols(gd, jmax=None):
    """Degree-2j parts of det^{1/2}((R^T/2)/sinh(R^T/2)) for j = 0..jmax."""
    n = gd.n
    if jmax is None:
        jmax = n // 2
    if 2 * jmax > n:
        raise ValueError("jmax must not exceed n/2")
    A = ahat_form(gd.R_top, 2 * jmax)
    return [A.grade(2 * j) for j in range(jmax + 1)]
