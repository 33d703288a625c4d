"""Normal coordinates, synchronous frames and curvature data at a point.

Conventions: the connection with torsion is nabla = nabla^LC + B_o with
g(B_o(X)Y, Z) = 2 B(X, Y, Z), so in coordinates
nabla_{d_b} d_c = (Gamma^a_bc + 2 g^{ad} B_bcd) d_a.  Curvature
R(d_c, d_d) d_b = R^a_{bcd} d_a, and a matrix of forms stores
entry [a][b] = g(R e_a, e_b).
"""
from itertools import combinations

import numpy as np
from gmpy2 import mpq

from .jets import (Jet, PowerTable, euler_apply, inverse_euler, jet_exp, jet_mul,
                   nmono, wedge_mul)
from .multivector import FormMatrix, Multivector, blade_from_indices, o_flat, wedge
from .scalars import FLOAT, RATIONAL, Q, zeros


class GaugeError(ValueError):
    pass


# ---------------------------------------------------------------------------
# containers

class MetricJet:
    """Symmetric n x n matrix of scalar jets."""

    def __init__(self, comp):
        self.comp = [list(r) for r in comp]
        self.n = len(self.comp)

    @property
    def order(self):
        return min(c.order for r in self.comp for c in r)

    @property
    def mode(self):
        return self.comp[0][0].mode

    @property
    def batch(self):
        return max(c.batch for r in self.comp for c in r)

    def __getitem__(self, ij):
        return self.comp[ij[0]][ij[1]]

    def at_origin(self):
        """Array (n, n, batch) of g_ab(0)."""
        n = self.n
        out = zeros((n, n, self.batch), self.mode)
        for a in range(n):
            for b in range(n):
                out[a, b] = self.comp[a][b].scalar_part_array()[0]
        return out

    def truncate(self, K):
        return MetricJet([[c.truncate(K) for c in r] for r in self.comp])

    def take_batch(self, idx):
        return MetricJet([[c.take_batch(idx) for c in r] for r in self.comp])

    @classmethod
    def identity(cls, n, K, batch=1, mode=RATIONAL):
        return cls([[Jet.const(n, K, 1 if a == b else 0, batch, mode) for b in range(n)]
                    for a in range(n)])


class ThreeFormJet:
    """Antisymmetric B_abc stored for a < b < c (0-based)."""

    def __init__(self, n, comp, K=None, batch=1, mode=RATIONAL):
        self.n = n
        self.comp = {}
        for key, v in comp.items():
            blade, sign = blade_from_indices(tuple(k + 1 for k in key))
            if sign == 0:
                continue
            a, b, c = sorted(key)
            self.comp[(a, b, c)] = self.comp.get((a, b, c), 0) + (v if sign == 1 else -v)
        self._K, self._batch, self._mode = K, batch, mode

    @property
    def order(self):
        if self.comp:
            return min(v.order for v in self.comp.values())
        return self._K

    @property
    def mode(self):
        if self.comp:
            return next(iter(self.comp.values())).mode
        return self._mode

    @property
    def batch(self):
        if self.comp:
            return max(v.batch for v in self.comp.values())
        return self._batch

    def __call__(self, a, b, c):
        """B_abc with sign; None when zero by symmetry or absent."""
        if len({a, b, c}) < 3:
            return None
        key = tuple(sorted((a, b, c)))
        v = self.comp.get(key)
        if v is None:
            return None
        _, sign = blade_from_indices((a + 1, b + 1, c + 1))
        return v if sign == 1 else -v

    def truncate(self, K):
        return ThreeFormJet(self.n, {k: v.truncate(K) for k, v in self.comp.items()}, K,
                            self.batch, self.mode)

    def take_batch(self, idx):
        return ThreeFormJet(self.n, {k: v.take_batch(idx) for k, v in self.comp.items()},
                            self._K, 1, self.mode)

    def as_form(self):
        """Multivector-valued jet in the coordinate coframe."""
        return coordinate_form(self.n, self.comp, self.order, self.batch, self.mode)

    @classmethod
    def zero(cls, n, K, batch=1, mode=RATIONAL):
        return cls(n, {}, K, batch, mode)


def coordinate_form(n, comp, K, batch, mode):
    """Form-valued jet sum_I f_I dx^I from {index tuple (0-based, increasing): scalar jet}."""
    out = Jet.zero(n, K, batch, mode)
    for key, f in comp.items():
        mask, sign = blade_from_indices(tuple(k + 1 for k in key))
        mv = Multivector.from_dict(n, {mask: sign}, mode, 1)
        out = out + f.truncate(K).mul_mv(mv)
    return out


# ---------------------------------------------------------------------------
# helpers on matrices of scalar jets

def mul_val(a, b, vb):
    """a*b when b vanishes to order ``vb`` at 0: known to order min(Ka + vb, Kb)."""
    K = min(a.order + vb, b.order)
    a = a.extend(K) if K > a.order else a.truncate(K)
    return jet_mul(a, b.truncate(K))


def mat_mul(A, B):
    n, m, p = len(A), len(B), len(B[0])
    out = []
    for i in range(n):
        row = []
        for j in range(p):
            acc = None
            for k in range(m):
                t = jet_mul(A[i][k], B[k][j])
                acc = t if acc is None else acc + t
            row.append(acc)
        out.append(row)
    return out


def mat_add(A, B):
    return [[x + y for x, y in zip(r, s)] for r, s in zip(A, B)]


def mat_transpose(A):
    return [list(r) for r in zip(*A)]


def mat_inverse_near_identity(G):
    """Inverse of a matrix of jets whose constant term is the identity."""
    n = len(G)
    K = min(c.order for r in G for c in r)
    H = [[G[a][b] - (1 if a == b else 0) for b in range(n)] for a in range(n)]
    for a in range(n):
        for b in range(n):
            c0 = H[a][b].scalar_part_array()[0]
            if np.any(np.abs(c0.astype(float)) > 1e-9):
                raise GaugeError("metric constant term is not the identity")
            H[a][b] = H[a][b].without_constant()
    ident = [[Jet.const(G[0][0].n, K, 1 if a == b else 0, G[0][0].batch, G[0][0].mode)
              for b in range(n)] for a in range(n)]
    X = ident
    # X_{s+1} = I - H X_s fixes one more degree per sweep
    for _ in range(K):
        HX = mat_mul(H, X)
        X = [[ident[a][b] - HX[a][b] for b in range(n)] for a in range(n)]
    return X


def christoffel(g, ginv, K=None):
    """Gamma[a][b][c] = Gamma^a_bc of a metric given as jets (order K-1)."""
    n = len(g)
    Kg = min(c.order for r in g for c in r)
    K = Kg - 1 if K is None else K
    dg = [[[g[a][b].deriv(c).truncate(K) for c in range(n)] for b in range(n)] for a in range(n)]
    low = {}
    for d in range(n):
        for b in range(n):
            for c in range(b, n):
                low[d, b, c] = (dg[d][c][b] + dg[d][b][c] - dg[b][c][d]).scale(
                    mpq(1, 2) if g[0][0].mode == RATIONAL else 0.5)
    Gam = [[[None] * n for _ in range(n)] for _ in range(n)]
    for a in range(n):
        for b in range(n):
            for c in range(b, n):
                acc = None
                for d in range(n):
                    t = jet_mul(ginv[a][d].truncate(K), low[d, b, c])
                    acc = t if acc is None else acc + t
                Gam[a][b][c] = acc
                Gam[a][c][b] = acc
    return Gam


def _det3(J, rows, cols):
    (r0, r1, r2), (c0, c1, c2) = rows, cols
    m = lambda r, c: J[r][c]
    t1 = jet_mul(m(r0, c0), jet_mul(m(r1, c1), m(r2, c2)) - jet_mul(m(r1, c2), m(r2, c1)))
    t2 = jet_mul(m(r0, c1), jet_mul(m(r1, c0), m(r2, c2)) - jet_mul(m(r1, c2), m(r2, c0)))
    t3 = jet_mul(m(r0, c2), jet_mul(m(r1, c0), m(r2, c1)) - jet_mul(m(r1, c1), m(r2, c0)))
    return t1 - t2 + t3


# ---------------------------------------------------------------------------
# normal coordinates

class NormalChart:
    """Map from normal coordinates v to input coordinates x = X(v), as jets."""

    def __init__(self, X, linear):
        self.X = X
        self.linear = linear  # array (n, n, batch): x = L y before the geodesic map
        self._tables = {}

    @property
    def n(self):
        return len(self.X)

    @property
    def order(self):
        return min(f.order for f in self.X)

    def table(self, K):
        if K not in self._tables:
            self._tables[K] = PowerTable(self.X, K)
        return self._tables[K]

    def pullback(self, f, K=None):
        """Jet of f(X(v)) for a jet f in input coordinates."""
        K = min(f.order, self.order) if K is None else K
        return self.table(K).apply(f)

    def take_batch(self, idx):
        out = NormalChart([x.take_batch(idx) for x in self.X], self.linear[:, :, idx])
        for K, t in self._tables.items():
            out._tables[K] = t.take_batch(idx)
        return out


def _linear_normalization(g, mode):
    """Lower-triangular change x = L y with L^T g(0) L = I (float mode)."""
    G0 = g.at_origin()
    n = g.n
    if mode == RATIONAL:
        ident = all(G0[a, b, 0] == (1 if a == b else 0) for a in range(n) for b in range(n))
        if not ident:
            raise GaugeError("rational mode needs g(0) = identity; use float mode")
        return None
    G0 = np.moveaxis(G0.astype(np.float64), 2, 0)
    try:
        C = np.linalg.cholesky(G0)
    except np.linalg.LinAlgError as exc:
        raise GaugeError("metric constant term is not positive definite") from exc
    ident = np.eye(n)[None]
    if np.all(np.abs(G0 - ident) == 0):
        return None
    L = np.linalg.inv(np.swapaxes(C, 1, 2))  # upper triangular, x = L y
    return np.moveaxis(L, 0, 2)


def _linear_jets(L, n, K, batch, mode):
    """Coordinate jets x^c = sum_a L[c, a] y_a."""
    out = []
    for c in range(n):
        f = Jet.zero(n, K, batch, mode, (0,))
        for a in range(n):
            f = f + Jet.var(n, K, a, batch, mode).scale(L[c, a])
        out.append(f)
    return out


def _transform_tensors(g, B, X, Kg, KB):
    """Pull back metric and 3-form along coordinate jets X (no constant term)."""
    n = g.n
    K = max(Kg, KB if B is not None else 0)
    KX = min(f.order for f in X)
    table = PowerTable(X, min(K, KX))
    J = [[X[c].deriv(a) for a in range(n)] for c in range(n)]  # J[c][a] = d_a X^c
    gF = [[table.apply(g[c, d].truncate(Kg)) for d in range(n)] for c in range(n)]
    Jg = [[J[c][a].truncate(Kg) for a in range(n)] for c in range(n)]
    # g'_ab = sum_cd J^c_a g_cd J^d_b
    tmp = [[None] * n for _ in range(n)]
    for c in range(n):
        for b in range(n):
            acc = None
            for d in range(n):
                t = jet_mul(gF[c][d], Jg[d][b])
                acc = t if acc is None else acc + t
            tmp[c][b] = acc
    gn = [[None] * n for _ in range(n)]
    for a in range(n):
        for b in range(a, n):
            acc = None
            for c in range(n):
                t = jet_mul(Jg[c][a], tmp[c][b])
                acc = t if acc is None else acc + t
            gn[a][b] = acc
            gn[b][a] = acc
    Bn = None
    if B is not None:
        JB = [[J[c][a].truncate(KB) for a in range(n)] for c in range(n)]
        comp = {}
        BF = {k: table.apply(v.truncate(KB)) for k, v in B.comp.items()}
        for cols in combinations(range(n), 3):
            acc = None
            for rows, f in BF.items():
                t = jet_mul(f, _det3(JB, rows, cols))
                acc = t if acc is None else acc + t
            if acc is not None:
                comp[cols] = acc
        Bn = ThreeFormJet(n, comp, KB, g.batch, g.mode)
    return MetricJet(gn), Bn


def normal_chart(g, K=None):
    """Geodesic normal chart of a metric jet, as coordinate jets of order K+1."""
    n = g.n
    mode = g.mode
    batch = g.batch
    Kg = g.order if K is None else K
    L = _linear_normalization(g, mode)
    if L is not None:
        lin = _linear_jets(L, n, Kg + 1, batch, mode)
        g1, _ = _transform_tensors(g.truncate(Kg), None, lin, Kg, 0)
        # the constant term is the identity up to rounding; make it exact
        for a in range(n):
            for b in range(n):
                g1.comp[a][b].coeffs[0, 0, :] = 1.0 if a == b else 0.0
    else:
        g1 = g.truncate(Kg)
    ginv = mat_inverse_near_identity(g1.comp)
    Gam = christoffel(g1.comp, ginv)
    F = _geodesic_map(Gam, n, Kg + 1, batch, mode)
    if L is not None:
        X = []
        for c in range(n):
            f = Jet.zero(n, Kg + 1, batch, mode, (0,))
            for a in range(n):
                f = f + F[a].scale(L[c, a])
            X.append(f)
    else:
        X = F
        L = np.zeros((n, n, batch))
        L[np.arange(n), np.arange(n), :] = 1.0
    return NormalChart(X, L)


def _geodesic_map(Gam, n, Kmax, batch, mode):
    """F(v) = x(1, v) for geodesics with x(0) = 0, x'(0) = v, to order Kmax."""
    F = [Jet.var(n, Kmax, a, batch, mode) for a in range(n)]
    for m in range(2, Kmax + 1):
        Fm = [f.truncate(m) for f in F]
        EF = [euler_apply(f) for f in Fm]
        table = PowerTable(Fm, m - 2) if m - 2 >= 1 else None
        newF = []
        for a in range(n):
            acc = None
            for b in range(n):
                for c in range(b, n):
                    G = Gam[a][b][c].truncate(m - 2)
                    if G.is_zero():
                        continue
                    GF = table.apply(G) if table is not None else G
                    q = jet_mul(EF[b], EF[c])
                    if b != c:
                        q = q.scale(2)
                    t = mul_val(GF, q, 2)
                    acc = t if acc is None else acc + t
            if acc is None:
                newF.append(F[a])
                continue
            # m(m-1) F_m = -W_m
            Wm = acc.homogeneous(m)
            fac = Q(-1, m * (m - 1)) if mode == RATIONAL else -1.0 / (m * (m - 1))
            upd = Wm.extend(Kmax).scale(fac)
            newF.append(F[a] + upd)
        F = newF
    return F


def to_normal_coordinates(g, B, K=None, return_chart=False):
    """Metric and 3-form jets re-expressed in geodesic normal coordinates.

    Input jets are centred at the point; the output metric satisfies
    g(0) = I and sum_b g_ab(x) x_b = x_a to order K.
    """
    Kg = g.order if K is None else K
    chart = normal_chart(g, Kg)
    KB = min(B.order, Kg) if B is not None and B.comp else Kg
    gn, Bn = _transform_tensors(g.truncate(Kg), B.truncate(KB) if B is not None and B.comp else None,
                                chart.X, Kg, KB)
    if Bn is None:
        Bn = ThreeFormJet.zero(g.n, KB, g.batch, g.mode)
    if return_chart:
        return gn, Bn, chart
    return gn, Bn


def gauge_residual(g):
    """max |sum_b g_ab x_b - x_a| over coefficients (0 in exact normal gauge)."""
    n = g.n
    K = g.order
    worst = 0
    for a in range(n):
        acc = Jet.var(n, K + 1, a, g.batch, g.mode).scale(-1)
        for b in range(n):
            acc = acc + g[a, b].xmul(b)
        c = acc.truncate(K).coeffs
        worst = max(worst, np.max(np.abs(c)) if c.size else 0)
    return worst


def check_gauge(g, tol=1e-9):
    r = gauge_residual(g)
    if g.mode == RATIONAL:
        if r != 0:
            raise GaugeError("metric jets are not in normal-coordinate gauge")
    else:
        scale = max(1.0, float(np.max(np.abs(g.at_origin().astype(float)))))
        if r > tol * scale:
            raise GaugeError(f"normal-coordinate gauge violated by {float(r):.3e}")
    return r


# ---------------------------------------------------------------------------
# synchronous frame and curvature

def _curvature_at_origin(Gam, n, mode, batch):
    """R^a_{bcd}(0) as an array (n, n, n, n, batch) from Christoffel jets (order >= 1)."""
    G0 = zeros((n, n, n, batch), mode)
    dG = zeros((n, n, n, n, batch), mode)  # dG[a,b,c,d] = d_d Gamma^a_bc (0)
    for a in range(n):
        for b in range(n):
            for c in range(n):
                jet = Gam[a][b][c]
                G0[a, b, c] = jet.scalar_part_array()[0]
                for d in range(n):
                    e = [0] * n
                    e[d] = 1
                    dG[a, b, c, d] = jet.scalar_part_array()[_lin_index(n, d)]
    R = zeros((n, n, n, n, batch), mode)
    for a in range(n):
        for b in range(n):
            for c in range(n):
                for d in range(n):
                    v = dG[a, d, b, c] - dG[a, c, b, d]
                    for e in range(n):
                        v = v + G0[a, c, e] * G0[e, d, b] - G0[a, d, e] * G0[e, c, b]
                    R[a, b, c, d] = v
    return R


def _lin_index(n, d):
    return 1 + d  # degree-one monomials follow the constant in graded order


def form_matrix_from_tensor(R, n, mode):
    """Matrix of 2-forms with entry [a][b] = g(R e_a, e_b) = sum_{c<d} R[b,a,c,d] e_cd."""
    batch = R.shape[-1]
    out = []
    for a in range(n):
        row = []
        for b in range(n):
            terms = {}
            for c in range(n):
                for d in range(c + 1, n):
                    v = R[b, a, c, d]
                    if np.any(v != 0):
                        terms[(c + 1, d + 1)] = v
            row.append(Multivector.from_dict(n, terms, mode, batch))
        out.append(row)
    return FormMatrix(out)


def frame_form(form, theta):
    """Re-express a coordinate-coframe form jet in the orthonormal frame.

    ``theta[a]`` is the 1-form dx^a written in the frame (sum_i E_i^a e_i).
    """
    n = form.n
    out = None
    cache = {0: Jet.const(n, theta[0].order, 1, form.batch, form.mode)}

    def wedge_of(mask):
        if mask in cache:
            return cache[mask]
        top = mask.bit_length() - 1
        rest = mask & ~(1 << top)
        w = wedge_mul(wedge_of(rest), theta[top])
        cache[mask] = w
        return w

    for i, b in enumerate(form.blades):
        comp = Jet(n, form.order, (0,), form.coeffs[:, i:i + 1, :])
        if comp.is_zero():
            continue
        t = jet_mul(comp, wedge_of(b))
        out = t if out is None else out + t
    if out is None:
        return Jet.zero(n, form.order, form.batch, form.mode)
    return out


def exterior_derivative(form):
    """d of a coordinate-coframe form jet: sum_a dx^a ^ d_a(form)."""
    n = form.n
    out = None
    for a in range(n):
        ea = Multivector.basis(n, a + 1, mode=form.mode, batch=1)
        t = wedge_mul(Jet.from_mv(ea, form.order - 1), form.deriv(a))
        out = t if out is None else out + t
    return out


class GeomData:
    """Synchronous-frame package at a point (see :func:`geom_data`)."""

    def __init__(self, **kw):
        self.__dict__.update(kw)

    def take(self, names):
        return {k: getattr(self, k) for k in names}


def geom_data(g, B=None, K=None, check=True, point_curvature=True):
    """Synchronous normal-coordinate package for metric/3-form jets in normal gauge.

    Orders: with metric order K, Christoffel symbols have order K-1, the
    frame E order K, the connection matrices omega order K-1.
    """
    n = g.n
    mode = g.mode
    batch = g.batch
    K = g.order if K is None else K
    g = g.truncate(K)
    if B is None:
        B = ThreeFormJet.zero(n, K, batch, mode)
    KB = min(B.order, K) if B.comp else K
    if check:
        check_gauge(g)
    half = mpq(1, 2) if mode == RATIONAL else 0.5
    gcomp = g.comp
    ginv = mat_inverse_near_identity(gcomp)
    Gam = christoffel(gcomp, ginv)
    # contorsion 2 g^{ad} B_bcd
    KG = Gam[0][0][0].order
    Kt = min(KG, KB)
    Gt = [[[Gam[a][b][c].truncate(Kt) for c in range(n)] for b in range(n)] for a in range(n)]
    Gm = [[[Gam[a][b][c].truncate(Kt) for c in range(n)] for b in range(n)] for a in range(n)]
    if B.comp:
        for a in range(n):
            for b in range(n):
                for c in range(n):
                    if b == c:
                        continue
                    acc = None
                    for d in range(n):
                        Bbcd = B(b, c, d)
                        if Bbcd is None:
                            continue
                        t = jet_mul(ginv[a][d].truncate(Kt), Bbcd.truncate(Kt))
                        acc = t if acc is None else acc + t
                    if acc is not None:
                        Gt[a][b][c] = Gt[a][b][c] + acc.scale(2)
                        Gm[a][b][c] = Gm[a][b][c] - acc.scale(2)
    # synchronous frame: E_i^a, solve E(E) = -M E with M^a_c = x_b Gt^a_bc
    KE = Kt + 1
    M = [[None] * n for _ in range(n)]
    for a in range(n):
        for c in range(n):
            acc = None
            for b in range(n):
                t = Gt[a][b][c].xmul(b)
                acc = t if acc is None else acc + t
            M[a][c] = acc
    ident = [[Jet.const(n, KE, 1 if a == i else 0, batch, mode) for i in range(n)] for a in range(n)]
    E = ident
    for s in range(1, KE + 1):
        Es = [[E[a][i].truncate(s - 1) for i in range(n)] for a in range(n)]
        newE = []
        for a in range(n):
            row = []
            for i in range(n):
                acc = None
                for c in range(n):
                    t = mul_val(Es[c][i], M[a][c].truncate(s), 1)
                    acc = t if acc is None else acc + t
                row.append(ident[a][i] - inverse_euler(acc).extend(KE))
            newE.append(row)
        E = newE
    # E[a][i] = E_i^a
    Eg = [[None] * n for _ in range(n)]  # (E^T g)[i][a] = sum_d E_i^d g_da
    for i in range(n):
        for a in range(n):
            acc = None
            for d in range(n):
                t = jet_mul(E[d][i].truncate(KE - 1), gcomp[d][a].truncate(KE - 1))
                acc = t if acc is None else acc + t
            Eg[i][a] = acc
    Ko = KE - 1
    omega = []
    for b in range(n):
        W = [[None] * n for _ in range(n)]
        for a in range(n):
            for j in range(n):
                acc = E[a][j].deriv(b).truncate(Ko)
                for c in range(n):
                    acc = acc + jet_mul(Gt[a][b][c].truncate(Ko), E[c][j].truncate(Ko))
                W[a][j] = acc
        # om[i][j] = g(nabla_b E_i, E_j)
        om = [[None] * n for _ in range(n)]
        for i in range(n):
            for j in range(n):
                acc = None
                for a in range(n):
                    t = jet_mul(Eg[j][a].truncate(Ko), W[a][i])
                    acc = t if acc is None else acc + t
                om[i][j] = acc
        omega.append(om)
    Omega = [spin_lift_jet(om, n, mode) for om in omega]
    # coframe dx^a = sum_i E_i^a ... inverse: dx^a(E_i) = E_i^a
    theta = []
    for a in range(n):
        acc = None
        for i in range(n):
            ei = Multivector.basis(n, i + 1, mode=mode)
            t = E[a][i].mul_mv(ei)
            acc = t if acc is None else acc + t
        theta.append(acc)
    # B, dB in the frame
    Bcoord = B.as_form() if B.comp else Jet.zero(n, KB, batch, mode)
    Bfr = frame_form(Bcoord.truncate(min(KB, KE)), theta) if B.comp else Jet.zero(n, min(KB, KE), batch, mode)
    dBcoord = exterior_derivative(Bcoord) if B.comp and KB >= 1 else Jet.zero(n, max(KB - 1, 0), batch, mode)
    dBfr = frame_form(dBcoord.truncate(min(dBcoord.order, KE)), theta) if B.comp else dBcoord
    normB2 = _norm_sq(Bfr)
    # divergence field nu^a = sum_i (E_i(E_i^a) + Gamma^a_bc E_i^b E_i^c)
    nu = []
    for a in range(n):
        acc = None
        for i in range(n):
            for b in range(n):
                t = jet_mul(E[b][i].truncate(Ko), E[a][i].deriv(b).truncate(Ko))
                acc = t if acc is None else acc + t
                for c in range(n):
                    t = jet_mul(Gam[a][b][c].truncate(Ko),
                                jet_mul(E[b][i].truncate(Ko), E[c][i].truncate(Ko)))
                    acc = acc + t
        nu.append(acc)
    # scalar curvature jet
    kappa = _scalar_curvature(Gam, ginv, n)
    # density
    logdet = _log_det(gcomp)
    quarter = mpq(1, 4) if mode == RATIONAL else 0.25
    varrho = jet_exp(logdet.scale(quarter))
    varrho_inv = jet_exp(logdet.scale(-quarter))
    gd = GeomData(n=n, mode=mode, batch=batch, order=K, g=g, B=B, ginv=ginv, Gamma=Gam,
                  Gamma_t=Gt, Gamma_m=Gm, E=E, omega=omega, Omega=Omega, theta=theta,
                  Bcoord=Bcoord, Bfr=Bfr, dBcoord=dBcoord, dBfr=dBfr, normB2_jet=normB2,
                  nu=nu, kappa_jet=kappa, log_det=logdet, varrho=varrho, varrho_inv=varrho_inv)
    if point_curvature:
        _point_values(gd)
    return gd


def spin_lift_jet(om, n, mode):
    """Clifford-valued jet 1/4 sum_ij om_ij e_i e_j = 1/2 sum_{i<j} om_ij e_ij."""
    acc = None
    c = mpq(1, 2) if mode == RATIONAL else 0.5
    for i in range(n):
        for j in range(i + 1, n):
            eij = Multivector.basis(n, i + 1, j + 1, mode=mode)
            t = om[i][j].mul_mv(eij).scale(c)
            acc = t if acc is None else acc + t
    return acc


def _norm_sq(form):
    """sum over blades of coefficient^2 (|B|^2 with the sum over i<j<k)."""
    acc = Jet.zero(form.n, form.order, form.batch, form.mode, (0,))
    for i in range(len(form.blades)):
        comp = Jet(form.n, form.order, (0,), form.coeffs[:, i:i + 1, :])
        acc = acc + jet_mul(comp, comp)
    return acc


def _log_det(G):
    """log det of a jet matrix with identity constant term (trace of the log series)."""
    n = len(G)
    K = min(c.order for r in G for c in r)
    mode = G[0][0].mode
    H = [[(G[a][b] - (1 if a == b else 0)).without_constant() for b in range(n)] for a in range(n)]
    out = Jet.zero(G[0][0].n, K, G[0][0].batch, mode, (0,))
    P = H
    k = 1
    while k <= K:
        tr = None
        for a in range(n):
            tr = P[a][a] if tr is None else tr + P[a][a]
        c = mpq((-1) ** (k + 1), k) if mode == RATIONAL else (-1.0) ** (k + 1) / k
        out = out + tr.scale(c)
        k += 1
        if k <= K:
            P = mat_mul(P, H)
    return out


def _scalar_curvature(Gam, ginv, n):
    """kappa = g^{bd} Ric_bd with Ric_bd = sum_a R^a_{bad}."""
    K = Gam[0][0][0].order - 1
    G = [[[Gam[a][b][c].truncate(K) for c in range(n)] for b in range(n)] for a in range(n)]
    kappa = None
    for b in range(n):
        for d in range(b, n):
            acc = None
            for a in range(n):
                t = Gam[a][d][b].deriv(a) - Gam[a][a][b].deriv(d)
                acc = t if acc is None else acc + t
                for e in range(n):
                    acc = acc + jet_mul(G[a][a][e], G[e][d][b]) - jet_mul(G[a][d][e], G[e][a][b])
            t = jet_mul(ginv[b][d].truncate(K), acc)
            if b != d:
                t = t.scale(2)
            kappa = t if kappa is None else kappa + t
    return kappa


def _point_values(gd):
    n, mode, batch = gd.n, gd.mode, gd.batch
    R = _curvature_at_origin(gd.Gamma_t, n, mode, batch)
    RLC = _curvature_at_origin(gd.Gamma, n, mode, batch)
    Rm = _curvature_at_origin(gd.Gamma_m, n, mode, batch)
    gd.R_tensor, gd.RLC_tensor, gd.Rm_tensor = R, RLC, Rm
    gd.R = form_matrix_from_tensor(R, n, mode)
    gd.R_LC = form_matrix_from_tensor(RLC, n, mode)
    gd.R_minus = form_matrix_from_tensor(Rm, n, mode)
    from .multivector import transpose_top
    gd.R_top = transpose_top(gd.R)
    gd.kappa = gd.kappa_jet.scalar_part_array()[0]
    gd.dB = gd.dBfr.value() if gd.dBfr.order >= 0 else Multivector.zero(n, batch, mode)
    gd.B0 = gd.Bfr.value()
    gd.normB2 = gd.normB2_jet.scalar_part_array()[0]
    gd.B_o = o_flat(gd.B0)
    gd.dB_o = o_flat(gd.dB)
    gd.nu_e = [v.scalar_part_array()[0] for v in gd.nu]
    if n == 4 and gd.dBcoord.order >= 2:
        gd.dcodB = codifferential_point(gd.g, gd.dBcoord)
    else:
        gd.dcodB = None


def codifferential_point(g, nu):
    """d d^* nu at the origin for a top-degree form jet in normal coordinates.

    With f = nu_{1..n} / sqrt(det g) the value is -sum_a d_a^2 f(0) vol.
    """
    n = g.n
    top = (1 << n) - 1
    for b in nu.blades:
        if b != top and np.any(nu.coeffs[:, nu.blades.index(b)] != 0):
            raise ValueError("unsupported degree: only top-degree forms are handled")
    if nu.order < 2:
        raise ValueError("codifferential needs a jet of order >= 2")
    f = nu.component(top)
    K = f.order
    gK = g.truncate(min(K, g.order))
    logdet = _log_det(gK.comp)
    inv_sqrt = jet_exp(logdet.scale(mpq(-1, 2) if g.mode == RATIONAL else -0.5))
    h = jet_mul(f.truncate(min(K, inv_sqrt.order)), inv_sqrt)
    val = None
    for a in range(n):
        t = h.deriv(a).deriv(a).scalar_part_array()[0]
        val = t if val is None else val + t
    return Multivector.from_dict(n, {top: -val}, g.mode, g.batch)


def _jet_derivs(jet, n, mode, batch):
    """(value, first derivatives [x], second derivatives [x, y]) at the origin."""
    from .jets import mono_index
    s = jet.scalar_part_array()
    idx = mono_index(n, jet.order)
    v0 = s[0]
    d1 = zeros((n, batch), mode)
    d2 = zeros((n, n, batch), mode)
    for x in range(n):
        e = [0] * n
        e[x] = 1
        d1[x] = s[idx[tuple(e)]]
        if jet.order >= 2:
            for y in range(n):
                e2 = [0] * n
                e2[x] += 1
                e2[y] += 1
                d2[x, y] = s[idx[tuple(e2)]] * (2 if x == y else 1)
    return v0, d1, d2


def curvature_derivative_at_origin(Gam, n, mode, batch):
    """(R^a_{bcd}(0), d_x R^a_{bcd}(0)) for Christoffel jets of order >= 2."""
    G0 = zeros((n, n, n, batch), mode)
    G1 = zeros((n, n, n, n, batch), mode)
    G2 = zeros((n, n, n, n, n, batch), mode)
    for a in range(n):
        for b in range(n):
            for c in range(n):
                G0[a, b, c], G1[a, b, c], G2[a, b, c] = _jet_derivs(Gam[a][b][c], n, mode, batch)
    R0 = _curvature_at_origin(Gam, n, mode, batch)
    dR = zeros((n, n, n, n, n, batch), mode)
    for a in range(n):
        for b in range(n):
            for c in range(n):
                for d in range(n):
                    for x in range(n):
                        v = G2[a, d, b, c, x] - G2[a, c, b, d, x]
                        for e in range(n):
                            v = v + (G1[a, c, e, x] * G0[e, d, b] + G0[a, c, e] * G1[e, d, b, x]
                                     - G1[a, d, e, x] * G0[e, c, b] - G0[a, d, e] * G1[e, c, b, x])
                        dR[a, b, c, d, x] = v
    return R0, dR
