"""Cocycle components on flat tori by tensor-product trapezoidal quadrature.

Per grid point y the engine produces the local integrands in normal
coordinates.  Each phi_p integrand is multilinear in the Taylor data of
a_1..a_p at y, so it is stored as a tensor W_p(y) over coordinate monomials
(x - y)^alpha, 1 <= |alpha| <= D, evaluated once per geometry point and
contracted with the Taylor coefficients of the actual functions.
"""
import math
import os
from concurrent.futures import ProcessPoolExecutor
from itertools import product

import numpy as np

from .cocycle import admissible_terms, phi_integrand, prefactor
from .exprs import ExprError, parse, taylor_jet, variables
from .geometry import MetricJet, ThreeFormJet, geom_data, to_normal_coordinates
from .heat import heat_coeffs
from .jets import Jet, mono_index, monomials
from .multivector import berezin
from .operators import build_laplacian
from .scalars import FLOAT


class NumericError(ArithmeticError):
    """Singular metric on the grid, failed idempotency, or non-finite output."""


class PeriodicityError(ValueError):
    pass


def required_order(n, p):
    """Metric jet order needed for the phi_p integrand at a point."""
    if p == n:
        return 2  # geometry package differentiates the metric twice
    if p == 0:
        return n
    return 2 * (n - p) + 1


def worker_count():
    env = os.environ.get("COCYCLE_THREADS")
    if env:
        try:
            w = int(env)
        except ValueError:
            raise ValueError(f"COCYCLE_THREADS must be an integer, got {env!r}") from None
        if w < 1:
            raise ValueError("COCYCLE_THREADS must be positive")
        return w
    return os.cpu_count() or 1


def _parse_component(src, n):
    if isinstance(src, (int, float)):
        src = repr(src)
    e = parse(str(src), n)
    bad = [v for v in variables(e) if v > n]
    if bad:
        raise ExprError(f"variable x{bad[0]} outside dimension {n}")
    return e


def _index_key(key, n, arity):
    """'12', '1,2', (1, 2) or [1, 2] -> tuple of 0-based indices."""
    if isinstance(key, str):
        parts = key.split(",") if "," in key else list(key)
        idx = tuple(int(p) for p in parts)
    else:
        idx = tuple(int(p) for p in key)
    if len(idx) != arity or any(not 1 <= i <= n for i in idx):
        raise ValueError(f"bad component index {key!r}")
    return tuple(i - 1 for i in idx)


class TorusManifold:
    """R^n / (periods Z^n) with metric and 3-form given by expressions in x1..xn."""

    def __init__(self, n, metric=None, B=None, periods=None, check=True):
        if n < 2 or n % 2:
            raise ValueError("dimension must be even and at least 2")
        self.n = n
        self.periods = np.full(n, 2 * math.pi) if periods is None else np.asarray(periods, float)
        if self.periods.shape != (n,) or np.any(self.periods <= 0):
            raise ValueError("periods must be n positive numbers")
        self.metric_src = {}
        g = [[None] * n for _ in range(n)]
        for key, src in (metric or {}).items():
            a, b = _index_key(key, n, 2)
            e = _parse_component(src, n)
            if g[a][b] is not None and g[a][b] is not e:
                raise ValueError(f"metric component ({a + 1},{b + 1}) given twice")
            g[a][b] = g[b][a] = e
            self.metric_src[(min(a, b), max(a, b))] = str(src)
        for a in range(n):
            for b in range(n):
                if g[a][b] is None:
                    g[a][b] = parse("1" if a == b else "0", n)
        self.g_expr = g
        self.B_expr = {}
        self.B_src = {}
        for key, src in (B or {}).items():
            idx = _index_key(key, n, 3)
            if len(set(idx)) < 3:
                raise ValueError(f"3-form component {key!r} has a repeated index")
            order = sorted(idx)
            sign = 1
            for i in range(3):
                for j in range(i + 1, 3):
                    if idx[i] > idx[j]:
                        sign = -sign
            e = _parse_component(src if sign == 1 else f"-({src})", n)
            if tuple(order) in self.B_expr:
                raise ValueError(f"3-form component {key!r} given twice")
            self.B_expr[tuple(order)] = e
            self.B_src[tuple(order)] = str(src) if sign == 1 else f"-({src})"
        if check:
            self.check_periodic()

    @classmethod
    def flat(cls, n):
        return cls(n)

    def expressions(self):
        out = [self.g_expr[a][b] for a in range(self.n) for b in range(a, self.n)]
        return out + list(self.B_expr.values())

    def geometry_axes(self):
        used = set()
        for e in self.expressions():
            used |= {v - 1 for v in variables(e)}
        return tuple(sorted(used))

    def check_periodic(self, exprs=None, samples=8, tol=1e-9, seed=0):
        """Compare values at x and x + period along each axis at sample points."""
        check_periodic(exprs if exprs is not None else self.expressions(), self.periods,
                       samples, tol, seed)

    def metric_at(self, pts):
        """Array (P, n, n) of metric values at points (P, n)."""
        n = self.n
        cols = [pts[:, a] for a in range(n)]
        G = np.empty((len(pts), n, n))
        for a in range(n):
            for b in range(a, n):
                v = taylor_jet(self.g_expr[a][b], cols, 0, FLOAT, n).coeffs[0, 0]
                G[:, a, b] = G[:, b, a] = v
        return G

    def jets_at(self, pts, K):
        """MetricJet and ThreeFormJet centred at a batch of points."""
        n = self.n
        cols = [pts[:, a] for a in range(n)]
        comp = [[None] * n for _ in range(n)]
        for a in range(n):
            for b in range(a, n):
                comp[a][b] = comp[b][a] = taylor_jet(self.g_expr[a][b], cols, K, FLOAT, n)
        Bj = ThreeFormJet(n, {k: taylor_jet(e, cols, K - 1 if K >= 1 else 0, FLOAT, n)
                              for k, e in self.B_expr.items()}, max(K - 1, 0), len(pts), FLOAT)
        return MetricJet(comp), Bj


def check_periodic(exprs, periods, samples=8, tol=1e-9, seed=0):
    n = len(periods)
    rng = np.random.default_rng(seed)
    pts = rng.uniform(0, 1, size=(samples, n)) * periods
    for e in exprs:
        v0 = taylor_jet(e, [pts[:, a] for a in range(n)], 0, FLOAT, n).coeffs[0, 0]
        for a in range(n):
            sh = pts.copy()
            sh[:, a] += periods[a]
            v1 = taylor_jet(e, [sh[:, b] for b in range(n)], 0, FLOAT, n).coeffs[0, 0]
            if np.max(np.abs(v1 - v0)) > tol * max(1.0, np.max(np.abs(v0))):
                from .exprs import to_source
                raise PeriodicityError(f"expression {to_source(e)} is not periodic in x{a + 1}")


# ---------------------------------------------------------------------------
# per-point tensors

def taylor_basis(n, D):
    """Coordinate monomials alpha with 1 <= |alpha| <= D, graded order."""
    return [tuple(int(v) for v in m) for m in monomials(n, D) if 1 <= sum(m) <= D]


class PointTensors:
    """Per geometry point: volume factor, phi_0 density, W_p tensors (total and per k)."""

    def __init__(self, n, D, vol, W, Wk):
        self.n = n
        self.D = D
        self.vol = vol        # (G,) sqrt det g
        self.W = W            # {p: (G, nb, ..., nb)} Berezin densities
        self.Wk = Wk          # {p: {k: array}}

    @staticmethod
    def concat(parts):
        n, D = parts[0].n, parts[0].D
        vol = np.concatenate([q.vol for q in parts])
        W = {p: np.concatenate([q.W[p] for q in parts]) for p in parts[0].W}
        Wk = {p: {k: np.concatenate([q.Wk[p][k] for q in parts]) for k in parts[0].Wk[p]}
              for p in parts[0].Wk}
        return PointTensors(n, D, vol, W, Wk)


def point_tensors(M, pts, ps, D=1, order=None):
    """Engine evaluation of the local integrands at a batch of points."""
    n = M.n
    ps = sorted(set(ps))
    K = order if order is not None else max(required_order(n, p) for p in ps)
    Kf = max(K, D)
    G0 = M.metric_at(pts)
    ev = np.linalg.eigvalsh(G0)
    if np.any(ev <= 0) or not np.all(np.isfinite(ev)):
        raise NumericError("metric is not positive definite on the grid")
    vol = np.sqrt(np.linalg.det(G0))
    g, B = M.jets_at(pts, Kf)
    gn, Bn, chart = to_normal_coordinates(g, B, Kf, return_chart=True)
    gd = geom_data(gn, Bn, Kf, check=False, point_curvature=False)
    L = build_laplacian(gd, include_dB=True) if any(p < n for p in ps) else None
    jmax = max((n - p) // 2 for p in ps)
    hc = heat_coeffs(L, gd, jmax) if L is not None else heat_coeffs(None, gd, 0)
    basis = taylor_basis(n, D)
    idx = mono_index(n, Kf)
    bjets = []
    for alpha in basis:
        m = Jet.const(n, Kf, 0, 1, FLOAT)
        m.coeffs[idx[alpha], 0, 0] = 1.0
        bjets.append(chart.pullback(m, Kf))
    one = Jet.const(n, Kf, 1, 1, FLOAT)
    nb = len(basis)
    W, Wk = {}, {}
    for p in ps:
        shape = (len(pts),) + (nb,) * p
        W[p] = np.zeros(shape)
        ks = sorted({k for k, _, _ in admissible_terms(n, p)})
        Wk[p] = {k: np.zeros(shape) for k in ks}
        if p == 0:
            r = phi_integrand(gd, [one], 0, heat=hc, laplacian=L)
            W[0][:] = np.asarray(berezin(r.total), float)
            for k, v in r.by_k().items():
                Wk[0][k][:] = np.asarray(berezin(v), float)
            continue
        for tup in product(range(nb), repeat=p):
            r = phi_integrand(gd, [one] + [bjets[i] for i in tup], p, heat=hc, laplacian=L)
            sl = (slice(None),) + tup
            W[p][sl] = np.asarray(berezin(r.total), float)
            for k, v in r.by_k().items():
                Wk[p][k][sl] = np.asarray(berezin(v), float)
    return PointTensors(n, D, vol, W, Wk)


def _point_tensors_job(args):
    return point_tensors(*args)


# ---------------------------------------------------------------------------
# quadrature

class TorusQuadrature:
    """Cached per-point tensors of a torus on an N^n grid."""

    def __init__(self, M, grid, ps=None, D=1, order=None, workers=None, chunk=32):
        if grid < 4:
            raise ValueError("grid must have at least 4 points per dimension")
        self.M = M
        self.N = int(grid)
        self.n = M.n
        self.D = D
        self.ps = sorted(set(range(0, M.n + 1, 2) if ps is None else ps))
        self.axes = M.geometry_axes()
        self.h = M.periods / self.N
        self.weight = float(np.prod(self.h))
        axes_pts = [np.arange(self.N) * self.h[a] for a in self.axes]
        self.geo_pts = np.zeros((self.N ** len(self.axes), self.n))
        if self.axes:
            mesh = np.meshgrid(*axes_pts, indexing="ij")
            for i, a in enumerate(self.axes):
                self.geo_pts[:, a] = mesh[i].ravel()
        workers = worker_count() if workers is None else workers
        chunks = [self.geo_pts[i:i + chunk] for i in range(0, len(self.geo_pts), chunk)]
        jobs = [(M, c, self.ps, D, order) for c in chunks]
        if workers > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as ex:
                parts = list(ex.map(_point_tensors_job, jobs))
        else:
            parts = [_point_tensors_job(j) for j in jobs]
        self.T = PointTensors.concat(parts)
        for p, w in self.T.W.items():
            if not np.all(np.isfinite(w)):
                raise NumericError(f"non-finite phi_{p} integrand")

    @property
    def basis(self):
        return taylor_basis(self.n, self.D)

    def grid_chunks(self, size=1 << 15):
        """(points (P, n), geometry index (P,)) in lexicographic grid order."""
        n, N = self.n, self.N
        total = N ** n
        strides = [N ** len(self.axes[i + 1:]) for i in range(len(self.axes))]
        for start in range(0, total, size):
            lin = np.arange(start, min(total, start + size))
            ijk = np.array(np.unravel_index(lin, (N,) * n)).T
            pts = ijk * self.h
            gidx = np.zeros(len(lin), dtype=np.int64)
            for i, a in enumerate(self.axes):
                gidx += ijk[:, a] * strides[i]
            yield pts, gidx

    def taylor_data(self, e, pts):
        """(values (P,), Taylor coefficients (P, nb)) of an expression."""
        J = taylor_jet(e, [pts[:, a] for a in range(self.n)], self.D, FLOAT, self.n)
        idx = mono_index(self.n, self.D)
        c = J.scalar_part_array()
        return c[0], np.stack([c[idx[al]] for al in self.basis], axis=1)

    def integrand_matrix(self, p, args, pts, gidx, W=None):
        """Pointwise sum_alpha W tr(m_0 T_1[alpha_1] ... T_p[alpha_p]) for matrix arguments.

        args: p + 1 matrices (lists of lists) of parsed expressions.
        """
        W = self.T.W[p] if W is None else W
        data = []
        for A in args:
            r, c = len(A), len(A[0])
            vals = np.empty((len(pts), r, c))
            tay = np.empty((len(pts), len(self.basis), r, c))
            for i in range(r):
                for j in range(c):
                    v, t = self.taylor_data(A[i][j], pts)
                    vals[:, i, j] = v
                    tay[:, :, i, j] = t
            data.append((vals, tay))
        Wg = W[gidx]
        if p == 0:
            return Wg * np.trace(data[0][0], axis1=1, axis2=2)
        # chain product over the p derivative slots: prod[:, a_1..a_i] matrices
        m0 = data[0][0]
        prod = data[1][1]  # (P, nb, r, c)
        for i in range(2, p + 1):
            t = data[i][1]
            prod = np.einsum("p...ab,pkbc->p...kac", prod, t)
        tr = np.einsum("pab,p...ba->p...", m0, prod)
        return np.sum(Wg * tr, axis=tuple(range(1, p + 1)))

    def integrate(self, p, args, by_k=False):
        """sum_y w(y) vol(y) integrand(y), math.fsum in grid order; Berezin scale."""
        args = [_as_matrix(a, self.n) for a in args]
        if len(args) != p + 1:
            raise ValueError(f"phi_{p} takes {p + 1} arguments")
        if p not in self.T.W:
            raise ValueError(f"phi_{p} was not precomputed for this grid")
        keys = [None] + (sorted(self.T.Wk[p]) if by_k else [])
        acc = {k: [] for k in keys}
        for pts, gidx in self.grid_chunks():
            vol = self.T.vol[gidx]
            for k in keys:
                W = self.T.W[p] if k is None else self.T.Wk[p][k]
                vals = self.integrand_matrix(p, args, pts, gidx, W) * vol * self.weight
                acc[k].append(vals)
        out = {k: math.fsum(np.concatenate(v)) for k, v in acc.items()}
        if not all(math.isfinite(v) for v in out.values()):
            raise NumericError("non-finite quadrature result")
        return out if by_k else out[None]


def _as_matrix(a, n):
    """Expression, source string or matrix of those -> matrix of parsed expressions."""
    if isinstance(a, (list, tuple)) and a and isinstance(a[0], (list, tuple)):
        rows = [[_as_expr(x, n) for x in row] for row in a]
        if len({len(r) for r in rows}) != 1:
            raise ValueError("ragged matrix")
        return rows
    return [[_as_expr(a, n)]]


def _as_expr(x, n):
    if isinstance(x, (str, int, float)):
        return _parse_component(x, n)
    return x


def phi_value(n, berezin_integral):
    """Complex value (2 pi i)^{-n/2} * Berezin integral."""
    return prefactor(n)["value"] * berezin_integral


def phi_p(M, a, p, grid, quad=None, D=1, by_k=False):
    """phi_p(a_0..a_p) as a complex number (and per-k Berezin integrals if by_k)."""
    q = quad if quad is not None else TorusQuadrature(M, grid, ps=[p], D=D)
    res = q.integrate(p, a, by_k=by_k)
    if by_k:
        total = res.pop(None)
        return phi_value(M.n, total), res
    return phi_value(M.n, res)


def index_pairing(M, e, grid, quad=None, tol=1e-8):
    """phi_0(e) + sum_{p>0} (-1)^{p/2} p!/(p/2)! phi_p(e - 1/2, e, ..., e)."""
    n = M.n
    q = quad if quad is not None else TorusQuadrature(M, grid)
    E = _as_matrix(e, n)
    k = len(E)
    if any(len(r) != k for r in E):
        raise ValueError("idempotent must be a square matrix")
    check_periodic([x for r in E for x in r], M.periods)
    worst = 0.0
    for pts, _ in q.grid_chunks():
        vals = np.empty((len(pts), k, k))
        for i in range(k):
            for j in range(k):
                vals[:, i, j] = taylor_jet(E[i][j], [pts[:, a] for a in range(n)], 0, FLOAT, n).coeffs[0, 0]
        worst = max(worst, float(np.max(np.abs(vals @ vals - vals))) if len(pts) else 0.0)
    if worst > tol:
        raise NumericError(f"e is not idempotent on the grid (max |e^2 - e| = {worst:.3e})")
    from .exprs import Num, Sub
    shifted = [[Sub(E[i][j], Num("1/2")) if i == j else E[i][j] for j in range(k)] for i in range(k)]
    terms = {0: phi_value(n, q.integrate(0, [E]))}
    total = terms[0]
    for p in range(2, n + 1, 2):
        if p not in q.T.W:
            continue
        v = phi_value(n, q.integrate(p, [shifted] + [E] * p))
        c = (-1) ** (p // 2) * math.factorial(p) / math.factorial(p // 2)
        terms[p] = c * v
        total += c * v
    nearest = round(total.real)
    return {"index": total, "nearest_integer": int(nearest),
            "distance": abs(total - nearest), "terms": terms, "idempotency": worst}


def _product_expr(a, b):
    from .exprs import Mul
    return Mul(a, b)


def bB_residuals(q, family, tuples=None):
    """|b phi_p + B phi_{p+2}| for p = 0, 2, ... on tuples drawn from a function family."""
    n = q.n
    fam = [_as_expr(f, n) for f in family]
    one = _as_expr("1", n)
    rows = []
    for p in range(0, n - 1, 2):
        if p + 2 not in q.T.W or p not in q.T.W:
            continue
        m = p + 2  # number of arguments a_0..a_{p+1}
        tups = tuples.get(p) if tuples else None
        if tups is None:
            tups = [tuple((s + i) % len(fam) for i in range(m)) for s in range(len(fam))]
        for t in tups:
            a = [fam[i] for i in t]
            # Hochschild coboundary of phi_p
            terms = []
            for i in range(p + 1):
                args = a[:i] + [_product_expr(a[i], a[i + 1])] + a[i + 2:]
                terms.append((-1) ** i * q.integrate(p, args))
            args = [_product_expr(a[p + 1], a[0])] + a[1:p + 1]
            terms.append((-1) ** (p + 1) * q.integrate(p, args))
            bv = sum(terms)
            # Connes boundary of phi_{p+2}
            Bterms = []
            for j in range(m):
                rot = a[j:] + a[:j]
                Bterms.append((-1) ** ((p + 1) * j) * q.integrate(p + 2, [one] + rot))
            Bv = sum(Bterms)
            # largest single term, so a vanishing residual can be told apart from vanishing terms
            scale = max(abs(phi_value(n, v)) for v in terms + Bterms)
            rows.append({"p": p, "tuple": list(t), "b": phi_value(n, bv), "B": phi_value(n, Bv),
                         "residual": abs(phi_value(n, bv + Bv)), "term_scale": scale})
    return rows


def bB_check(M, family, grid, quad=None, tuples=None):
    q = quad if quad is not None else TorusQuadrature(M, grid)
    return bB_residuals(q, family, tuples)
