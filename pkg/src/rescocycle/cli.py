"""Batch front-end: JSON config in, deterministic JSON report out.

Exit codes: 0 success, 1 configuration error, 2 verification failure,
3 numeric failure (singular metric, idempotency, non-finite values).
"""
import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass, field

import numpy as np

from .cocycle import admissible_terms, cpk, prefactor
from .exprs import EvalError, ExprError, is_polynomial, taylor_jet
from .geometry import GaugeError, MetricJet, ThreeFormJet, geom_data, to_normal_coordinates
from .heat import heat_coeffs
from .multivector import berezin, blade_name, supertrace
from .operators import TruncationError, build_dirac, build_laplacian, covariant_derivative, \
    getzler_order, getzler_rescale
from .scalars import FLOAT, RATIONAL, fmt
from .torus import NumericError, PeriodicityError, TorusManifold, TorusQuadrature, bB_residuals, \
    index_pairing, phi_value, required_order

EXIT_OK, EXIT_CONFIG, EXIT_VERIFY, EXIT_NUMERIC = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    dimension: int = 4
    mode: str = FLOAT
    order: int = None
    periods: list = None
    metric: dict = field(default_factory=dict)
    B: dict = field(default_factory=dict)
    a: list = None
    idempotent: object = None
    family: list = None
    grid: int = 8
    points: list = None
    p: list = None
    jmax: int = None
    seed: int = 0
    samples_n4: int = 20
    samples_n6: int = 5
    suites: list = None
    refine: bool = False
    output: str = None

    def manifold(self, periodic=True):
        return TorusManifold(self.dimension, self.metric, self.B, self.periods, check=periodic)


_KEYS = {"dimension", "mode", "order", "manifold", "functions", "grid", "points", "p", "jmax",
         "seed", "verify", "refine", "output", "task"}


def load_config(path, overrides):
    data = {}
    if path:
        try:
            with open(path) as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(data) - _KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    man = data.get("manifold", {}) or {}
    fun = data.get("functions", {}) or {}
    ver = data.get("verify", {}) or {}
    cfg = RunConfig(
        dimension=data.get("dimension", 4), mode=data.get("mode", FLOAT), order=data.get("order"),
        periods=man.get("periods"), metric=man.get("metric", {}) or {}, B=man.get("B", {}) or {},
        a=fun.get("a"), idempotent=fun.get("idempotent"), family=fun.get("family"),
        grid=data.get("grid", 8), points=data.get("points"), p=data.get("p"), jmax=data.get("jmax"),
        seed=data.get("seed", 0), samples_n4=ver.get("samples_n4", 20), samples_n6=ver.get("samples_n6", 5),
        suites=ver.get("suites"), refine=bool(data.get("refine", False)), output=data.get("output"))
    for k, v in overrides.items():
        if v is not None:
            setattr(cfg, k, v)
    validate(cfg)
    return cfg


def validate(cfg):
    if not isinstance(cfg.dimension, int) or cfg.dimension < 2 or cfg.dimension % 2:
        raise ConfigError("dimension must be an even integer >= 2")
    if cfg.mode not in (FLOAT, RATIONAL):
        raise ConfigError("mode must be 'rational' or 'float'")
    if cfg.order is not None and (not isinstance(cfg.order, int) or cfg.order < 0):
        raise ConfigError("order must be a non-negative integer")
    if not isinstance(cfg.grid, int) or cfg.grid < 4:
        raise ConfigError("grid must be an integer >= 4")
    if isinstance(cfg.p, int):
        cfg.p = [cfg.p]
    if cfg.p is not None:
        if any(not isinstance(p, int) or p < 0 or p % 2 or p > cfg.dimension for p in cfg.p):
            raise ConfigError("p must be even integers between 0 and the dimension")
    for name in ("metric", "B"):
        if not isinstance(getattr(cfg, name), dict):
            raise ConfigError(f"manifold.{name} must be an object of component expressions")


# ---------------------------------------------------------------------------
# JSON helpers

def jsonable(x):
    if isinstance(x, dict):
        return {str(k): jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [jsonable(v) for v in x]
    if isinstance(x, (complex, np.complexfloating)):
        return {"re": float(x.real), "im": float(x.imag)}
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return float(x)
    if isinstance(x, np.ndarray):
        return jsonable(x.tolist())
    if x is None or isinstance(x, str):
        return x
    return fmt(x)


def mv_dict(mv, b=0):
    return {blade_name(bl): jsonable(mv.coeffs[i, b]) for i, bl in enumerate(mv.blades)
            if mv.coeffs[i, b] != 0}


def prefactors(n):
    pf = prefactor(n)
    heat = (4 * math.pi) ** (-(n // 2))
    st = (-2j) ** (n // 2)
    return {"berezin_to_phi": {"symbolic": pf["symbolic"], "numeric": pf["value"]},
            "heat": {"symbolic": pf["heat"], "numeric": heat},
            "supertrace": {"symbolic": pf["supertrace"], "numeric": st}}


# ---------------------------------------------------------------------------
# local geometry at points

def local_geometry(cfg, M, point, K):
    n = cfg.dimension
    if cfg.mode == RATIONAL:
        for e in M.expressions():
            if not is_polynomial(e):
                raise ConfigError("rational mode needs polynomial expressions")
        pt = [fmt(v) if not isinstance(v, str) else v for v in point]
        comp = [[None] * n for _ in range(n)]
        for a in range(n):
            for b in range(a, n):
                comp[a][b] = comp[b][a] = taylor_jet(M.g_expr[a][b], pt, K, RATIONAL, n)
        Bj = ThreeFormJet(n, {k: taylor_jet(e, pt, max(K - 1, 0), RATIONAL, n) for k, e in M.B_expr.items()},
                          max(K - 1, 0), 1, RATIONAL)
        g = MetricJet(comp)
    else:
        g, Bj = M.jets_at(np.asarray([point], float), K)
        G0 = g.at_origin()[:, :, 0].astype(float)
        if np.any(np.linalg.eigvalsh(G0) <= 0):
            raise NumericError("metric is not positive definite at the point")
    gn, Bn = to_normal_coordinates(g, Bj, K)
    return geom_data(gn, Bn, K, check=cfg.mode == RATIONAL)


def _points(cfg):
    pts = cfg.points or [[0] * cfg.dimension]
    for p in pts:
        if len(p) != cfg.dimension:
            raise ConfigError("each point needs one coordinate per dimension")
    return pts


# ---------------------------------------------------------------------------
# commands

def cmd_heat(cfg):
    n = cfg.dimension
    jmax = n // 2 if cfg.jmax is None else cfg.jmax
    K = 2 * jmax if cfg.order is None else cfg.order
    if K < 2 * jmax:
        raise ConfigError(f"order {K} too low for Theta_{jmax}: need {2 * jmax}")
    M = cfg.manifold(periodic=False)
    out = []
    for pt in _points(cfg):
        gd = local_geometry(cfg, M, pt, K)
        rows = {}
        for bar in (False, True):
            L = build_laplacian(gd, include_dB=not bar)
            hc = heat_coeffs(L, gd, jmax)
            for j in range(jmax + 1):
                v = hc.at_origin(j)
                st = supertrace(v)
                rows[f"{'Theta_bar' if bar else 'Theta'}_{j}"] = {
                    "symbol": mv_dict(v), "berezin": jsonable(berezin(v)[0]),
                    "supertrace": {"re": jsonable(st[0][0]), "im": jsonable(st[1][0])}}
        out.append({"point": jsonable(pt), "coefficients": rows})
    return {"task": "heat", "dimension": n, "mode": cfg.mode, "order": K, "jmax": jmax,
            "prefactors": prefactors(n), "points": out}, EXIT_OK, None


def _quadrature(cfg, M, ps, grid):
    K = cfg.order
    if K is not None:
        need = max(required_order(cfg.dimension, p) for p in ps)
        if K < need:
            raise ConfigError(f"order {K} too low: phi_p needs {need}")
    return TorusQuadrature(M, grid, ps=ps, order=K)


def _constants(n, p):
    out = []
    for k in sorted({k for k, _, _ in admissible_terms(n, p)}):
        c = cpk(p, k)
        out.append({"k": list(k), "c_prime": fmt(c.c_prime), "c": c.symbolic(), "c_numeric": c.c_value})
    return out


def cmd_cocycle(cfg):
    if cfg.mode != FLOAT:
        raise ConfigError("torus quadrature runs in float mode")
    n = cfg.dimension
    M = cfg.manifold()
    ps = cfg.p if cfg.p is not None else ([len(cfg.a) - 1] if cfg.a else [0])
    a = cfg.a or ["1"]
    if len(a) != ps[0] + 1 and len(ps) == 1:
        raise ConfigError(f"phi_{ps[0]} takes {ps[0] + 1} functions, got {len(a)}")
    need = sorted(set(ps) | ({p for p in range(0, n + 1, 2)} if cfg.family else set()))
    q = _quadrature(cfg, M, need, cfg.grid)
    comps = {}
    table = None
    for p in ps:
        args = a if len(a) == p + 1 else (a + ["1"] * (p + 1))[:p + 1]
        res = q.integrate(p, args, by_k=True)
        total = res.pop(None)
        comps[str(p)] = {"arguments": args, "berezin_integral": total, "value": phi_value(n, total),
                         "per_k_berezin": {str(list(k)): v for k, v in res.items()},
                         "constants": _constants(n, p)}
        if p == 0 and all(x.strip() == "1" for x in args):
            comps[str(p)]["index_of_D"] = phi_value(n, total)
    report = {"task": "cocycle", "dimension": n, "grid": cfg.grid, "prefactors": prefactors(n),
              "quadrature": {"rule": "tensor trapezoidal", "points": cfg.grid ** n,
                             "geometry_axes": [x + 1 for x in q.axes], "geometry_points": len(q.geo_pts),
                             "taylor_degree": q.D, "summation": "math.fsum in lexicographic grid order"},
              "phi": comps}
    if cfg.family:
        report["bB_residuals"] = bB_residuals(q, cfg.family)
    if cfg.refine:
        q2 = _quadrature(cfg, M, ps, 2 * cfg.grid)
        report["refinement"] = {}
        for p in ps:
            v2 = q2.integrate(p, comps[str(p)]["arguments"])
            report["refinement"][str(p)] = {"grid": 2 * cfg.grid, "berezin_integral": v2,
                                            "change": abs(v2 - comps[str(p)]["berezin_integral"])}
    table = _point_table(q, ps, a)
    return report, EXIT_OK, table


def _point_table(q, ps, a):
    rows = []
    for pts, gidx in q.grid_chunks():
        cols = {"vol": q.T.vol[gidx]}
        for p in ps:
            args = a if len(a) == p + 1 else (a + ["1"] * (p + 1))[:p + 1]
            from .torus import _as_matrix
            cols[f"phi{p}_berezin_density"] = q.integrand_matrix(p, [_as_matrix(x, q.n) for x in args], pts, gidx)
        for i in range(len(pts)):
            rows.append([float(v) for v in pts[i]] + [float(cols[c][i]) for c in cols])
    header = [f"x{i + 1}" for i in range(q.n)] + list(cols)
    return header, rows


def cmd_index(cfg):
    if cfg.mode != FLOAT:
        raise ConfigError("torus quadrature runs in float mode")
    if cfg.idempotent is None:
        raise ConfigError("functions.idempotent is required for the index task")
    n = cfg.dimension
    M = cfg.manifold()
    q = _quadrature(cfg, M, list(range(0, n + 1, 2)), cfg.grid)
    res = index_pairing(M, cfg.idempotent, cfg.grid, quad=q)
    return {"task": "index", "dimension": n, "grid": cfg.grid, "prefactors": prefactors(n),
            "idempotent": cfg.idempotent, "index": res["index"],
            "nearest_integer": res["nearest_integer"], "distance_to_integer": res["distance"],
            "terms": {str(k): v for k, v in res["terms"].items()},
            "weights": {str(p): (-1) ** (p // 2) * math.factorial(p) // math.factorial(p // 2)
                        for p in range(2, n + 1, 2)},
            "idempotency_max_error": res["idempotency"]}, EXIT_OK, None


def cmd_verify(cfg):
    from .verify import verify_theorems
    suites = cfg.suites
    if suites is None:
        suites = ["n4", "dbzero", "mehler", "bismut", "symbols"] if cfg.dimension == 4 else ["n6"]
    n6 = cfg.samples_n6 if "n6" in suites else 0
    rep = verify_theorems(cfg.seed, n4=cfg.samples_n4, n6=n6, include=suites)
    d = rep.to_dict()
    d.update({"task": "verify", "seed": cfg.seed, "suites": suites})
    return d, EXIT_OK if not rep.failures else EXIT_VERIFY, None


def _symbol_dump(S):
    out = {}
    for beta, j in sorted(S.terms.items()):
        from .jets import monomials
        mons = monomials(j.n, j.order)
        terms = []
        for i, alpha in enumerate(mons):
            for b, bl in enumerate(j.blades):
                v = j.coeffs[i, b, 0]
                if v != 0:
                    terms.append({"x": [int(t) for t in alpha], "form": blade_name(bl), "coeff": jsonable(v)})
        out["".join(str(int(t)) for t in beta)] = terms
    return out


def cmd_getzler(cfg):
    n = cfg.dimension
    K = cfg.order if cfg.order is not None else 4
    M = cfg.manifold(periodic=False)
    out = []
    for pt in _points(cfg):
        gd = local_geometry(cfg, M, pt, K)
        Lb = build_laplacian(gd, include_dB=False)
        L = build_laplacian(gd, include_dB=True)
        D = build_dirac(gd)
        item = {"point": jsonable(pt),
                "getzler_order": {"Delta_bar": getzler_order(Lb), "Delta": getzler_order(L), "D": getzler_order(D)},
                "Delta_bar": _symbol_dump(getzler_rescale(Lb, 2)),
                "nabla": {str(a + 1): _symbol_dump(getzler_rescale(covariant_derivative(gd, a), 1))
                          for a in range(n)}}
        out.append(item)
    return {"task": "getzler", "dimension": n, "order": K, "points": out}, EXIT_OK, None


COMMANDS = {"heat": cmd_heat, "cocycle": cmd_cocycle, "index": cmd_index, "verify": cmd_verify,
            "getzler": cmd_getzler}


def build_parser():
    ap = argparse.ArgumentParser(prog="rescocycle", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON run configuration")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--grid", type=int)
        sp.add_argument("--order", type=int)
        sp.add_argument("--mode", choices=[RATIONAL, FLOAT])
        sp.add_argument("--out", help="report path (default: stdout)")
        sp.add_argument("--csv", help="optional CSV table of per-point integrands")
    return ap


def write_report(report, path):
    text = json.dumps(jsonable(report), sort_keys=True, indent=2) + "\n"
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, {"seed": args.seed, "grid": args.grid, "order": args.order,
                                        "mode": args.mode, "output": args.out})
        report, status, table = COMMANDS[args.command](cfg)
    except (NumericError, EvalError, ZeroDivisionError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, ExprError, PeriodicityError, GaugeError, TruncationError, ValueError,
            KeyError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    write_report(report, cfg.output)
    if args.csv and table is not None:
        header, rows = table
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows(rows)
    return status


if __name__ == "__main__":
    sys.exit(main())
