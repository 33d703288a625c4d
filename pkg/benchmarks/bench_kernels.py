"""Compiled vs numpy kernels: raw bilinear contraction and an end-to-end torus workload.

python3 benchmarks/bench_kernels.py [--repeat R] [--skip-e2e]
"""
import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from rescocycle import _kernels_py, kernels


def bilinear_case(nt, nrow, batch, seed=0):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((nrow, batch))
    b = rng.standard_normal((nrow, batch))
    ia = rng.integers(0, nrow, nt)
    ib = rng.integers(0, nrow, nt)
    io = np.sort(rng.integers(0, nrow, nt))
    sign = rng.choice([-1.0, 1.0], nt)
    return a, b, ia, ib, io, sign


def bench_bilinear(repeat):
    rows = []
    for nt, nrow, batch in [(20000, 2000, 1), (20000, 2000, 64), (200000, 4000, 16), (200000, 4000, 256)]:
        a, b, ia, ib, io, sign = bilinear_case(nt, nrow, batch)
        out_py = np.zeros((nrow, batch))
        out_c = np.zeros((nrow, batch))
        _kernels_py.bilinear(a, b, ia, ib, io, sign, out_py)
        row = {"terms": nt, "rows": nrow, "batch": batch}
        t_py = min(timeit.repeat(lambda: _kernels_py.bilinear(a, b, ia, ib, io, sign, np.zeros((nrow, batch))),
                                 number=1, repeat=repeat))
        row["numpy_s"] = t_py
        if kernels._ckernels is not None:
            kernels._ckernels.bilinear_f64(a, b, ia, ib, io, sign, out_c)
            row["max_abs_diff"] = float(np.max(np.abs(out_c - out_py)))
            t_c = min(timeit.repeat(
                lambda: kernels._ckernels.bilinear_f64(a, b, ia, ib, io, sign, np.zeros((nrow, batch))),
                number=1, repeat=repeat))
            row["compiled_s"] = t_c
            row["speedup"] = t_py / t_c
        rows.append(row)
    return rows


E2E = """
import time
from rescocycle.kernels import BACKEND
from rescocycle.torus import TorusManifold, TorusQuadrature
M = TorusManifold(4, metric={"11": "1+0.1*sin(x1)", "22": "1+0.1*cos(x2)", "12": "0.05*sin(x1+x2)"},
                  B={"123": "0.3*sin(x1)+0.2*cos(x2)", "234": "0.1*cos(x1)"})
t = time.perf_counter()
q = TorusQuadrature(M, 8, workers=1)
print(BACKEND, time.perf_counter() - t, q.integrate(0, ["1"]))
"""


def bench_e2e():
    out = {}
    for label, env in (("compiled", {}), ("numpy", {"RESCOCYCLE_PURE": "1"})):
        r = subprocess.run([sys.executable, "-c", E2E], env={**os.environ, **env},
                           capture_output=True, text=True, check=True)
        backend, secs, val = r.stdout.split()
        out[label] = {"backend": backend, "seconds": float(secs), "phi0_berezin": float(val)}
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--skip-e2e", action="store_true")
    args = ap.parse_args()
    report = {"backend": kernels.BACKEND, "bilinear": bench_bilinear(args.repeat)}
    if not args.skip_e2e:
        report["torus_8^4"] = bench_e2e()
    print(json.dumps(report, indent=2))


if __name__ == "__main__":
    main()
