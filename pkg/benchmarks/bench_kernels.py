"""Compare the compiled and numpy element kernels.

    python3 benchmarks/bench_kernels.py --level 4 --repeat 3
"""
import argparse
import time

import numpy as np

from degenlab import kernels
from degenlab.coefficients import DiffusionCoefficient
from degenlab.geometry import DomainSpec, build_mesh


def _best(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def run(level=4, repeat=3, alpha=0.5):
    mesh = build_mesh(DomainSpec.disk(1.0), level)
    coeff = DiffusionCoefficient.power(alpha)
    tri, verts, areas = mesh.triangles, mesh.vertices, mesh.areas()
    rho = mesh.origin_distance
    u = (1.0 - rho ** 2) * (1.0 + 0.3 * verts[:, 0])
    cases = {
        "sigma_integrals": lambda b: kernels.sigma_integrals(verts, tri, coeff.kernel_model, alpha,
                                                              0.0, backend=b)[0],
        "load_terms": lambda b: kernels.load_terms(tri, areas, u, 2.0, backend=b),
        "weight_matrix_terms": lambda b: kernels.weight_matrix_terms(tri, areas, u, 2.0, backend=b),
        "power_integral": lambda b: kernels.power_integral(tri, areas, u, 4.0, backend=b),
    }
    rows = []
    for name, fn in cases.items():
        tc, oc = _best(lambda: fn(None), repeat)
        tp, op = _best(lambda: fn("python"), repeat)
        diff = float(np.max(np.abs(np.asarray(oc) - np.asarray(op))) / max(np.max(np.abs(op)), 1e-300))
        rows.append((name, tc, tp, tp / tc, diff))
    return mesh, rows


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--level", type=int, default=4)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--alpha", type=float, default=0.5)
    a = ap.parse_args()
    mesh, rows = run(a.level, a.repeat, a.alpha)
    print(f"backend={kernels.BACKEND} level={a.level} triangles={mesh.nt}")
    print(f"{'kernel':<22}{'compiled [s]':>14}{'numpy [s]':>12}{'speedup':>10}{'rel diff':>12}")
    for name, tc, tp, s, d in rows:
        print(f"{name:<22}{tc:>14.4f}{tp:>12.4f}{s:>10.1f}{d:>12.1e}")


if __name__ == "__main__":
    main()
