"""Compiled versus numpy kernels on representative problem sizes.

Usage::

    python3 benchmarks/bench_kernels.py [--rays N] [--repeat R] [--json out.json]

Each kernel runs on both backends with identical inputs; the table lists the
best wall time over the repeats, the speedup and the max deviation between
the two outputs.
"""
import argparse
import json
import time

import numpy as np

from poltomo import accel
from poltomo.fields import Grid, GridField, random_gausspoly_field
from poltomo.geometry import BallDomain, sample_inward_arrays


def _best(func, repeat):
    best, out = np.inf, None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = func()
        best = min(best, time.perf_counter() - t0)
    return best, out


def _cases(rays, seed=0):
    domain = BallDomain()
    base, xi = sample_inward_arrays(domain, rays, seed)
    length = -2.0 * np.sum(base * xi, axis=1)
    grid = Grid.cube(1.0, 24)
    f = random_gausspoly_field(np.random.default_rng(seed), degree=2, a=4.0).scaled(0.1)
    gf = GridField.sample(f, grid)
    nsteps = 256
    t = np.arange(2 * nsteps + 1) / (2.0 * nsteps)
    pts = base[:, None, :] + (t[None, :] * length[:, None])[..., None] * xi[:, None, :]
    samples = f(pts)
    return {
        "ray_grid_weights": lambda b: accel.ray_grid_matrix(base, xi, length, 512, grid, backend=b),
        "rk4_grid": lambda b: accel.rk4_grid(gf.values, grid, base, xi, length, nsteps, backend=b),
        "rk4_samples": lambda b: accel.rk4_samples(samples, xi, length, nsteps, backend=b),
    }


def _diff(a, b):
    if hasattr(a, "toarray"):
        return float(abs(a - b).max())
    return float(np.max(np.abs(a - b)))


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--rays", type=int, default=2000)
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--json")
    args = p.parse_args(argv)
    if not accel.HAVE_COMPILED:
        raise SystemExit("compiled kernels are not built; run: python3 setup.py build_ext --inplace")
    rows = []
    for name, run in _cases(args.rays).items():
        tc, oc = _best(lambda: run("cython"), args.repeat)
        tn, on = _best(lambda: run("numpy"), args.repeat)
        rows.append({"kernel": name, "rays": args.rays, "cython_s": tc, "numpy_s": tn,
                     "speedup": tn / tc, "max_diff": _diff(oc, on)})
    print(f"{'kernel':<18}{'cython [s]':>12}{'numpy [s]':>12}{'speedup':>10}{'max diff':>12}")
    for r in rows:
        print(f"{r['kernel']:<18}{r['cython_s']:>12.4f}{r['numpy_s']:>12.4f}{r['speedup']:>10.1f}{r['max_diff']:>12.2e}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)


if __name__ == "__main__":
    main()
