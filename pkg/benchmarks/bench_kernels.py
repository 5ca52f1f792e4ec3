#!/usr/bin/env python3
"""Numba vs numpy timings for the two hot kernels.

Prints one JSON record per kernel/backend plus the max deviation between
backends.  Usage: python benchmarks/bench_kernels.py [--repeat 5] [--json out.json]
"""

import argparse
import json
import sys
import time

import numpy as np

from cascade_lab import _accel
from cascade_lab.grids import graded_grid
from cascade_lab.spectral import EnsembleParams, PumpParams, default_t_final


def timed(fn, args, repeat):
    fn(*args)  # warm-up (and JIT compile)
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def jsa_case():
    params = EnsembleParams(tau=0.25, superradiant_factor=5.0)
    grid = graded_grid(params.tau, params.rate)
    return (grid.nodes, grid.nodes, params.tau, 0.5 * params.rate), f"jsa {len(grid)}x{len(grid)}"


def time_integral_case(points):
    params = EnsembleParams(tau=0.25, superradiant_factor=5.0)
    pump = PumpParams()
    half = 0.5 * params.rate
    t0 = -5.0 * params.tau
    h = min(params.tau, 1.0 / params.rate) / 50.0
    n = int(np.ceil((default_t_final(params) - t0) / h)) + 1
    t = t0 + h * np.arange(n)
    rng = np.random.default_rng(7)
    dws = rng.uniform(-16, 16, points)
    dwi = rng.uniform(-16, 16, points)
    return (t, pump.b(t, params.tau), dws, dwi, half), f"nested integral {points} pts x {n} steps"


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--points", type=int, default=441, help="detuning pairs for the time integral")
    ap.add_argument("--json", help="also write the records to this file")
    args = ap.parse_args(argv)

    if not _accel.HAVE_NUMBA:
        print("numba not importable; only the numpy path can be timed", file=sys.stderr)

    records = []
    cases = [
        ("joint_amplitude_grid", *jsa_case()),
        ("nested_time_integral", *time_integral_case(args.points)),
    ]
    for name, kargs, label in cases:
        t_np, out_np = timed(getattr(_accel, f"{name}_numpy"), kargs, args.repeat)
        rec = {"kernel": name, "case": label, "numpy_s": t_np}
        fn_nb = getattr(_accel, f"{name}_numba")
        if fn_nb is not None:
            t_nb, out_nb = timed(fn_nb, kargs, args.repeat)
            scale = np.max(np.abs(out_np))
            rec.update(numba_s=t_nb, speedup=t_np / t_nb,
                       max_rel_dev=float(np.max(np.abs(out_np - out_nb)) / scale))
        records.append(rec)
        print(json.dumps(rec))

    if args.json:
        with open(args.json, "w") as fh:
            json.dump(records, fh, indent=2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
