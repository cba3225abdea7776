"""Compare the compiled counting kernels against their numpy fallbacks.

The script times every kernel dispatcher in the current process, then
re-runs itself in a subprocess with ETALAB_NO_NUMBA=1 and prints both
columns side by side.

    python3 benchmarks/bench_kernels.py --p 20 --trips 20000 --repeat 5
"""
import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np

from etalab import _kernels
from etalab.covariance import diffusion_covariance
from etalab.network import build_grid, segment_graph
from etalab.trips import ODLaw, TripDataset, sample_routes

KERNELS = ("traversal_counts", "subset_traversal_counts", "route_pair_counts",
           "accumulate_information", "trip_quadratic_sums")


def build_workload(p: int, n_trips: int, seed: int = 0):
    net = build_grid(p)
    rng = np.random.default_rng(seed)
    law = ODLaw(p, 1.0)
    ds = TripDataset(net, sample_routes(law, net, rng, n_trips))
    cov = diffusion_covariance(segment_graph(net), u=1.0, v=1.0, white=1.0)
    y = np.asarray(sample_routes(law, net, rng, 1)[0].segment_ids, dtype=np.int64)
    members = np.arange(0, n_trips, 3, dtype=np.int64)
    return ds.flat, ds.offsets, cov.sigma, y, members, net.n_segments


def time_kernels(p: int, n_trips: int, repeat: int) -> dict[str, float]:
    flat, offsets, sigma, y, members, n_seg = build_workload(p, n_trips)
    calls = {
        "traversal_counts": lambda: _kernels.traversal_counts(flat, offsets, n_seg),
        "subset_traversal_counts": lambda: _kernels.subset_traversal_counts(
            flat, offsets, members, n_seg),
        "route_pair_counts": lambda: _kernels.route_pair_counts(
            flat, offsets, y, n_seg),
        "accumulate_information": lambda: _kernels.accumulate_information(
            flat, offsets, sigma),
        "trip_quadratic_sums": lambda: _kernels.trip_quadratic_sums(
            flat, offsets, sigma),
    }
    out = {}
    for name in KERNELS:
        fn = calls[name]
        fn()  # warmup, includes any jit compilation
        best = min(_timed(fn) for _ in range(repeat))
        out[name] = best
    return out


def _timed(fn) -> float:
    t0 = time.perf_counter()
    fn()
    return time.perf_counter() - t0


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--p", type=int, default=20, help="grid size")
    ap.add_argument("--trips", type=int, default=20000, help="historical trips")
    ap.add_argument("--repeat", type=int, default=5, help="timing repetitions")
    ap.add_argument("--emit-json", action="store_true",
                    help="print raw timings as JSON and exit (internal)")
    args = ap.parse_args(argv)

    timings = time_kernels(args.p, args.trips, args.repeat)
    if args.emit_json:
        print(json.dumps({"backend": _kernels.BACKEND, "timings": timings}))
        return 0

    env = dict(os.environ, ETALAB_NO_NUMBA="1")
    child = subprocess.run(
        [sys.executable, os.path.abspath(__file__), "--p", str(args.p),
         "--trips", str(args.trips), "--repeat", str(args.repeat),
         "--emit-json"],
        env=env, capture_output=True, text=True, check=True)
    fallback = json.loads(child.stdout)

    here = _kernels.BACKEND
    there = fallback["backend"]
    print(f"kernel benchmark: p={args.p}, trips={args.trips}, best of {args.repeat}")
    print(f"{'kernel':<26} {here + ' [s]':>14} {there + ' [s]':>14} {'ratio':>8}")
    for name in KERNELS:
        a = timings[name]
        b = fallback["timings"][name]
        ratio = b / a if a > 0 else float("inf")
        print(f"{name:<26} {a:>14.6f} {b:>14.6f} {ratio:>7.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
