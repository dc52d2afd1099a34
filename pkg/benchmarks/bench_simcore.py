"""Benchmark the compiled event loop against the pure-Python fallback.

Runs the same steady-state workload (identical model, N, seeds, and event
budget) on each available backend and reports events per second plus the
speedup ratio. Estimates must agree bit for bit; the run aborts if not.

Usage: python3 benchmarks/bench_simcore.py [--model csma3] [--N 20]
       [--replications 4] [--events 200000]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

import twoscale as ts


def run_backend(backend, model, n, weights, args):
    ts.set_backend(backend)
    t0 = time.perf_counter()
    est = ts.estimate_steady_state(
        model, n, weights,
        seed=0, replications=args.replications,
        warmup_events=args.events // 4, measure_events=args.events,
    )
    elapsed = time.perf_counter() - t0
    total_events = args.replications * (args.events // 4 + args.events)
    return est, elapsed, total_events / elapsed


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--model", default="csma3", choices=["toy", "csma3", "csma5"])
    parser.add_argument("--N", type=int, default=20)
    parser.add_argument("--replications", type=int, default=4)
    parser.add_argument("--events", type=int, default=200_000,
                        help="measured events per replication (warmup is a quarter of this)")
    args = parser.parse_args()

    model = ts.named_model(args.model)
    weights = np.ones(model.d_x) / model.d_x

    backends = ["python"]
    if "compiled" in ts.available_backends():
        backends.append("compiled")
    else:
        print("compiled backend not built; benchmarking python only")

    results = {}
    for backend in backends:
        est, elapsed, rate = run_backend(backend, model, args.N, weights, args)
        results[backend] = (est, elapsed, rate)
        print(f"{backend:>9}: {elapsed:8.3f} s  {rate:12,.0f} events/s  "
              f"mean={est.mean:.9f}")
    ts.set_backend("auto")

    if len(backends) == 2:
        est_py, _, rate_py = results["python"]
        est_c, _, rate_c = results["compiled"]
        if est_py.estimates.tobytes() != est_c.estimates.tobytes():
            raise SystemExit("backend mismatch: estimates are not bit-identical")
        print(f"bit-identical estimates confirmed; speedup {rate_c / rate_py:.1f}x")


if __name__ == "__main__":
    main()
