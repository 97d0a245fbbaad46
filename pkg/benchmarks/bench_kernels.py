"""Benchmark: compiled trial-walk kernel vs the pure-Python fallback.

Runs identical workloads through both implementations, verifies the tallies
are bit-identical, and prints a throughput table.

    python benchmarks/bench_kernels.py [--trials 200000]
"""

import argparse
import time

import numpy as np

from worldlines import rulebook as rb
from worldlines._kernel import walk_py
from worldlines.core import READER
from worldlines.multiverse import TrialSampler, build_scenario

try:
    from worldlines._kernel import _walk
except ImportError:
    _walk = None

WORKLOADS = [
    ("redness (2 leaves)", "redness", {}, []),
    ("redness + f=0.6 rule", "redness", {}, [rb.redness_rule(0.6)]),
    ("schrodinger_cat + no-death", "schrodinger_cat", {}, [rb.no_death_rule()]),
    ("lottery k=10 (2^10 paths)", "lottery", {"k": 10}, []),
    ("lottery k=14 (2^14 paths)", "lottery", {"k": 14}, []),
]


def bench(impl, flat, n_trials: int, seed: int):
    n_leaves = int(flat.leaf_slot.max()) + 1
    counts = np.zeros(n_leaves, dtype=np.int64)
    t0 = time.perf_counter()
    impl.run_trials(
        flat.child_offset, flat.child_index, flat.cum_probs, flat.leaf_slot, counts, n_trials, seed
    )
    return time.perf_counter() - t0, counts


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--trials", type=int, default=200_000)
    parser.add_argument("--seed", type=int, default=0xBE9C4)
    args = parser.parse_args()

    print(f"{args.trials} trials per workload\n")
    header = f"{'workload':<28} {'python':>12} {'cython':>12} {'speedup':>9}  identical"
    print(header)
    print("-" * len(header))
    for label, name, params, rules in WORKLOADS:
        flat = TrialSampler(build_scenario(name, **params), rules, READER)._flat
        t_py, counts_py = bench(walk_py, flat, args.trials, args.seed)
        py_rate = args.trials / t_py
        if _walk is None:
            print(f"{label:<28} {py_rate:>10.0f}/s {'(not built)':>12}")
            continue
        t_cy, counts_cy = bench(_walk, flat, args.trials, args.seed)
        cy_rate = args.trials / t_cy
        same = np.array_equal(counts_py, counts_cy)
        print(
            f"{label:<28} {py_rate:>10.0f}/s {cy_rate:>10.0f}/s {t_py / t_cy:>8.1f}x  {same}"
        )
        if not same:
            raise SystemExit("kernel mismatch!")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
