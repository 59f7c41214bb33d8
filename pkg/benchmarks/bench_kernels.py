#!/usr/bin/env python3
"""Benchmark the compiled kernel backend against the pure-Python fallback.

Times the two pairwise workloads that dominate corpus evaluation: token-set
intersections (the diverse@k inner loop) and clipped n-gram matching (the
self-BLEU inner loop). Results are checked for equality before timing is
reported.

Usage: python3 benchmarks/bench_kernels.py [--instances 2000] [--k 10] [--repeat 3]
"""

from __future__ import annotations

import argparse
import random
import time

import numpy as np

from divq._kernels import _pykernels

try:
    from divq._kernels import _ckernels
except ImportError:
    _ckernels = None


def synthetic_instances(n_instances: int, k: int, seed: int = 9):
    """Per instance: k token-id sets and k bigram-id bags of question-ish size."""
    rng = random.Random(seed)
    sets, bags = [], []
    for _ in range(n_instances):
        inst_sets, inst_bags = [], []
        for _ in range(k):
            length = rng.randrange(6, 15)
            tokens = [rng.randrange(40) for _ in range(length)]
            inst_sets.append(np.array(sorted(set(tokens)), dtype=np.int64))
            bigrams = sorted(
                tokens[i] * 40 + tokens[i + 1] for i in range(length - 1)
            )
            inst_bags.append(np.array(bigrams, dtype=np.int64))
        sets.append(inst_sets)
        bags.append(inst_bags)
    return sets, bags


def run_diversity(backend, sets):
    total = 0
    for inst_sets in sets:
        total += int(backend.pairwise_intersect_counts(inst_sets).sum())
    return total


def run_selfbleu(backend, bags):
    total = 0
    for inst_bags in bags:
        total += int(backend.pairwise_clipped_matches(inst_bags).sum())
    return total


def best_of(fn, repeat):
    best = float("inf")
    result = None
    for _ in range(repeat):
        start = time.perf_counter()
        result = fn()
        best = min(best, time.perf_counter() - start)
    return best, result


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--instances", type=int, default=2000)
    parser.add_argument("--k", type=int, default=10)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()

    if _ckernels is None:
        print("compiled backend not built; run: python3 setup.py build_ext --inplace")
        return 1

    sets, bags = synthetic_instances(args.instances, args.k)
    pair_count = args.instances * args.k * (args.k - 1) // 2
    print(
        f"{args.instances} instances x top-{args.k} "
        f"({pair_count} unordered pairs per workload)\n"
    )
    print(f"{'workload':<22}{'python':>12}{'compiled':>12}{'speedup':>10}")
    for name, runner, data in (
        ("pairwise diversity", run_diversity, sets),
        ("self-BLEU matching", run_selfbleu, bags),
    ):
        t_py, r_py = best_of(lambda: runner(_pykernels, data), args.repeat)
        t_c, r_c = best_of(lambda: runner(_ckernels, data), args.repeat)
        assert r_py == r_c, f"{name}: backend results diverge"
        print(f"{name:<22}{t_py:>11.3f}s{t_c:>11.3f}s{t_py / t_c:>9.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
