"""Benchmark the jitted kernels against their pure-numpy fallbacks.

Two inner loops have dual implementations selected by ``D2DPIPE_BACKEND``
(or an explicit ``engine=`` argument): the best-path search used by the
pool experiment harness, and the blockage-survival counter behind the
Monte Carlo stability estimate.  This script times both backends on the
same inputs, checks that they produce identical results, and prints a
small comparison table.

Run from the repository root after installing the package:

    python3 benchmarks/bench_backends.py
    python3 benchmarks/bench_backends.py --pools 50 --mc-trials 500000
"""

import argparse
import sys
from time import perf_counter

import numpy as np

from d2dpipe.backend import HAVE_NUMBA
from d2dpipe.pathfinder import (
    REFERENCE_STRATEGY_TABLE,
    MinRequirements,
    filter_qualified,
    find_best_pipeline,
    normalize_strategy_table,
)
from d2dpipe.pool_sim import BetaParams, PoolConfig, generate_pool
from d2dpipe.stability import DEFAULT_BLOCKAGE_MODEL, StabilityQuery, simulate_sessions


def time_search(pools, table, engine, repeats):
    """Best search time per full pool sweep, plus the result list."""
    results = [find_best_pipeline(g, table, engine=engine) for g in pools]  # warmup
    best = float("inf")
    for _ in range(repeats):
        t0 = perf_counter()
        results = [find_best_pipeline(g, table, engine=engine) for g in pools]
        best = min(best, perf_counter() - t0)
    return best, results


def time_mc(query, trials, engine, repeats, seed):
    simulate_sessions(query, DEFAULT_BLOCKAGE_MODEL, 64, seed=seed, engine=engine)
    best = float("inf")
    estimate = None
    for _ in range(repeats):
        t0 = perf_counter()
        estimate = simulate_sessions(
            query, DEFAULT_BLOCKAGE_MODEL, trials, seed=seed, engine=engine
        )
        best = min(best, perf_counter() - t0)
    return best, estimate


def report(rows):
    header = f"{'kernel':<22} {'numba [ms]':>11} {'numpy [ms]':>11} {'speedup':>8}  identical"
    print(header)
    print("-" * len(header))
    for name, t_numba, t_numpy, identical in rows:
        speedup = t_numpy / t_numba if t_numba else float("nan")
        print(
            f"{name:<22} {t_numba * 1e3:>11.2f} {t_numpy * 1e3:>11.2f} "
            f"{speedup:>7.1f}x  {identical}"
        )


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--pools", type=int, default=30, help="worker pools per sweep")
    parser.add_argument("--pool-size", type=int, default=28, help="nodes per pool")
    parser.add_argument(
        "--mc-trials", type=int, default=200_000, help="Monte Carlo sessions per run"
    )
    parser.add_argument("--repeats", type=int, default=5, help="timed repetitions (best-of)")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    if not HAVE_NUMBA:
        print("numba is not importable; nothing to compare against.", file=sys.stderr)
        return 1

    beta = BetaParams(5.0, 2.0)
    cfg = PoolConfig(
        pool_size=args.pool_size,
        quality_dist=beta,
        reliability_dist=beta,
        resource_dist=beta,
        seed=args.seed,
    )
    table = normalize_strategy_table(REFERENCE_STRATEGY_TABLE, headroom=1.25)
    mins = MinRequirements()
    pools = [
        filter_qualified(generate_pool(cfg, np.random.default_rng([args.seed, i])), mins)
        for i in range(args.pools)
    ]
    print(
        f"best-path search: {args.pools} pools x {args.pool_size} nodes, "
        f"{len(table.strategies)} strategies, best of {args.repeats}"
    )
    t_numba, res_numba = time_search(pools, table, "numba", args.repeats)
    t_numpy, res_numpy = time_search(pools, table, "numpy", args.repeats)
    search_identical = res_numba == res_numpy

    query = StabilityQuery(session_time=1.0, n_node=4, pipeline_count=2)
    print(
        f"survival counter: {args.mc_trials} sessions, "
        f"{query.n_node} nodes, {query.pipeline_count} pipelines\n"
    )
    m_numba, est_numba = time_mc(query, args.mc_trials, "numba", args.repeats, args.seed)
    m_numpy, est_numpy = time_mc(query, args.mc_trials, "numpy", args.repeats, args.seed)
    mc_identical = est_numba == est_numpy

    report(
        [
            ("best-path search", t_numba, t_numpy, search_identical),
            ("survival counter", m_numba, m_numpy, mc_identical),
        ]
    )
    return 0 if (search_identical and mc_identical) else 1


if __name__ == "__main__":
    raise SystemExit(main())
