#!/usr/bin/env python3
"""Benchmark the compiled pursuit kernel against the pure NumPy fallback.

Times the by-tolerance solve on representative design problems (the Monte
Carlo experiments call this thousands of times) and prints one row per
problem size with the speedup.

Usage: python benchmarks/bench_omp.py [--repeats 50]
"""
import argparse
import time

import numpy as np

from sparse_shortener import (
    NoiseSpec,
    assemble_sparse_tir,
    build_channel_matrix,
    build_correlations,
    build_cse_problem,
    build_tir_problem,
    generate_updp_cir,
    loss_budget,
    omp_backend,
    omp_solve,
    optimal_unit_tap,
    tir_mse,
)


def make_problem(v, n_f, snr_db, eta, seed):
    rng = np.random.default_rng(seed)
    cir = generate_updp_cir(v, rng)
    noise = NoiseSpec.from_db(snr_db)
    corr = build_correlations(build_channel_matrix(cir, n_f), noise)
    i_opt, _ = optimal_unit_tap(corr)
    prob_t = build_tir_problem("cholesky", corr, i_opt, 0.0)
    b = assemble_sparse_tir(omp_solve(prob_t, mode="fixed_k", k=2), i_opt, corr.n)
    d_eq = loss_budget(eta, tir_mse(corr, b))
    return build_cse_problem("cholesky", corr, corr.r_yx @ b.coeffs, d_eq)


def time_backend(problems, backend, repeats):
    best = np.inf
    for _ in range(repeats):
        start = time.perf_counter()
        for prob in problems:
            omp_solve(prob, backend=backend)
        best = min(best, time.perf_counter() - start)
    return best / len(problems)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=30)
    args = parser.parse_args()

    if omp_backend() != "compiled":
        print("compiled kernel not available; nothing to compare")
        return

    cases = [
        ("v=3  n_f=20", 3, 20, 15.0),
        ("v=5  n_f=40", 5, 40, 20.0),
        ("v=8  n_f=80", 8, 80, 20.0),
    ]
    print(f"{'problem':<14} {'python':>12} {'compiled':>12} {'speedup':>9}")
    for label, v, n_f, snr in cases:
        problems = [make_problem(v, n_f, snr, 0.25, seed) for seed in range(20)]
        t_py = time_backend(problems, "python", args.repeats)
        t_cy = time_backend(problems, "compiled", args.repeats)
        print(f"{label:<14} {t_py * 1e6:>10.1f}us {t_cy * 1e6:>10.1f}us "
              f"{t_py / t_cy:>8.1f}x")
        # sanity: identical outputs on one instance
        a = omp_solve(problems[0], backend="python")
        c = omp_solve(problems[0], backend="compiled")
        assert a.support == c.support


if __name__ == "__main__":
    main()
