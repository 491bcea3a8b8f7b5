#!/usr/bin/env python3
"""Benchmark the compiled kernel against the pure-numpy fallback.

Two levels: raw gate application on registers of growing size, and full
protocol Monte Carlo throughput (the workload the kernels exist for).

Run:  python benchmarks/bench_kernels.py [--trials 4000]
"""

import argparse
import time

import numpy as np

from csbc import _kernels, analysis, qsim, strategies


def bench_apply(backend: str, n_qubits: int, k: int, reps: int) -> float:
    """Gate applications per second for a k-qubit gate on n qubits."""
    _kernels.use_backend(backend)
    rng = np.random.default_rng(7)
    amps = rng.standard_normal(1 << n_qubits) + 1j * rng.standard_normal(
        1 << n_qubits
    )
    amps = np.ascontiguousarray(amps / np.linalg.norm(amps))
    mat = np.ascontiguousarray(qsim.haar_unitary(1 << k, rng))
    targets = tuple(range(k))
    start = time.perf_counter()
    for _ in range(reps):
        _kernels.apply_matrix(amps, mat, targets, n_qubits)
    return reps / (time.perf_counter() - start)


def bench_protocol(backend: str, trials: int) -> float:
    """Full honest-vs-measuring protocol runs per second."""
    _kernels.use_backend(backend)
    strat_a = strategies.honest_committer(0)
    strat_b = strategies.measuring_receiver("Z")
    start = time.perf_counter()
    analysis.mc_stats(strat_a, strat_b, trials, seed=1)
    return trials / (time.perf_counter() - start)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--trials", type=int, default=4000)
    parser.add_argument("--reps", type=int, default=20000)
    args = parser.parse_args()

    backends = _kernels.available_backends()
    if "cython" not in backends:
        print("note: compiled backend not built; benchmarking python only")

    print(f"{'workload':<28}" + "".join(f"{b:>14}" for b in backends) + f"{'speedup':>10}")
    for n_qubits, k in ((3, 1), (5, 2), (8, 1), (8, 2), (8, 3)):
        rates = {b: bench_apply(b, n_qubits, k, args.reps) for b in backends}
        row = f"apply {k}q gate on {n_qubits} qubits"
        line = f"{row:<28}" + "".join(f"{rates[b]:>12.0f}/s" for b in backends)
        if len(backends) == 2:
            line += f"{rates['cython'] / rates['python']:>9.2f}x"
        print(line)

    rates = {b: bench_protocol(b, args.trials) for b in backends}
    line = f"{'protocol MC runs':<28}" + "".join(
        f"{rates[b]:>12.0f}/s" for b in backends
    )
    if len(backends) == 2:
        line += f"{rates['cython'] / rates['python']:>9.2f}x"
    print(line)

    _kernels.use_backend("cython" if "cython" in backends else "python")


if __name__ == "__main__":
    main()
