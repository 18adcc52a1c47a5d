"""Compare the numba and numpy kernel backends on the three hot paths.

Usage: python benchmarks/bench_kernels.py [--nodes 14] [--trials 20000]

Each benchmark runs the same workload through both backends, checks the
outputs agree, and reports wall-clock times (best of `--repeat`).
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from tipsim import builtin
from tipsim.kernels import PRED_IDS, encode_system, get_impl, pred_mask
from tipsim.topologies import chain, complete, ring


def best_of(repeat, fn, *args):
    best = float("inf")
    result = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        result = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, result


def bench_expand(impls, n, repeat):
    spec = builtin("chain-token")
    sys_ = encode_system(spec.table, ring(n), spec.oracle_requirement)
    times, outputs = {}, {}
    for name, impl in impls.items():
        times[name], outputs[name] = best_of(repeat, impl.expand, sys_)
    for a, b in zip(outputs["numba"], outputs["numpy"]):
        assert np.array_equal(a, b)
    edges = len(outputs["numba"][1])
    return f"expand (ring:{n}, {1 << n} configs, {edges} edges)", times


def bench_simulate(impls, trials, repeat):
    spec = builtin("prob-token")
    sys_ = encode_system(spec.table, complete(5), spec.oracle_requirement)
    args = (sys_, PRED_IDS["unique-token"], (1 << 5) - 1, 7, trials, 100000)
    times, outputs = {}, {}
    for name, impl in impls.items():
        times[name], outputs[name] = best_of(repeat, impl.simulate_batch, *args)
    assert np.array_equal(outputs["numba"][0], outputs["numpy"][0])
    return f"simulate_batch (K5, {trials} trials)", times


def bench_jacobi(impls, n, repeat):
    spec = builtin("prob-token")
    sys_ = encode_system(spec.table, chain(n), spec.oracle_requirement)
    indptr, dst, prob = get_impl("numba").expand_probs(sys_)
    legit = pred_mask(sys_, PRED_IDS["unique-token"])
    src = np.repeat(np.arange(sys_.n_configs), np.diff(indptr))
    keep = ~legit[src] & ~legit[dst]
    trans = np.nonzero(~legit)[0]
    remap = -np.ones(sys_.n_configs, dtype=np.int64)
    remap[trans] = np.arange(len(trans))
    s, d, p = remap[src[keep]], remap[dst[keep]], prob[keep]
    order = np.argsort(s, kind="stable")
    s, d, p = s[order], d[order], p[order]
    sub_indptr = np.zeros(len(trans) + 1, dtype=np.int64)
    np.cumsum(np.bincount(s, minlength=len(trans)), out=sub_indptr[1:])
    times, outputs = {}, {}
    for name, impl in impls.items():
        times[name], outputs[name] = best_of(repeat, impl.jacobi_hitting, sub_indptr, d, p, 1e-10, 2_000_000)
    assert np.allclose(outputs["numba"][0], outputs["numpy"][0], rtol=1e-8, atol=1e-8)
    return f"jacobi_hitting (chain:{n}, {len(trans)} transient states)", times


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--nodes", type=int, default=14, help="ring size for the expansion benchmark")
    parser.add_argument("--trials", type=int, default=20000)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()

    impls = {"numba": get_impl("numba"), "numpy": get_impl("numpy")}

    # trigger jit compilation outside the timed sections
    warm = encode_system(builtin("prob-token").table, complete(3), builtin("prob-token").oracle_requirement)
    impls["numba"].expand(warm)
    impls["numba"].expand_probs(warm)
    impls["numba"].simulate_batch(warm, 0, 7, 1, 8, 100)
    impls["numba"].jacobi_hitting(np.array([0, 0], dtype=np.int64), np.zeros(0, dtype=np.int64),
                                  np.zeros(0), 1e-10, 10)

    rows = [
        bench_expand(impls, args.nodes, args.repeat),
        bench_simulate(impls, args.trials, args.repeat),
        bench_jacobi(impls, min(args.nodes, 12), args.repeat),
    ]
    width = max(len(label) for label, _ in rows)
    print(f"{'benchmark':<{width}}  {'numba':>10}  {'numpy':>10}  {'speedup':>8}")
    for label, times in rows:
        speedup = times["numpy"] / times["numba"] if times["numba"] > 0 else float("inf")
        print(f"{label:<{width}}  {times['numba']*1e3:>8.1f}ms  {times['numpy']*1e3:>8.1f}ms  {speedup:>7.1f}x")


if __name__ == "__main__":
    main()
