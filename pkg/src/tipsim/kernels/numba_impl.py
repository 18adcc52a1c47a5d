"""Numba backend: jitted scalar loops over configuration codes / trials.

Results are bit-identical to the numpy backend; the splitmix64 stream and
the draw formulas are the same, only the execution strategy differs.
"""
from __future__ import annotations

import numpy as np
from numba import njit, prange

from .encode import EncodedSystem

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_U53 = 2.0**-53

PRED_UNIQUE_TOKEN = 0
PRED_TERMINAL_MIS = 1
PRED_TERMINAL_ALTERNATING = 2


@njit(cache=True, inline="always")
def _mix64(x):
    x = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    x = (x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return x ^ (x >> np.uint64(31))


@njit(cache=True, inline="always")
def _popcount(x):
    x = x - ((x >> np.uint64(1)) & np.uint64(0x5555555555555555))
    x = (x & np.uint64(0x3333333333333333)) + ((x >> np.uint64(2)) & np.uint64(0x3333333333333333))
    x = (x + (x >> np.uint64(4))) & np.uint64(0x0F0F0F0F0F0F0F0F)
    return int((x * np.uint64(0x0101010101010101)) >> np.uint64(56))


@njit(cache=True, inline="always")
def _input(oracle_mode, reach, code, node):
    if oracle_mode == 1:  # global
        return 1 if code != 0 else 0
    if oracle_mode == 2:  # k-distance
        return 1 if (code & reach[node]) != 0 else 0
    return 0


@njit(cache=True, inline="always")
def _match(code, u, v, oracle_mode, reach, guard_ia, guard_io, guard_ra, guard_ro):
    au = (code >> u) & 1
    av = (code >> v) & 1
    ou = _input(oracle_mode, reach, code, u)
    ov = _input(oracle_mode, reach, code, v)
    for r in range(len(guard_ia)):
        if guard_ia[r] != -1 and guard_ia[r] != au:
            continue
        if guard_io[r] != -1 and guard_io[r] != ou:
            continue
        if guard_ra[r] != -1 and guard_ra[r] != av:
            continue
        if guard_ro[r] != -1 and guard_ro[r] != ov:
            continue
        return r
    return -1


@njit(cache=True, inline="always")
def _is_legit(code, pred_id, n, adj):
    if pred_id == PRED_UNIQUE_TOKEN:
        return _popcount(np.uint64(code)) == 1
    for i in range(n):
        has = (code >> i) & 1
        touches = (code & adj[i]) != 0
        if has == 1 and touches:
            return False  # two adjacent agents
        if pred_id == PRED_TERMINAL_MIS and has == 0 and not touches:
            return False  # clean node with no agent neighbour
        if pred_id == PRED_TERMINAL_ALTERNATING and has == 0:
            full = (np.int64(1) << n) - 1
            comp = ~code & full
            if (comp & adj[i]) != 0:
                return False  # two adjacent clean nodes
    return True


@njit(cache=True, parallel=True)
def _expand_count(
    n, pair_u, pair_v, guard_ia, guard_io, guard_ra, guard_ro,
    out_ptr, out_init, out_resp, oracle_mode, reach, counts,
):
    n_configs = np.int64(1) << n
    m = len(pair_u)
    for code in prange(n_configs):
        total = 0
        for j in range(m):
            u = pair_u[j]
            v = pair_v[j]
            r = _match(code, u, v, oracle_mode, reach, guard_ia, guard_io, guard_ra, guard_ro)
            if r < 0:
                continue
            au = (code >> u) & 1
            av = (code >> v) & 1
            for k in range(out_ptr[r], out_ptr[r + 1]):
                if out_init[k] != au or out_resp[k] != av:
                    total += 1
        counts[code] = total


@njit(cache=True, parallel=True)
def _expand_fill(
    n, pair_u, pair_v, guard_ia, guard_io, guard_ra, guard_ro,
    out_ptr, out_init, out_resp, oracle_mode, reach,
    indptr, dst, pair_idx, rule_idx, out_idx, sig,
):
    n_configs = np.int64(1) << n
    m = len(pair_u)
    for code in prange(n_configs):
        pos = indptr[code]
        for j in range(m):
            u = pair_u[j]
            v = pair_v[j]
            r = _match(code, u, v, oracle_mode, reach, guard_ia, guard_io, guard_ra, guard_ro)
            if r < 0:
                continue
            au = (code >> u) & 1
            av = (code >> v) & 1
            for k in range(out_ptr[r], out_ptr[r + 1]):
                ia = out_init[k]
                ra = out_resp[k]
                if ia == au and ra == av:
                    continue
                dst[pos] = (code & ~((np.int64(1) << u) | (np.int64(1) << v))) | (np.int64(ia) << u) | (np.int64(ra) << v)
                pair_idx[pos] = j
                rule_idx[pos] = r
                out_idx[pos] = k - out_ptr[r]
                sig[pos] = (au << 3) | (av << 2) | (ia << 1) | ra
                pos += 1


def expand(sys: EncodedSystem):
    """Same contract as the numpy backend's expand."""
    counts = np.zeros(sys.n_configs, dtype=np.int64)
    _expand_count(
        sys.n, sys.pair_u, sys.pair_v, sys.guard_ia, sys.guard_io, sys.guard_ra, sys.guard_ro,
        sys.out_ptr, sys.out_init, sys.out_resp, sys.oracle_mode, sys.reach, counts,
    )
    total = int(counts.sum())
    indptr = np.zeros(sys.n_configs + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    dst = np.zeros(total, dtype=np.int64)
    pair_idx = np.zeros(total, dtype=np.int32)
    rule_idx = np.zeros(total, dtype=np.int32)
    out_idx = np.zeros(total, dtype=np.int32)
    sig = np.zeros(total, dtype=np.uint8)
    _expand_fill(
        sys.n, sys.pair_u, sys.pair_v, sys.guard_ia, sys.guard_io, sys.guard_ra, sys.guard_ro,
        sys.out_ptr, sys.out_init, sys.out_resp, sys.oracle_mode, sys.reach,
        indptr, dst, pair_idx, rule_idx, out_idx, sig,
    )
    return indptr, dst, pair_idx, rule_idx, out_idx, sig


@njit(cache=True, inline="always")
def _enabled_pair(code, j, pair_u, pair_v, oracle_mode, reach, guard_ia, guard_io, guard_ra, guard_ro, out_ptr, out_init, out_resp):
    r = _match(code, pair_u[j], pair_v[j], oracle_mode, reach, guard_ia, guard_io, guard_ra, guard_ro)
    if r < 0:
        return -1
    au = (code >> pair_u[j]) & 1
    av = (code >> pair_v[j]) & 1
    for k in range(out_ptr[r], out_ptr[r + 1]):
        if out_init[k] != au or out_resp[k] != av:
            return r
    return -1


@njit(cache=True, parallel=True)
def _expand_probs_count(
    n, pair_u, pair_v, guard_ia, guard_io, guard_ra, guard_ro,
    out_ptr, out_init, out_resp, oracle_mode, reach, counts,
):
    n_configs = np.int64(1) << n
    m = len(pair_u)
    for code in prange(n_configs):
        total = 0
        for j in range(m):
            r = _enabled_pair(code, j, pair_u, pair_v, oracle_mode, reach,
                              guard_ia, guard_io, guard_ra, guard_ro, out_ptr, out_init, out_resp)
            if r >= 0:
                total += out_ptr[r + 1] - out_ptr[r]
        counts[code] = total


@njit(cache=True, parallel=True)
def _expand_probs_fill(
    n, pair_u, pair_v, guard_ia, guard_io, guard_ra, guard_ro,
    out_ptr, out_init, out_resp, out_prob, oracle_mode, reach,
    indptr, dst, prob,
):
    n_configs = np.int64(1) << n
    m = len(pair_u)
    for code in prange(n_configs):
        n_enabled = 0
        for j in range(m):
            if _enabled_pair(code, j, pair_u, pair_v, oracle_mode, reach,
                             guard_ia, guard_io, guard_ra, guard_ro, out_ptr, out_init, out_resp) >= 0:
                n_enabled += 1
        if n_enabled == 0:
            continue
        w = 1.0 / n_enabled
        pos = indptr[code]
        for j in range(m):
            r = _enabled_pair(code, j, pair_u, pair_v, oracle_mode, reach,
                              guard_ia, guard_io, guard_ra, guard_ro, out_ptr, out_init, out_resp)
            if r < 0:
                continue
            u = pair_u[j]
            v = pair_v[j]
            for k in range(out_ptr[r], out_ptr[r + 1]):
                ia = out_init[k]
                ra = out_resp[k]
                dst[pos] = (code & ~((np.int64(1) << u) | (np.int64(1) << v))) | (np.int64(ia) << u) | (np.int64(ra) << v)
                prob[pos] = w * out_prob[k]
                pos += 1


def expand_probs(sys: EncodedSystem):
    """Same contract as the numpy backend's expand_probs."""
    counts = np.zeros(sys.n_configs, dtype=np.int64)
    _expand_probs_count(
        sys.n, sys.pair_u, sys.pair_v, sys.guard_ia, sys.guard_io, sys.guard_ra, sys.guard_ro,
        sys.out_ptr, sys.out_init, sys.out_resp, sys.oracle_mode, sys.reach, counts,
    )
    total = int(counts.sum())
    indptr = np.zeros(sys.n_configs + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    dst = np.zeros(total, dtype=np.int64)
    prob = np.zeros(total, dtype=np.float64)
    _expand_probs_fill(
        sys.n, sys.pair_u, sys.pair_v, sys.guard_ia, sys.guard_io, sys.guard_ra, sys.guard_ro,
        sys.out_ptr, sys.out_init, sys.out_resp, sys.out_prob, sys.oracle_mode, sys.reach,
        indptr, dst, prob,
    )
    return indptr, dst, prob


@njit(cache=True, parallel=True)
def _simulate(
    n, pair_u, pair_v, guard_ia, guard_io, guard_ra, guard_ro,
    out_ptr, out_init, out_resp, out_prob, oracle_mode, reach, adj,
    pred_id, initial_code, master, trials, max_steps, steps, conv,
):
    m = len(pair_u)
    for t in prange(trials):
        state = _mix64(_mix64(master) ^ ((np.uint64(t) + np.uint64(1)) * _GOLDEN))
        code = np.int64(initial_code)
        enab = np.empty(m, dtype=np.int64)
        finished = False
        for step in range(max_steps + 1):
            if _is_legit(code, pred_id, n, adj):
                steps[t] = step
                conv[t] = True
                finished = True
                break
            if step == max_steps:
                break
            n_enabled = 0
            for j in range(m):
                r = _match(code, pair_u[j], pair_v[j], oracle_mode, reach, guard_ia, guard_io, guard_ra, guard_ro)
                if r < 0:
                    continue
                au = (code >> pair_u[j]) & 1
                av = (code >> pair_v[j]) & 1
                for k in range(out_ptr[r], out_ptr[r + 1]):
                    if out_init[k] != au or out_resp[k] != av:
                        enab[n_enabled] = j
                        n_enabled += 1
                        break
            if n_enabled == 0:
                steps[t] = step
                conv[t] = False
                finished = True
                break
            state = state + _GOLDEN
            u01 = np.float64(_mix64(state) >> np.uint64(11)) * _U53
            j = enab[np.int64(u01 * n_enabled)]
            u = pair_u[j]
            v = pair_v[j]
            r = _match(code, u, v, oracle_mode, reach, guard_ia, guard_io, guard_ra, guard_ro)
            nout = out_ptr[r + 1] - out_ptr[r]
            b = np.int64(0)
            if nout > 1:
                state = state + _GOLDEN
                u2 = np.float64(_mix64(state) >> np.uint64(11)) * _U53
                acc = 0.0
                b = nout - 1
                for bb in range(nout):
                    acc += out_prob[out_ptr[r] + bb]
                    if u2 < acc:
                        b = bb
                        break
            k = out_ptr[r] + b
            code = (code & ~((np.int64(1) << u) | (np.int64(1) << v))) | (np.int64(out_init[k]) << u) | (np.int64(out_resp[k]) << v)
        if not finished:
            steps[t] = max_steps
            conv[t] = False


def simulate_batch(
    sys: EncodedSystem,
    pred_id: int,
    initial_code: int,
    master_seed: int,
    trials: int,
    max_steps: int,
):
    """Same contract as the numpy backend's simulate_batch."""
    steps = np.zeros(trials, dtype=np.int64)
    conv = np.zeros(trials, dtype=np.bool_)
    master = np.uint64(master_seed & ((1 << 64) - 1))
    _simulate(
        sys.n, sys.pair_u, sys.pair_v, sys.guard_ia, sys.guard_io, sys.guard_ra, sys.guard_ro,
        sys.out_ptr, sys.out_init, sys.out_resp, sys.out_prob, sys.oracle_mode, sys.reach, sys.adj,
        pred_id, initial_code, master, trials, max_steps, steps, conv,
    )
    return steps, conv


@njit(cache=True)
def _jacobi(indptr, cols, probs, rtol, max_iter, h):
    n = len(indptr) - 1
    h_new = np.zeros(n, dtype=np.float64)
    prev_diff = 0.0
    for it in range(1, max_iter + 1):
        diff = 0.0
        hmax = 1.0
        for i in range(n):
            acc = 1.0
            for e in range(indptr[i], indptr[i + 1]):
                acc += probs[e] * h[cols[e]]
            h_new[i] = acc
            d = abs(acc - h[i])
            if d > diff:
                diff = d
            if abs(acc) > hmax:
                hmax = abs(acc)
        for i in range(n):
            h[i] = h_new[i]
        if diff == 0.0:
            return it, True
        if prev_diff > 0.0 and diff < prev_diff:
            # geometric tail estimate: remaining error ~ diff * rho / (1 - rho)
            rho = diff / prev_diff
            if diff * rho / (1.0 - rho) <= rtol * hmax:
                return it, True
        prev_diff = diff
    return max_iter, False


def jacobi_hitting(indptr, cols, probs, rtol: float, max_iter: int):
    """Same contract as the numpy backend's jacobi_hitting."""
    h = np.zeros(len(indptr) - 1, dtype=np.float64)
    iters, ok = _jacobi(indptr, cols, probs, rtol, max_iter, h)
    return h, iters, ok
