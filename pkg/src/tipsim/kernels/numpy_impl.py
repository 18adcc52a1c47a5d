"""Pure numpy backend: vectorized over configuration codes / trials.

Must produce results identical to the numba backend: same successor
ordering, same per-trial random streams (splitmix64 re-implemented on
uint64 arrays).
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .encode import ORACLE_GLOBAL, ORACLE_K, EncodedSystem, pred_mask

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_U53 = 2.0**-53


def _mix64(x: np.ndarray) -> np.ndarray:
    x = (x ^ (x >> np.uint64(30))) * _MIX1
    x = (x ^ (x >> np.uint64(27))) * _MIX2
    return x ^ (x >> np.uint64(31))


def _substream(master: int, index: np.ndarray) -> np.ndarray:
    m = _mix64(np.full(len(index), master & ((1 << 64) - 1), dtype=np.uint64))
    return _mix64(m ^ ((index.astype(np.uint64) + np.uint64(1)) * _GOLDEN))


def _inputs(sys: EncodedSystem, codes: np.ndarray, node: int) -> np.ndarray:
    if sys.oracle_mode == ORACLE_GLOBAL:
        return (codes != 0).astype(np.int8)
    if sys.oracle_mode == ORACLE_K:
        return ((codes & sys.reach[node]) != 0).astype(np.int8)
    return np.zeros(len(codes), dtype=np.int8)


def _matched_rules(sys: EncodedSystem, codes: np.ndarray, j: int) -> np.ndarray:
    """First-match rule index per code for pair j; -1 when no rule fires."""
    u, v = int(sys.pair_u[j]), int(sys.pair_v[j])
    au = ((codes >> u) & 1).astype(np.int8)
    av = ((codes >> v) & 1).astype(np.int8)
    ou = _inputs(sys, codes, u)
    ov = _inputs(sys, codes, v)
    matched = np.full(len(codes), -1, dtype=np.int8)
    for r in range(len(sys.guard_ia)):
        ok = matched == -1
        for guard, val in (
            (sys.guard_ia[r], au),
            (sys.guard_io[r], ou),
            (sys.guard_ra[r], av),
            (sys.guard_ro[r], ov),
        ):
            if guard != -1:
                ok &= val == guard
        matched[ok] = r
    return matched


def expand(sys: EncodedSystem):
    """Successor edges for every configuration code, CSR by source.

    Returns (indptr, dst, pair_idx, rule_idx, out_idx, sig); edges sorted by
    (src, pair, outcome).  sig packs (agent_u, agent_v, new_u, new_v) bits.
    """
    codes = np.arange(sys.n_configs, dtype=np.int64)
    srcs, dsts, pairs, rules, outs, sigs = [], [], [], [], [], []
    for j in range(sys.m):
        u, v = int(sys.pair_u[j]), int(sys.pair_v[j])
        au = ((codes >> u) & 1).astype(np.int8)
        av = ((codes >> v) & 1).astype(np.int8)
        matched = _matched_rules(sys, codes, j)
        cleared = codes & ~((1 << u) | (1 << v))
        for r in range(len(sys.guard_ia)):
            sel_r = matched == r
            if not sel_r.any():
                continue
            for k in range(int(sys.out_ptr[r]), int(sys.out_ptr[r + 1])):
                ia, ra = int(sys.out_init[k]), int(sys.out_resp[k])
                changed = sel_r & ((au != ia) | (av != ra))
                if not changed.any():
                    continue
                sel_codes = codes[changed]
                srcs.append(sel_codes)
                dsts.append(cleared[changed] | (ia << u) | (ra << v))
                pairs.append(np.full(len(sel_codes), j, dtype=np.int32))
                rules.append(np.full(len(sel_codes), r, dtype=np.int32))
                outs.append(np.full(len(sel_codes), k - int(sys.out_ptr[r]), dtype=np.int32))
                sigs.append(
                    (au[changed].astype(np.uint8) << 3)
                    | (av[changed].astype(np.uint8) << 2)
                    | (ia << 1)
                    | ra
                )
    if srcs:
        src = np.concatenate(srcs)
        dst = np.concatenate(dsts)
        pair = np.concatenate(pairs)
        rule = np.concatenate(rules)
        out = np.concatenate(outs)
        sig = np.concatenate(sigs)
        order = np.lexsort((out, pair, src))
        src, dst, pair, rule, out, sig = (a[order] for a in (src, dst, pair, rule, out, sig))
    else:
        src = np.zeros(0, dtype=np.int64)
        dst = np.zeros(0, dtype=np.int64)
        pair = np.zeros(0, dtype=np.int32)
        rule = np.zeros(0, dtype=np.int32)
        out = np.zeros(0, dtype=np.int32)
        sig = np.zeros(0, dtype=np.uint8)
    indptr = np.zeros(sys.n_configs + 1, dtype=np.int64)
    np.cumsum(np.bincount(src, minlength=sys.n_configs), out=indptr[1:])
    return indptr, dst, pair, rule, out, sig


def expand_probs(sys: EncodedSystem):
    """Markov transition CSR under the uniform-random enabled-pair scheduler.

    No-op branches of enabled pairs contribute self-loop mass; terminal
    configurations get empty rows.  Returns (indptr, dst, prob).
    """
    codes = np.arange(sys.n_configs, dtype=np.int64)
    matched_all = [_matched_rules(sys, codes, j) for j in range(sys.m)]
    enabled_all = []
    enab_count = np.zeros(sys.n_configs, dtype=np.int64)
    for j in range(sys.m):
        u, v = int(sys.pair_u[j]), int(sys.pair_v[j])
        au = ((codes >> u) & 1).astype(np.int8)
        av = ((codes >> v) & 1).astype(np.int8)
        matched = matched_all[j]
        enabled = np.zeros(sys.n_configs, dtype=bool)
        for r in range(len(sys.guard_ia)):
            sel_r = matched == r
            if not sel_r.any():
                continue
            change_any = np.zeros(sys.n_configs, dtype=bool)
            for k in range(int(sys.out_ptr[r]), int(sys.out_ptr[r + 1])):
                change_any |= (au != sys.out_init[k]) | (av != sys.out_resp[k])
            enabled |= sel_r & change_any
        enabled_all.append(enabled)
        enab_count += enabled
    srcs, dsts, probs = [], [], []
    inv_count = np.zeros(sys.n_configs, dtype=np.float64)
    nonterm = enab_count > 0
    inv_count[nonterm] = 1.0 / enab_count[nonterm]
    for j in range(sys.m):
        u, v = int(sys.pair_u[j]), int(sys.pair_v[j])
        enabled = enabled_all[j]
        matched = matched_all[j]
        cleared = codes & ~((1 << u) | (1 << v))
        for r in range(len(sys.guard_ia)):
            sel = enabled & (matched == r)
            if not sel.any():
                continue
            sel_codes = codes[sel]
            for k in range(int(sys.out_ptr[r]), int(sys.out_ptr[r + 1])):
                ia, ra = int(sys.out_init[k]), int(sys.out_resp[k])
                srcs.append(sel_codes)
                dsts.append(cleared[sel] | (ia << u) | (ra << v))
                probs.append(inv_count[sel] * sys.out_prob[k])
    if srcs:
        src = np.concatenate(srcs)
        dst = np.concatenate(dsts)
        prob = np.concatenate(probs)
        order = np.argsort(src, kind="stable")
        src, dst, prob = src[order], dst[order], prob[order]
    else:
        src = np.zeros(0, dtype=np.int64)
        dst = np.zeros(0, dtype=np.int64)
        prob = np.zeros(0, dtype=np.float64)
    indptr = np.zeros(sys.n_configs + 1, dtype=np.int64)
    np.cumsum(np.bincount(src, minlength=sys.n_configs), out=indptr[1:])
    return indptr, dst, prob


def simulate_batch(
    sys: EncodedSystem,
    pred_id: int,
    initial_code: int,
    master_seed: int,
    trials: int,
    max_steps: int,
):
    """Run `trials` independent executions under the uniform-random scheduler.

    Returns (steps, converged): steps taken when each trial stopped, and
    whether it stopped in a legitimate configuration.
    """
    T = trials
    codes = np.full(T, initial_code, dtype=np.int64)
    states = _substream(master_seed, np.arange(T, dtype=np.int64))
    steps = np.zeros(T, dtype=np.int64)
    conv = np.zeros(T, dtype=bool)
    active = np.ones(T, dtype=bool)
    n_rules = len(sys.guard_ia)
    max_nout = int(np.max(sys.out_ptr[1:] - sys.out_ptr[:-1])) if n_rules else 1

    for step in range(max_steps + 1):
        if not active.any():
            break
        legit = pred_mask(sys, pred_id, codes) & active
        steps[legit] = step
        conv[legit] = True
        active &= ~legit
        if step == max_steps or not active.any():
            steps[active] = max_steps
            break

        matched_m = np.full((T, sys.m), -1, dtype=np.int8)
        enabled_m = np.zeros((T, sys.m), dtype=bool)
        for j in range(sys.m):
            u, v = int(sys.pair_u[j]), int(sys.pair_v[j])
            au = ((codes >> u) & 1).astype(np.int8)
            av = ((codes >> v) & 1).astype(np.int8)
            matched = _matched_rules(sys, codes, j)
            matched_m[:, j] = matched
            for r in range(n_rules):
                sel_r = matched == r
                if not sel_r.any():
                    continue
                change_any = np.zeros(T, dtype=bool)
                for k in range(int(sys.out_ptr[r]), int(sys.out_ptr[r + 1])):
                    change_any |= (au != sys.out_init[k]) | (av != sys.out_resp[k])
                enabled_m[:, j] |= sel_r & change_any

        k_enabled = enabled_m.sum(axis=1)
        dead = active & (k_enabled == 0)
        steps[dead] = step
        active &= ~dead
        if not active.any():
            continue

        # one pair-selection draw per active trial
        states[active] = states[active] + _GOLDEN
        x = _mix64(states[active])
        u01 = (x >> np.uint64(11)).astype(np.float64) * _U53
        target = (u01 * k_enabled[active]).astype(np.int64) + 1
        cs = np.cumsum(enabled_m[active], axis=1)
        col = np.argmax((cs == target[:, None]) & enabled_m[active], axis=1)

        act_idx = np.nonzero(active)[0]
        ridx = matched_m[act_idx, col].astype(np.int64)
        nout = sys.out_ptr[ridx + 1] - sys.out_ptr[ridx]
        branch = np.zeros(len(act_idx), dtype=np.int64)
        needs = nout > 1
        if needs.any():
            draw_idx = act_idx[needs]
            states[draw_idx] = states[draw_idx] + _GOLDEN
            u2 = (_mix64(states[draw_idx]) >> np.uint64(11)).astype(np.float64) * _U53
            acc = np.zeros(len(draw_idx), dtype=np.float64)
            b_sel = np.full(len(draw_idx), -1, dtype=np.int64)
            sub_ridx = ridx[needs]
            sub_nout = nout[needs]
            for b in range(max_nout):
                has_b = b < sub_nout
                p = np.where(has_b, sys.out_prob[np.minimum(sys.out_ptr[sub_ridx] + b, len(sys.out_prob) - 1)], 0.0)
                acc += p
                pick = (b_sel == -1) & has_b & (u2 < acc)
                b_sel[pick] = b
            b_sel[b_sel == -1] = sub_nout[b_sel == -1] - 1
            branch[needs] = b_sel

        out_at = sys.out_ptr[ridx] + branch
        ia = sys.out_init[out_at].astype(np.int64)
        ra = sys.out_resp[out_at].astype(np.int64)
        uu = sys.pair_u[col]
        vv = sys.pair_v[col]
        cleared = codes[act_idx] & ~((np.int64(1) << uu) | (np.int64(1) << vv))
        codes[act_idx] = cleared | (ia << uu) | (ra << vv)

    return steps, conv


def jacobi_hitting(indptr, cols, probs, rtol: float, max_iter: int):
    """Jacobi iteration for h = 1 + P h on a substochastic CSR matrix.

    Returns (h, iterations, converged).
    """
    n = len(indptr) - 1
    P = sp.csr_matrix((probs, cols, indptr), shape=(n, n))
    h = np.zeros(n, dtype=np.float64)
    prev_diff = 0.0
    for it in range(1, max_iter + 1):
        h_new = 1.0 + P.dot(h)
        diff = float(np.max(np.abs(h_new - h)))
        scale = max(1.0, float(np.max(np.abs(h_new))))
        h = h_new
        if diff == 0.0:
            return h, it, True
        if prev_diff > 0.0 and diff < prev_diff:
            # geometric tail estimate: remaining error ~ diff * rho / (1 - rho)
            rho = diff / prev_diff
            if diff * rho / (1.0 - rho) <= rtol * scale:
                return h, it, True
        prev_diff = diff
    return h, max_iter, False
