"""Exhaustive verification on small instances.

Everything here works on the full 2^n configuration space encoded as
bitmask codes (expansion delegated to the hot kernels):

- verify_stabilization: closure of the legitimate set plus the reachability
  characterization of convergence (from every configuration a legitimate
  one must be reachable), with replayable refutation witnesses.
- token_circulation_liveness: every node holds the agent somewhere in each
  terminal strongly-connected component.
- enumerate_terminals: configurations with no enabled interaction.
- find_fair_nonconverging_lasso: search for a cycle of illegitimate
  configurations whose infinite unrolling is fair; for global fairness a
  constraint-restriction loop over SCCs, exact in both directions.
- local_view_equivalence: a node's one-hop view comparison.
- markov_hitting_time: exact expected steps to the legitimate set under
  the uniform-random enabled-pair scheduler.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph

from . import kernels
from .errors import DomainError, OrderingError, SolverError
from .model import Configuration, Topology
from .oracles import OracleKind, ground_truth
from .predicates import is_legitimate  # noqa: F401  (part of this module's surface)
from .protocols import ProtocolSpec
from .schedulers import Lasso, LassoStep, check_global_fairness_lasso, lasso_is_weakly_fair

log = logging.getLogger(__name__)

HARD_NODE_LIMIT = 20
SOFT_NODE_LIMIT = 12

WITNESS_CAP = 256


@dataclass
class VerdictStats:
    states_explored: int = 0
    edges: int = 0
    time_s: float = 0.0

    def to_json(self) -> dict:
        return {"states_explored": self.states_explored, "edges": self.edges, "time_s": round(self.time_s, 6)}


@dataclass
class Verdict:
    result: str  # "proved" | "refuted" | "inconclusive"
    reason: str = ""
    witness: Optional[dict] = None
    lasso: Optional[Lasso] = None
    stats: VerdictStats = field(default_factory=VerdictStats)

    @property
    def proved(self) -> bool:
        return self.result == "proved"

    def to_json(self) -> dict:
        return {
            "v": 1,
            "result": self.result,
            "reason": self.reason,
            "witness": self.witness,
            "stats": self.stats.to_json(),
        }


class StateSpace:
    """Full configuration graph of (protocol, topology) under a perfect oracle."""

    def __init__(self, protocol: ProtocolSpec, topology: Topology):
        _guard_size(topology)
        self.protocol = protocol
        self.topology = topology
        self.sys = kernels.encode_system(protocol.table, topology, protocol.oracle_requirement)
        self.indptr, self.dst, self.pair, self.rule, self.out, self.sig = kernels.expand(self.sys)
        self.n_configs = self.sys.n_configs
        self.src = np.repeat(np.arange(self.n_configs, dtype=np.int64), np.diff(self.indptr))

    def legit_mask(self, pred: str) -> np.ndarray:
        return kernels.pred_mask(self.sys, kernels.PRED_IDS[pred])

    def config(self, code: int) -> Configuration:
        return kernels.code_to_config(int(code), self.sys.n)

    def can_reach(self, targets: np.ndarray) -> np.ndarray:
        """Backward closure: configurations from which `targets` is reachable."""
        reach = targets.copy()
        while True:
            hits = reach[self.dst] & ~reach[self.src]
            if not hits.any():
                return reach
            reach[self.src[hits]] = True

    def forward_reach(self, start: np.ndarray, allowed: np.ndarray) -> np.ndarray:
        """Forward closure from `start` using only edges between `allowed` configs."""
        reach = start & allowed
        while True:
            hits = reach[self.src] & allowed[self.dst] & ~reach[self.dst]
            if not hits.any():
                return reach
            reach[self.dst[hits]] = True

    def edge_step(self, e: int) -> LassoStep:
        code = int(self.src[e])
        return LassoStep(self.config(code), self.topology.interactions[self.pair[e]], int(self.out[e]))

    def terminal_mask(self) -> np.ndarray:
        return np.diff(self.indptr) == 0


def _guard_size(topology: Topology) -> None:
    n = topology.node_count
    if n > HARD_NODE_LIMIT:
        raise DomainError(f"{n} nodes means 2^{n} configurations; refusing above {HARD_NODE_LIMIT}")
    if n > SOFT_NODE_LIMIT:
        log.warning("%d nodes -> %d configurations; this may be slow", n, 1 << n)


def _config_json(c: Configuration) -> list[int]:
    return [int(a) for a in c.agents]


def _steps_json(steps) -> list[dict]:
    return [
        {"agents": _config_json(s.config), "pair": list(s.pair), "outcome": s.outcome} for s in steps
    ]


# ---------------------------------------------------------------------------
# fair-cycle search


def _edge_key(space: StateSpace, e: int) -> int:
    return int(space.pair[e]) * 16 + int(space.sig[e])


def _bfs_edges_multi(space: StateSpace, starts: list[int], goal: int, allowed: np.ndarray) -> list[int]:
    """Edge indices of a shortest path from any of `starts` to `goal` inside `allowed`."""
    if goal in starts:
        return []
    prev_edge = {s: -1 for s in starts}
    frontier = list(starts)
    while frontier:
        nxt = []
        for u in frontier:
            for e in range(space.indptr[u], space.indptr[u + 1]):
                v = int(space.dst[e])
                if not allowed[v] or v in prev_edge:
                    continue
                prev_edge[v] = e
                if v == goal:
                    path = []
                    cur = v
                    while prev_edge[cur] != -1:
                        path.append(prev_edge[cur])
                        cur = int(space.src[prev_edge[cur]])
                    return path[::-1]
                nxt.append(v)
        frontier = nxt
    raise DomainError("no path found inside the allowed set")


def _bfs_edges(space: StateSpace, start: int, goal: int, allowed: np.ndarray) -> list[int]:
    return _bfs_edges_multi(space, [start], goal, allowed)


def _scc_labels(space: StateSpace, active: np.ndarray) -> tuple[int, np.ndarray]:
    mask_e = active[space.src] & active[space.dst]
    n = space.n_configs
    mat = sp.csr_matrix(
        (np.ones(int(mask_e.sum()), dtype=np.int8), (space.src[mask_e], space.dst[mask_e])),
        shape=(n, n),
    )
    return csgraph.connected_components(mat, directed=True, connection="strong")


def _fair_cycle_global(space: StateSpace, allowed: np.ndarray) -> Optional[list[int]]:
    """Find a cycle (as edge indices) within `allowed` whose infinite
    unrolling is globally fair, by iterated obligation restriction."""
    active = allowed.copy()
    while active.any():
        _, labels = _scc_labels(space, active)
        internal = active[space.src] & active[space.dst] & (labels[space.src] == labels[space.dst])
        nontrivial = np.unique(labels[space.src[internal]]) if internal.any() else np.array([], dtype=int)
        if len(nontrivial) == 0:
            return None
        removed_any = False
        for comp in nontrivial:
            members = active & (labels == comp)
            out_edges = members[space.src]
            internal_edges = out_edges & members[space.dst]
            obligations = {}
            for e in np.nonzero(out_edges)[0]:
                obligations.setdefault(_edge_key(space, int(e)), []).append(int(e))
            realized = {_edge_key(space, int(e)) for e in np.nonzero(internal_edges)[0]}
            missing = [k for k in obligations if k not in realized]
            if not missing:
                picks = {}
                for e in np.nonzero(internal_edges)[0]:
                    picks.setdefault(_edge_key(space, int(e)), int(e))
                return _assemble_cycle(space, members, sorted(picks.values()))
            drop = np.zeros(space.n_configs, dtype=bool)
            for k in missing:
                for e in obligations[k]:
                    drop[int(space.src[e])] = True
            if drop.any():
                active &= ~drop
                removed_any = True
        if not removed_any:
            return None
    return None


def _fair_cycle_weak(space: StateSpace, allowed: np.ndarray) -> Optional[list[int]]:
    """Find a cycle within `allowed` whose unrolling is weakly fair: pairs
    enabled at every configuration of the cycle must be scheduled on it.
    The cycle tours a whole SCC, so the continuously-enabled set is the
    intersection over the SCC."""
    _, labels = _scc_labels(space, allowed)
    internal = allowed[space.src] & allowed[space.dst] & (labels[space.src] == labels[space.dst])
    if not internal.any():
        return None
    for comp in np.unique(labels[space.src[internal]]):
        members = allowed & (labels == comp)
        member_codes = np.nonzero(members)[0]
        continuously: Optional[set[int]] = None
        for code in member_codes:
            here = {int(space.pair[e]) for e in range(space.indptr[code], space.indptr[code + 1])}
            continuously = here if continuously is None else (continuously & here)
            if not continuously:
                break
        internal_pairs = {int(space.pair[e]) for e in np.nonzero(internal & (labels[space.src] == comp))[0]}
        if continuously and not continuously <= internal_pairs:
            continue
        # tour all members, scheduling one internal edge per continuously-enabled pair
        picks = []
        wanted = set(continuously or set())
        for e in np.nonzero(internal & (labels[space.src] == comp))[0]:
            p = int(space.pair[e])
            if p in wanted:
                picks.append(int(e))
                wanted.discard(p)
        return _assemble_tour(space, members, picks)
    return None


def _assemble_cycle(space: StateSpace, members: np.ndarray, picks: list[int]) -> list[int]:
    """Closed edge walk within `members` taking each picked edge once."""
    if not picks:
        return []
    walk = []
    start = int(space.src[picks[0]])
    cur = start
    for e in picks:
        walk.extend(_bfs_edges(space, cur, int(space.src[e]), members))
        walk.append(e)
        cur = int(space.dst[e])
    walk.extend(_bfs_edges(space, cur, start, members))
    return walk


def _assemble_tour(space: StateSpace, members: np.ndarray, picks: list[int]) -> list[int]:
    """Closed walk visiting every member config and taking each picked edge."""
    codes = [int(c) for c in np.nonzero(members)[0]]
    walk = []
    start = codes[0]
    cur = start
    for target in codes[1:]:
        walk.extend(_bfs_edges(space, cur, target, members))
        cur = target
    for e in picks:
        walk.extend(_bfs_edges(space, cur, int(space.src[e]), members))
        walk.append(e)
        cur = int(space.dst[e])
    walk.extend(_bfs_edges(space, cur, start, members))
    if not walk:  # single config, nothing scheduled: not a cycle
        raise DomainError("degenerate tour")
    return walk


def _lasso_from_edges(space: StateSpace, stem_edges: list[int], cycle_edges: list[int]) -> Lasso:
    return Lasso(
        tuple(space.edge_step(e) for e in stem_edges),
        tuple(space.edge_step(e) for e in cycle_edges),
    )


def find_fair_nonconverging_lasso(
    protocol: ProtocolSpec,
    topology: Topology,
    pred: Optional[str] = None,
    fairness: str = "global",
    initial: Optional[list[Configuration]] = None,
) -> Verdict:
    """Search for a fair lasso that avoids the legitimate set entirely.

    `initial` restricts where the stem may start (default: any illegitimate
    configuration).  result "refuted" carries the witness; "proved" means
    the exhaustive search found none.
    """
    if fairness not in ("global", "weak"):
        raise DomainError(f"unknown fairness {fairness!r}")
    t0 = time.monotonic()
    space = StateSpace(protocol, topology)
    pred = pred or protocol.legitimacy
    bad = ~space.legit_mask(pred)
    start = bad.copy()
    if initial is not None:
        start = np.zeros(space.n_configs, dtype=bool)
        for c in initial:
            code = kernels.config_to_code(c)
            if bad[code]:
                start[code] = True
    stats = VerdictStats(states_explored=space.n_configs, edges=len(space.dst))
    reachable = space.forward_reach(start, bad)
    search = _fair_cycle_global if fairness == "global" else _fair_cycle_weak
    cycle_edges = search(space, reachable)
    stats.time_s = time.monotonic() - t0
    if cycle_edges is None:
        return Verdict("proved", f"no {fairness}ly fair non-converging lasso exists", stats=stats)
    first = int(space.src[cycle_edges[0]])
    if start[first]:
        stem_edges = []
    else:
        starts = [int(c) for c in np.nonzero(start)[0]]
        stem_edges = _bfs_edges_multi(space, starts, first, reachable)
    lasso = _lasso_from_edges(space, stem_edges, cycle_edges)
    if fairness == "global":
        assert check_global_fairness_lasso(lasso, topology, protocol)
    else:
        assert lasso_is_weakly_fair(lasso, topology, protocol)
    witness = {
        "kind": "lasso",
        "fairness": fairness,
        "pred": pred,
        **lasso.to_json(),
    }
    return Verdict("refuted", "fair non-converging lasso found", witness, lasso, stats)


# ---------------------------------------------------------------------------
# stabilization / liveness / terminals


def verify_stabilization(protocol: ProtocolSpec, topology: Topology, pred: Optional[str] = None) -> Verdict:
    """Closure plus convergence on the full configuration graph.

    Convergence uses the reachability characterization: from every
    configuration (all of which are possible initial states) a legitimate
    configuration must be reachable, and the legitimate set must be closed
    under every transition.
    """
    t0 = time.monotonic()
    pred = pred or protocol.legitimacy
    space = StateSpace(protocol, topology)
    legit = space.legit_mask(pred)
    stats = VerdictStats(states_explored=space.n_configs, edges=len(space.dst))

    def done(v: Verdict) -> Verdict:
        v.stats = stats
        stats.time_s = time.monotonic() - t0
        return v

    if not legit.any():
        refutation = _nonconvergence_witness(space, protocol, topology, pred, np.ones(space.n_configs, dtype=bool))
        return done(Verdict("refuted", "legitimate set is empty", refutation[0], refutation[1]))

    bad_edges = legit[space.src] & ~legit[space.dst]
    if bad_edges.any():
        e = int(np.nonzero(bad_edges)[0][0])
        step = space.edge_step(e)
        witness = {
            "kind": "closure-violation",
            "pred": pred,
            "config": _config_json(step.config),
            "pair": list(step.pair),
            "outcome": step.outcome,
            "successor": _config_json(space.config(int(space.dst[e]))),
        }
        return done(Verdict("refuted", "legitimate set is not closed", witness))

    converging = space.can_reach(legit)
    if not converging.all():
        nonconv = ~converging
        refutation = _nonconvergence_witness(space, protocol, topology, pred, nonconv)
        return done(Verdict("refuted", "legitimate set unreachable from some configurations", refutation[0], refutation[1]))

    return done(Verdict("proved", "closure and convergence hold"))


def _nonconvergence_witness(
    space: StateSpace,
    protocol: ProtocolSpec,
    topology: Topology,
    pred: str,
    nonconv: np.ndarray,
) -> tuple[dict, Optional[Lasso]]:
    """A replayable witness inside the non-converging set: a fair lasso if
    one exists there, otherwise a dead illegitimate configuration."""
    codes = np.nonzero(nonconv)[0][:WITNESS_CAP]
    witness = {
        "kind": "nonconvergence",
        "pred": pred,
        "nonconverging_initials": [_config_json(space.config(int(c))) for c in codes],
        "nonconverging_count": int(nonconv.sum()),
    }
    cycle_edges = _fair_cycle_global(space, nonconv)
    if cycle_edges is not None:
        first = int(space.src[cycle_edges[0]])
        lasso = _lasso_from_edges(space, [], cycle_edges)
        assert check_global_fairness_lasso(lasso, topology, protocol)
        witness["lasso"] = {"fairness": "global", **lasso.to_json()}
        return witness, lasso
    dead = nonconv & space.terminal_mask()
    if dead.any():
        witness["terminal"] = _config_json(space.config(int(np.nonzero(dead)[0][0])))
    return witness, None


def token_circulation_liveness(
    protocol: ProtocolSpec,
    topology: Topology,
    stabilization: Optional[Verdict] = None,
) -> Verdict:
    """Every node must hold the agent in some configuration of every
    terminal strongly-connected component of the configuration graph."""
    t0 = time.monotonic()
    if stabilization is None:
        stabilization = verify_stabilization(protocol, topology, "unique-token")
    if not stabilization.proved:
        raise OrderingError("token_circulation_liveness requires a proved stabilization verdict")
    space = StateSpace(protocol, topology)
    stats = VerdictStats(states_explored=space.n_configs, edges=len(space.dst))
    n_comp, labels = _scc_labels(space, np.ones(space.n_configs, dtype=bool))
    # a component is terminal when no edge leaves it
    leaves = labels[space.src] != labels[space.dst]
    nonterminal_comps = set(np.unique(labels[space.src[leaves]]))
    full = (1 << space.sys.n) - 1
    codes = np.arange(space.n_configs, dtype=np.int64)
    for comp in range(n_comp):
        if comp in nonterminal_comps:
            continue
        member_codes = codes[labels == comp]
        held = 0
        for c in member_codes:
            held |= int(c)
        if held != full:
            missing = [u for u in range(space.sys.n) if not (held >> u) & 1]
            witness = {
                "kind": "liveness-gap",
                "missing_nodes": missing,
                "component": [_config_json(space.config(int(c))) for c in member_codes[:WITNESS_CAP]],
            }
            stats.time_s = time.monotonic() - t0
            return Verdict("refuted", f"node {missing[0]} never holds the agent in a terminal component", witness, stats=stats)
    stats.time_s = time.monotonic() - t0
    return Verdict("proved", "every node holds the agent in every terminal component", stats=stats)


def enumerate_terminals(protocol: ProtocolSpec, topology: Topology) -> list[Configuration]:
    """All configurations with no enabled interaction (perfect oracle)."""
    space = StateSpace(protocol, topology)
    return [space.config(int(c)) for c in np.nonzero(space.terminal_mask())[0]]


# ---------------------------------------------------------------------------
# views and Markov analysis


def local_view_equivalence(
    topology: Topology,
    c1: Configuration,
    c2: Configuration,
    node: int,
    oracle: Optional[OracleKind] = None,
) -> bool:
    """True when `node` cannot distinguish c1 from c2: same own agent slot,
    same agent presence on every interaction partner, and (when an oracle
    is given) the same detector input at `node`."""
    if c1.node_count != topology.node_count or c2.node_count != topology.node_count:
        raise DomainError("configurations do not match the topology")
    if not (0 <= node < topology.node_count):
        raise DomainError(f"node {node} out of range")
    if c1.agents[node] != c2.agents[node]:
        return False
    for partner in topology.partners(node):
        if c1.agents[partner] != c2.agents[partner]:
            return False
    if oracle is not None:
        if ground_truth(oracle, c1, topology, node) != ground_truth(oracle, c2, topology, node):
            return False
    return True


def markov_hitting_time(
    protocol: ProtocolSpec,
    topology: Topology,
    initial: Configuration,
    pred: Optional[str] = None,
    rtol: float = 1e-10,
    max_iter: int = 2_000_000,
) -> float:
    """Exact expected steps to the legitimate set under the uniform-random
    enabled-pair scheduler, probabilistic branches weighted exactly.

    Returns math.inf when absorption is not almost sure.  The linear system
    is solved by Jacobi iteration to relative tolerance `rtol`.
    """
    _guard_size(topology)
    pred = pred or protocol.legitimacy
    sys_ = kernels.encode_system(protocol.table, topology, protocol.oracle_requirement)
    legit = kernels.pred_mask(sys_, kernels.PRED_IDS[pred])
    code = kernels.config_to_code(initial)
    if legit[code]:
        return 0.0
    indptr, dst, prob = kernels.expand_probs(sys_)
    src = np.repeat(np.arange(sys_.n_configs, dtype=np.int64), np.diff(indptr))

    # forward reachability, not expanding past absorbing configs
    reach = np.zeros(sys_.n_configs, dtype=bool)
    reach[code] = True
    while True:
        hits = reach[src] & ~legit[src] & ~reach[dst]
        if not hits.any():
            break
        reach[dst[hits]] = True

    # absorption is almost sure iff every reachable transient can reach legit
    can = legit.copy()
    while True:
        hits = can[dst] & ~can[src]
        if not hits.any():
            break
        can[src[hits]] = True
    if not can[reach].all():
        return float("inf")

    transient = np.nonzero(reach & ~legit)[0]
    index_of = -np.ones(sys_.n_configs, dtype=np.int64)
    index_of[transient] = np.arange(len(transient))
    keep = reach[src] & ~legit[src] & ~legit[dst]
    sub_src = index_of[src[keep]]
    sub_dst = index_of[dst[keep]]
    sub_prob = prob[keep]
    order = np.argsort(sub_src, kind="stable")
    sub_src, sub_dst, sub_prob = sub_src[order], sub_dst[order], sub_prob[order]
    sub_indptr = np.zeros(len(transient) + 1, dtype=np.int64)
    np.cumsum(np.bincount(sub_src, minlength=len(transient)), out=sub_indptr[1:])

    h, iters, ok = kernels.jacobi_hitting(sub_indptr, sub_dst, sub_prob, rtol, max_iter)
    if not ok:
        raise SolverError(f"hitting-time iteration did not reach rtol={rtol} in {max_iter} iterations")
    log.debug("hitting time solved in %d iterations over %d transient states", iters, len(transient))
    return float(h[index_of[code]])
