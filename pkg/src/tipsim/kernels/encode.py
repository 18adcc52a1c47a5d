"""Array encoding of (table, topology, oracle) for the hot kernels.

Configurations are encoded as integer bitmasks of the agent slots, so the
whole 2^n configuration space is just `arange(2**n)`.  Oracle inputs are
recomputed from the bitmask (perfect detector): global mode reads
`code != 0`, k-distance mode tests `code & reach[node]`.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError, DomainError
from ..model import Configuration, RuleTable, Topology
from ..oracles import OracleKind, reach_sets

ORACLE_NONE = 0
ORACLE_GLOBAL = 1
ORACLE_K = 2

PRED_UNIQUE_TOKEN = 0
PRED_TERMINAL_MIS = 1
PRED_TERMINAL_ALTERNATING = 2

PRED_IDS = {
    "unique-token": PRED_UNIQUE_TOKEN,
    "terminal-mis": PRED_TERMINAL_MIS,
    "terminal-alternating": PRED_TERMINAL_ALTERNATING,
}


@dataclass
class EncodedSystem:
    n: int
    pair_u: np.ndarray  # int64[m]
    pair_v: np.ndarray  # int64[m]
    guard_ia: np.ndarray  # int8[R], -1 wildcard / 0 / 1
    guard_io: np.ndarray
    guard_ra: np.ndarray
    guard_ro: np.ndarray
    out_ptr: np.ndarray  # int64[R+1]
    out_init: np.ndarray  # int8[n_out]
    out_resp: np.ndarray  # int8[n_out]
    out_prob: np.ndarray  # float64[n_out]
    oracle_mode: int
    reach: np.ndarray  # int64[n], bitmasks (k-distance only, else zeros)
    adj: np.ndarray  # int64[n], undirected adjacency bitmasks

    @property
    def m(self) -> int:
        return len(self.pair_u)

    @property
    def n_configs(self) -> int:
        return 1 << self.n


def _pat(value) -> int:
    return -1 if value is None else int(value)


def encode_system(table: RuleTable, topology: Topology, oracle_kind: OracleKind | None) -> EncodedSystem:
    n = topology.node_count
    if n > 62:
        raise DomainError("bitmask encoding supports at most 62 nodes")
    if table.mentions_oracle() and oracle_kind is None:
        raise ConfigurationError("table reads oracle inputs but no oracle kind was given")

    pair_u = np.array([u for u, _ in topology.interactions], dtype=np.int64)
    pair_v = np.array([v for _, v in topology.interactions], dtype=np.int64)

    rules = table.rules
    guard_ia = np.array([_pat(r.init_agent) for r in rules], dtype=np.int8)
    guard_io = np.array([_pat(r.init_oracle) for r in rules], dtype=np.int8)
    guard_ra = np.array([_pat(r.resp_agent) for r in rules], dtype=np.int8)
    guard_ro = np.array([_pat(r.resp_oracle) for r in rules], dtype=np.int8)

    out_ptr = np.zeros(len(rules) + 1, dtype=np.int64)
    out_init, out_resp, out_prob = [], [], []
    for i, r in enumerate(rules):
        for o in r.outcomes:
            out_init.append(int(o.init_agent))
            out_resp.append(int(o.resp_agent))
            out_prob.append(float(o.prob))
        out_ptr[i + 1] = out_ptr[i] + len(r.outcomes)

    if oracle_kind is None:
        mode, reach = ORACLE_NONE, np.zeros(n, dtype=np.int64)
    elif oracle_kind.kind == "global":
        mode, reach = ORACLE_GLOBAL, np.zeros(n, dtype=np.int64)
    else:
        mode = ORACLE_K
        sets = reach_sets(topology, oracle_kind.k)
        reach = np.array([sum(1 << i for i in s) for s in sets], dtype=np.int64)

    adj = np.zeros(n, dtype=np.int64)
    for u, nbrs in enumerate(topology.neighbors):
        adj[u] = sum(1 << v for v in nbrs)

    return EncodedSystem(
        n=n,
        pair_u=pair_u,
        pair_v=pair_v,
        guard_ia=guard_ia,
        guard_io=guard_io,
        guard_ra=guard_ra,
        guard_ro=guard_ro,
        out_ptr=out_ptr,
        out_init=np.array(out_init, dtype=np.int8),
        out_resp=np.array(out_resp, dtype=np.int8),
        out_prob=np.array(out_prob, dtype=np.float64),
        oracle_mode=mode,
        reach=reach,
        adj=adj,
    )


def config_to_code(c: Configuration) -> int:
    return sum(1 << i for i, a in enumerate(c.agents) if a)


def code_to_config(code: int, n: int) -> Configuration:
    return Configuration(tuple(bool((code >> i) & 1) for i in range(n)))


def pred_mask(sys: EncodedSystem, pred_id: int, codes: np.ndarray | None = None) -> np.ndarray:
    """Vectorized legitimacy predicate over configuration codes."""
    if codes is None:
        codes = np.arange(sys.n_configs, dtype=np.int64)
    if pred_id == PRED_UNIQUE_TOKEN:
        return popcount64(codes.astype(np.uint64)) == 1
    has_violation_ind = np.zeros(len(codes), dtype=bool)
    has_violation_dom = np.zeros(len(codes), dtype=bool)
    for i in range(sys.n):
        has = (codes >> i) & 1 == 1
        touches = (codes & sys.adj[i]) != 0
        has_violation_ind |= has & touches
        has_violation_dom |= ~has & ~touches
    if pred_id == PRED_TERMINAL_MIS:
        return ~has_violation_ind & ~has_violation_dom
    if pred_id == PRED_TERMINAL_ALTERNATING:
        # complement independent == every clean node has only agent neighbours
        comp_violation = np.zeros(len(codes), dtype=bool)
        full = (1 << sys.n) - 1
        comp = ~codes & full
        for i in range(sys.n):
            clean = (comp >> i) & 1 == 1
            comp_violation |= clean & ((comp & sys.adj[i]) != 0)
        return ~has_violation_ind & ~comp_violation
    raise DomainError(f"unknown predicate id {pred_id}")


def popcount64(x: np.ndarray) -> np.ndarray:
    """SWAR popcount for uint64 arrays (same bit tricks as the numba kernel)."""
    x = x.astype(np.uint64)
    x = x - ((x >> np.uint64(1)) & np.uint64(0x5555555555555555))
    x = (x & np.uint64(0x3333333333333333)) + ((x >> np.uint64(2)) & np.uint64(0x3333333333333333))
    x = (x + (x >> np.uint64(4))) & np.uint64(0x0F0F0F0F0F0F0F0F)
    return ((x * np.uint64(0x0101010101010101)) >> np.uint64(56)).astype(np.int64)
