"""Core state machine: topologies, configurations, guarded rewrite rules.

Nodes are anonymous; each carries one boolean agent slot and, when a
detector is wired in, one boolean oracle input.  An interaction is an
ordered (initiator, responder) pair; applying it rewrites only the two
endpoint slots according to the first matching rule of a table.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Callable, Iterable, Optional, Sequence

from .errors import ConfigurationError, DomainError

Pair = tuple[int, int]

AGENT = True
CLEAN = False


@dataclass(frozen=True)
class Topology:
    """Directed interaction graph over dense node ids [0, node_count)."""

    node_count: int
    interactions: tuple[Pair, ...]

    def __post_init__(self):
        if self.node_count < 2:
            raise DomainError(f"need at least 2 nodes, got {self.node_count}")
        seen = set()
        for u, v in self.interactions:
            if u == v:
                raise DomainError(f"self-interaction ({u},{v}) not allowed")
            if not (0 <= u < self.node_count and 0 <= v < self.node_count):
                raise DomainError(f"pair ({u},{v}) out of range for {self.node_count} nodes")
            seen.add(u)
            seen.add(v)
        if seen != set(range(self.node_count)):
            missing = sorted(set(range(self.node_count)) - seen)
            raise DomainError(f"isolated nodes {missing}: every node must interact")
        canonical = tuple(sorted(set(self.interactions)))
        object.__setattr__(self, "interactions", canonical)

    @cached_property
    def pair_index(self) -> dict[Pair, int]:
        return {p: i for i, p in enumerate(self.interactions)}

    @cached_property
    def neighbors(self) -> tuple[tuple[int, ...], ...]:
        """Adjacency lists of the undirected support."""
        adj: list[set[int]] = [set() for _ in range(self.node_count)]
        for u, v in self.interactions:
            adj[u].add(v)
            adj[v].add(u)
        return tuple(tuple(sorted(s)) for s in adj)

    @cached_property
    def undirected_edges(self) -> tuple[Pair, ...]:
        return tuple(sorted({(min(u, v), max(u, v)) for u, v in self.interactions}))

    def partners(self, node: int) -> tuple[int, ...]:
        """Nodes sharing an interaction with `node`, in either role."""
        return self.neighbors[node]

    def has_pair(self, pair: Pair) -> bool:
        return pair in self.pair_index

    def to_json(self) -> dict:
        return {"nodes": self.node_count, "interactions": [list(p) for p in self.interactions]}

    @classmethod
    def from_json(cls, obj: dict) -> "Topology":
        pairs = [(int(u), int(v)) for u, v in obj["interactions"]]
        if obj.get("undirected", False):
            pairs = pairs + [(v, u) for u, v in pairs]
        return cls(int(obj["nodes"]), tuple(pairs))

    @classmethod
    def from_undirected_edges(cls, n: int, edges: Iterable[Pair]) -> "Topology":
        pairs = []
        for u, v in edges:
            pairs.append((u, v))
            pairs.append((v, u))
        return cls(n, tuple(pairs))


@dataclass(frozen=True)
class NodeState:
    """Agent slot plus the current detector input, if any."""

    has_agent: bool
    oracle_input: Optional[bool] = None


@dataclass(frozen=True)
class Configuration:
    """Per-node states at one instant.

    `inputs` is None when the protocol runs without an oracle; otherwise it
    holds one boolean per node.
    """

    agents: tuple[bool, ...]
    inputs: Optional[tuple[bool, ...]] = None

    def __post_init__(self):
        if self.inputs is not None and len(self.inputs) != len(self.agents):
            raise DomainError("inputs length must match agents length")

    @property
    def node_count(self) -> int:
        return len(self.agents)

    @property
    def agent_count(self) -> int:
        return sum(self.agents)

    def state(self, node: int) -> NodeState:
        inp = None if self.inputs is None else self.inputs[node]
        return NodeState(self.agents[node], inp)

    def with_agent(self, node: int, value: bool) -> "Configuration":
        agents = list(self.agents)
        agents[node] = value
        return Configuration(tuple(agents), self.inputs)

    def with_inputs(self, inputs: Optional[Sequence[bool]]) -> "Configuration":
        return Configuration(self.agents, None if inputs is None else tuple(inputs))

    def agent_nodes(self) -> tuple[int, ...]:
        return tuple(i for i, a in enumerate(self.agents) if a)

    @classmethod
    def clean(cls, n: int) -> "Configuration":
        return cls((False,) * n)

    @classmethod
    def from_agent_nodes(cls, n: int, nodes: Iterable[int]) -> "Configuration":
        agents = [False] * n
        for i in nodes:
            agents[i] = True
        return cls(tuple(agents))


@dataclass(frozen=True)
class Outcome:
    """One weighted result of a rule: new agent bits for both endpoints."""

    prob: Fraction
    init_agent: bool
    resp_agent: bool


@dataclass(frozen=True)
class Rule:
    """Guarded rewrite over an (initiator, responder) pair.

    Guard components are True, False or None (wildcard).  Oracle inputs are
    read-only: outcomes only ever write the agent slots.
    """

    init_agent: Optional[bool]
    init_oracle: Optional[bool]
    resp_agent: Optional[bool]
    resp_oracle: Optional[bool]
    outcomes: tuple[Outcome, ...]

    def __post_init__(self):
        if not self.outcomes:
            raise DomainError("rule must have at least one outcome")
        total = Fraction(0)
        for o in self.outcomes:
            if not (0 < o.prob <= 1):
                raise DomainError(f"outcome probability {o.prob} outside (0, 1]")
            total += o.prob
        if total != 1:
            raise DomainError(f"outcome probabilities sum to {total}, expected 1")

    @property
    def deterministic(self) -> bool:
        return len(self.outcomes) == 1

    def mentions_oracle(self) -> bool:
        return self.init_oracle is not None or self.resp_oracle is not None

    def matches(self, init: NodeState, resp: NodeState) -> bool:
        for pattern, state in ((self.init_oracle, init), (self.resp_oracle, resp)):
            if pattern is not None and state.oracle_input is None:
                raise ConfigurationError("guard reads an oracle input but the state has none")
        if self.init_agent is not None and self.init_agent != init.has_agent:
            return False
        if self.resp_agent is not None and self.resp_agent != resp.has_agent:
            return False
        if self.init_oracle is not None and self.init_oracle != init.oracle_input:
            return False
        if self.resp_oracle is not None and self.resp_oracle != resp.oracle_input:
            return False
        return True


@dataclass(frozen=True)
class RuleTable:
    """Ordered rules with first-match dispatch."""

    rules: tuple[Rule, ...]

    def __len__(self) -> int:
        return len(self.rules)

    def __iter__(self):
        return iter(self.rules)

    def __getitem__(self, i: int) -> Rule:
        return self.rules[i]

    def mentions_oracle(self) -> bool:
        return any(r.mentions_oracle() for r in self.rules)


OutcomeSelector = Callable[[Rule], int]


def select_first(rule: Rule) -> int:
    """Selector for deterministic replay of single-outcome rules."""
    if not rule.deterministic:
        raise ConfigurationError("probabilistic rule needs an explicit outcome selector")
    return 0


def select_index(index: int) -> OutcomeSelector:
    """Selector forcing a fixed branch (used by tests and the step API)."""

    def pick(rule: Rule) -> int:
        if not (0 <= index < len(rule.outcomes)):
            raise DomainError(f"outcome index {index} out of range")
        return index

    return pick


def random_selector(rng) -> OutcomeSelector:
    """Selector drawing a branch from the rule's distribution.

    Draws from `rng` only for rules with more than one outcome, which keeps
    the stream aligned with the batch kernels.
    """

    def pick(rule: Rule) -> int:
        if rule.deterministic:
            return 0
        u = rng.u01()
        acc = 0.0
        for i, o in enumerate(rule.outcomes):
            acc += float(o.prob)
            if u < acc:
                return i
        return len(rule.outcomes) - 1

    return pick


def match_rule(table: RuleTable, init_state: NodeState, resp_state: NodeState):
    """First rule whose guard matches, as (index, rule); None if no rule fires."""
    for i, rule in enumerate(table):
        if rule.matches(init_state, resp_state):
            return i, rule
    return None


def fire_interaction(
    c: Configuration,
    pair: Pair,
    table: RuleTable,
    selector: OutcomeSelector = select_first,
    topology: Optional[Topology] = None,
):
    """Apply one interaction; returns (new configuration, fired (rule, outcome) or None)."""
    u, v = pair
    if topology is not None and not topology.has_pair(pair):
        raise DomainError(f"pair {pair} is not an interaction of the topology")
    if not (0 <= u < c.node_count and 0 <= v < c.node_count) or u == v:
        raise DomainError(f"bad pair {pair}")
    hit = match_rule(table, c.state(u), c.state(v))
    if hit is None:
        return c, None
    rule_idx, rule = hit
    out_idx = selector(rule)
    out = rule.outcomes[out_idx]
    agents = list(c.agents)
    agents[u] = out.init_agent
    agents[v] = out.resp_agent
    return Configuration(tuple(agents), c.inputs), (rule_idx, out_idx)


def apply_interaction(
    c: Configuration,
    pair: Pair,
    table: RuleTable,
    selector: OutcomeSelector = select_first,
    topology: Optional[Topology] = None,
) -> Configuration:
    """Like fire_interaction but returns only the configuration."""
    new_c, _ = fire_interaction(c, pair, table, selector, topology)
    return new_c


def validate_matching(pairs: Sequence[Pair], topology: Topology) -> None:
    """Check an interaction set: pairs from the topology, node-disjoint, non-empty."""
    if not pairs:
        raise DomainError("interaction set must be non-empty")
    used: set[int] = set()
    for p in pairs:
        if not topology.has_pair(p):
            raise DomainError(f"pair {p} is not an interaction of the topology")
        u, v = p
        if u in used or v in used:
            raise DomainError(f"pair {p} overlaps another scheduled pair")
        used.add(u)
        used.add(v)


def apply_global(
    c: Configuration,
    pairs: Sequence[Pair],
    table: RuleTable,
    topology: Topology,
    selector: OutcomeSelector = select_first,
) -> Configuration:
    """Apply a node-disjoint set of interactions; order-independent by disjointness."""
    validate_matching(pairs, topology)
    for p in pairs:
        c = apply_interaction(c, p, table, selector)
    return c


def enumerate_successors(
    c: Configuration,
    table: RuleTable,
    topology: Topology,
    oracle_kind=None,
) -> list[tuple[Pair, int, int, Configuration]]:
    """All single-pair successors, probabilistic branches expanded as nondeterminism.

    Oracle inputs are set to ground truth for `oracle_kind` before matching,
    and refreshed on each successor.  Pairs whose matched rule cannot change
    either endpoint are excluded; for enabled pairs every branch yields a
    successor, so a probabilistic stay branch shows up as a self-loop.
    Returns (pair, rule index, outcome index, configuration) tuples in
    canonical pair order.
    """
    from .oracles import ground_truth_inputs

    def refreshed(conf: Configuration) -> Configuration:
        if oracle_kind is None:
            return conf.with_inputs(None) if conf.inputs is not None else conf
        return conf.with_inputs(ground_truth_inputs(oracle_kind, conf, topology))

    base = refreshed(c)
    successors = []
    for pair in topology.interactions:
        u, v = pair
        hit = match_rule(table, base.state(u), base.state(v))
        if hit is None:
            continue
        rule_idx, rule = hit
        if all(o.init_agent == base.agents[u] and o.resp_agent == base.agents[v] for o in rule.outcomes):
            continue
        for out_idx, out in enumerate(rule.outcomes):
            agents = list(base.agents)
            agents[u] = out.init_agent
            agents[v] = out.resp_agent
            successors.append((pair, rule_idx, out_idx, refreshed(Configuration(tuple(agents)))))
    return successors
