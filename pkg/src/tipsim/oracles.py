"""Agent detectors: ground truth and eventually-accurate input refresh.

Two detector geometries exist: the global detector answers "is any agent
present in the network" identically for every node; the k-distance
detector answers per node, looking at hop distance <= k on the undirected
support (the node itself included).  Eventual accuracy is modelled as a
finite suspicion window of `delay` steps during which a prefix policy
fabricates the inputs; from step `delay` on, inputs equal ground truth.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Union

from .errors import DomainError
from .model import Configuration, Topology
from .rng import hash_bit

PrefixPolicy = Union[str, Callable[[int, int], bool]]  # "random" | "true" | "false" | f(step, node)


@dataclass(frozen=True)
class OracleKind:
    """Detector geometry: kind is "global" or "k" (with radius k >= 1)."""

    kind: str
    k: int = 0

    def __post_init__(self):
        if self.kind not in ("global", "k"):
            raise DomainError(f"unknown oracle kind {self.kind!r}")
        if self.kind == "k" and self.k < 1:
            raise DomainError("k-distance oracle needs k >= 1")


GLOBAL = OracleKind("global")


def k_distance(k: int) -> OracleKind:
    return OracleKind("k", k)


@dataclass(frozen=True)
class OracleSpec:
    """Detector plus its accuracy model; delay 0 means a perfect detector."""

    kind: OracleKind
    delay: int = 0
    prefix: PrefixPolicy = "false"
    seed: int = 0

    def __post_init__(self):
        if self.delay < 0:
            raise DomainError("delay must be >= 0")
        if isinstance(self.prefix, str) and self.prefix not in ("random", "true", "false"):
            raise DomainError(f"unknown prefix policy {self.prefix!r}")

    @property
    def perfect(self) -> bool:
        return self.delay == 0

    def to_json(self) -> dict:
        if callable(self.prefix):
            raise DomainError("callable prefix policies are not serializable")
        obj = {"kind": self.kind.kind, "delay": self.delay, "prefix": self.prefix, "seed": self.seed}
        if self.kind.kind == "k":
            obj["k"] = self.kind.k
        return obj

    @classmethod
    def from_json(cls, obj: dict) -> "OracleSpec":
        kind = OracleKind(obj["kind"], int(obj.get("k", 0)))
        return cls(kind, int(obj.get("delay", 0)), obj.get("prefix", "false"), int(obj.get("seed", 0)))


@lru_cache(maxsize=None)
def reach_sets(topology: Topology, k: int) -> tuple[frozenset[int], ...]:
    """Per node: the set of nodes within undirected hop distance <= k (self included)."""
    out = []
    for start in range(topology.node_count):
        seen = {start}
        frontier = deque([(start, 0)])
        while frontier:
            node, d = frontier.popleft()
            if d == k:
                continue
            for nb in topology.neighbors[node]:
                if nb not in seen:
                    seen.add(nb)
                    frontier.append((nb, d + 1))
        out.append(frozenset(seen))
    return tuple(out)


def ground_truth(kind: OracleKind, c: Configuration, topology: Topology, node: int) -> bool:
    """Exact detector value at `node` for configuration `c`."""
    if not (0 <= node < topology.node_count):
        raise DomainError(f"node {node} out of range")
    if kind.kind == "global":
        return c.agent_count >= 1
    reach = reach_sets(topology, kind.k)[node]
    return any(c.agents[i] for i in reach)


def ground_truth_inputs(kind: OracleKind, c: Configuration, topology: Topology) -> tuple[bool, ...]:
    if kind.kind == "global":
        present = c.agent_count >= 1
        return (present,) * topology.node_count
    masks = reach_sets(topology, kind.k)
    return tuple(any(c.agents[i] for i in masks[u]) for u in range(topology.node_count))


def refresh_inputs(
    spec: OracleSpec, c: Configuration, topology: Topology, step_index: int
) -> Configuration:
    """Set every oracle input for the given step.

    At or after `delay`, inputs are ground truth.  Before that, the prefix
    policy decides per node, so different nodes may receive different lies.
    """
    if step_index >= spec.delay:
        return c.with_inputs(ground_truth_inputs(spec.kind, c, topology))
    if callable(spec.prefix):
        inputs = tuple(bool(spec.prefix(step_index, u)) for u in range(topology.node_count))
    elif spec.prefix == "true":
        inputs = (True,) * topology.node_count
    elif spec.prefix == "false":
        inputs = (False,) * topology.node_count
    else:
        inputs = tuple(hash_bit(spec.seed, step_index, u) for u in range(topology.node_count))
    return c.with_inputs(inputs)
