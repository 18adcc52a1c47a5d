"""Legitimacy predicates over configurations.

- unique-token: exactly one node holds an agent.
- terminal-mis: the agent set is independent and dominating on the
  undirected support (a maximal independent set).
- terminal-alternating: the agent set and its complement are both
  independent (a proper 2-colouring by agent presence).
"""
from __future__ import annotations

from .errors import DomainError
from .model import Configuration, Topology


def _independent(nodes: set[int], topology: Topology) -> bool:
    return all(nb not in nodes for u in nodes for nb in topology.neighbors[u])


def is_legitimate(pred: str, c: Configuration, topology: Topology) -> bool:
    if pred == "unique-token":
        return c.agent_count == 1
    agents = set(c.agent_nodes())
    if pred == "terminal-mis":
        if not _independent(agents, topology):
            return False
        return all(
            u in agents or any(nb in agents for nb in topology.neighbors[u])
            for u in range(topology.node_count)
        )
    if pred == "terminal-alternating":
        clean = set(range(topology.node_count)) - agents
        return _independent(agents, topology) and _independent(clean, topology)
    raise DomainError(f"unknown legitimacy predicate {pred!r}")
