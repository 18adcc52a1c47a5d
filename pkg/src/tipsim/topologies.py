"""Canonical topology generators and file loading."""
from __future__ import annotations

import json
import os

from .errors import DomainError
from .model import Topology


def chain(n: int) -> Topology:
    """Path on n nodes, both orientations of every edge."""
    if n < 2:
        raise DomainError("chain needs n >= 2")
    return Topology.from_undirected_edges(n, [(i, i + 1) for i in range(n - 1)])


def ring(n: int) -> Topology:
    """Cycle on n nodes, both orientations of every edge."""
    if n < 3:
        raise DomainError("ring needs n >= 3")
    return Topology.from_undirected_edges(n, [(i, (i + 1) % n) for i in range(n)])


def complete(n: int) -> Topology:
    if n < 2:
        raise DomainError("complete graph needs n >= 2")
    return Topology.from_undirected_edges(n, [(i, j) for i in range(n) for j in range(i + 1, n)])


def traffic_light() -> Topology:
    """Two 4-cycles glued at one cut vertex (node 0), 7 nodes.

    The cut vertex is the only node of degree 4; it separates the two loops,
    which is what lets a schedule keep one token in each loop forever.
    """
    edges = [(0, 1), (1, 2), (2, 3), (3, 0), (0, 4), (4, 5), (5, 6), (6, 0)]
    return Topology.from_undirected_edges(7, edges)


def load_file(path: str) -> Topology:
    with open(path, "r", encoding="utf-8") as f:
        return Topology.from_json(json.load(f))


def save_file(topology: Topology, path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(topology.to_json(), f, indent=2)
        f.write("\n")


def generate(spec: str) -> Topology:
    """Build a topology from a spec string or a JSON file path.

    Accepted forms: "chain:N", "ring:N", "complete:N", "traffic-light",
    or a path to a topology JSON file.
    """
    if spec == "traffic-light":
        return traffic_light()
    kind, sep, arg = spec.partition(":")
    if sep and kind in ("chain", "ring", "complete"):
        try:
            n = int(arg)
        except ValueError:
            raise DomainError(f"bad node count {arg!r} in topology spec {spec!r}")
        return {"chain": chain, "ring": ring, "complete": complete}[kind](n)
    if os.path.exists(spec) or spec.endswith(".json"):
        return load_file(spec)
    raise DomainError(f"unknown topology spec {spec!r}")
