from __future__ import annotations

import itertools

import pytest

from tipsim import builtin
from tipsim.model import Configuration
from tipsim.oracles import ground_truth_inputs
from tipsim.topologies import chain, complete, ring, traffic_light


@pytest.fixture
def chain4():
    return chain(4)


@pytest.fixture
def chain_token():
    return builtin("chain-token")


@pytest.fixture
def prob_token():
    return builtin("prob-token")


def all_configurations(n: int):
    for bits in itertools.product([False, True], repeat=n):
        yield Configuration(bits)


def with_ground_truth(c: Configuration, topology, kind):
    """Configuration with perfect oracle inputs for `kind` (None passes through)."""
    if kind is None:
        return c
    return c.with_inputs(ground_truth_inputs(kind, c, topology))


def small_topologies():
    return [
        ("chain2", chain(2)),
        ("chain3", chain(3)),
        ("chain4", chain(4)),
        ("ring3", ring(3)),
        ("ring4", ring(4)),
        ("complete4", complete(4)),
        ("traffic-light", traffic_light()),
    ]
