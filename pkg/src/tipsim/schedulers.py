"""Interaction selection strategies and fairness checking.

Online schedulers pick from the enabled set: uniform-random, age-based
weakly fair, k-bounded (conservative online enforcement of the bound),
scripted, and a placeholder for the interactive session service.  Offline
checks validate finished traces (weak fairness, k-boundedness) and lassos
(the exact global-fairness condition for an infinite cyclic unrolling).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .errors import ConfigurationError, DomainError, ScheduleInfeasibleError
from .model import (
    Configuration,
    Pair,
    Topology,
    enumerate_successors,
    fire_interaction,
    select_index,
)
from .protocols import ProtocolSpec, enabled_pairs
from .rng import SplitMix64

SCHEDULER_KINDS = ("uniform-random", "weakly-fair", "k-bounded", "scripted", "interactive")
MATCHING_MODES = ("single-pair", "maximal-random-matching")


@dataclass(frozen=True)
class SchedulerSpec:
    kind: str = "uniform-random"
    seed: Optional[int] = None  # None: share the run's stream
    k: int = 1
    script: tuple[Pair, ...] = ()
    matching: str = "single-pair"

    def __post_init__(self):
        if self.kind not in SCHEDULER_KINDS:
            raise DomainError(f"unknown scheduler kind {self.kind!r}")
        if self.matching not in MATCHING_MODES:
            raise DomainError(f"unknown matching mode {self.matching!r}")
        if self.kind == "k-bounded" and self.k < 1:
            raise DomainError("k-bounded scheduler needs k >= 1")

    def to_json(self) -> dict:
        obj = {"kind": self.kind, "matching": self.matching}
        if self.seed is not None:
            obj["seed"] = self.seed
        if self.kind == "k-bounded":
            obj["k"] = self.k
        if self.kind == "scripted":
            obj["script"] = [list(p) for p in self.script]
        return obj

    @classmethod
    def from_json(cls, obj: dict) -> "SchedulerSpec":
        return cls(
            kind=obj.get("kind", "uniform-random"),
            seed=obj.get("seed"),
            k=int(obj.get("k", 1)),
            script=tuple((int(u), int(v)) for u, v in obj.get("script", [])),
            matching=obj.get("matching", "single-pair"),
        )


class FairnessLedger:
    """Per-pair bookkeeping: continuously-enabled ages, activation counts,
    and (for k-bounded enforcement) activations of q since p's last activation."""

    def __init__(self, topology: Topology, track_bound: bool = False):
        m = len(topology.interactions)
        self.pair_index = topology.pair_index
        self.ages = [0] * m
        self.activations = [0] * m
        self.since = [[0] * m for _ in range(m)] if track_bound else None

    def age_of(self, pair: Pair) -> int:
        return self.ages[self.pair_index[pair]]

    def record(self, enabled: set[int], activated: list[int]) -> None:
        """Advance one step: `enabled` and `activated` are pair indices."""
        for j in range(len(self.ages)):
            if j in activated:
                self.ages[j] = 0
            elif j in enabled:
                self.ages[j] += 1
            else:
                self.ages[j] = 0
        for j in activated:
            self.activations[j] += 1
            if self.since is not None:
                row = self.since[j]
                for p in range(len(row)):
                    row[p] += 1
                for q in range(len(self.ages)):
                    self.since[q][j] = 0


class Scheduler:
    """Stateful selection strategy bound to one execution session."""

    def __init__(self, spec: SchedulerSpec, topology: Topology, rng: SplitMix64):
        self.spec = spec
        self.topology = topology
        self.rng = rng
        self.ledger = FairnessLedger(topology, track_bound=spec.kind == "k-bounded")
        self._script_pos = 0
        self._step = 0
        self.bound_fallbacks = 0

    def next(self, c: Configuration, enabled: tuple[Pair, ...]) -> tuple[Pair, ...]:
        """Pick the interaction set for this step and update the ledger."""
        if not enabled:
            raise DomainError("next() called with empty enabled set (terminal)")
        idx = self.topology.pair_index
        enabled_idx = [idx[p] for p in enabled]
        chosen = self._pick(enabled, enabled_idx)
        if self.spec.matching == "maximal-random-matching" and self.spec.kind != "scripted":
            chosen = self._extend_matching(chosen, enabled, enabled_idx)
        self.ledger.record(set(enabled_idx), [idx[p] for p in chosen])
        self._step += 1
        return chosen

    def _pick(self, enabled: tuple[Pair, ...], enabled_idx: list[int]) -> tuple[Pair, ...]:
        kind = self.spec.kind
        if kind == "uniform-random":
            return (enabled[self.rng.below(len(enabled))],)
        if kind == "weakly-fair":
            best = max(enabled_idx, key=lambda j: (self.ledger.ages[j], -j))
            return (self.topology.interactions[best],)
        if kind == "k-bounded":
            allowed = [j for j in enabled_idx if self._bound_ok(j)]
            if not allowed:
                # every enabled pair is capped against some pair that is not
                # schedulable right now; pick the longest-waiting one
                self.bound_fallbacks += 1
                allowed = [max(enabled_idx, key=lambda j: (self.ledger.ages[j], -j))]
            return (self.topology.interactions[allowed[self.rng.below(len(allowed))]],)
        if kind == "scripted":
            if self._script_pos >= len(self.spec.script):
                raise ScheduleInfeasibleError(self._step, None)
            pair = self.spec.script[self._script_pos]
            if pair not in enabled:
                raise ScheduleInfeasibleError(self._step, pair)
            self._script_pos += 1
            return (pair,)
        raise ConfigurationError("interactive scheduler is driven through the session service")

    def _bound_ok(self, j: int) -> bool:
        row = self.ledger.since[j]
        return all(p == j or row[p] < self.spec.k for p in range(len(row)))

    def _extend_matching(
        self, chosen: tuple[Pair, ...], enabled: tuple[Pair, ...], enabled_idx: list[int]
    ) -> tuple[Pair, ...]:
        used = {n for p in chosen for n in p}
        order = list(enabled_idx)
        if self.spec.kind == "weakly-fair":
            order.sort(key=lambda j: (-self.ledger.ages[j], j))
        else:
            for i in range(len(order) - 1, 0, -1):
                j = self.rng.below(i + 1)
                order[i], order[j] = order[j], order[i]
        out = list(chosen)
        for j in order:
            pair = self.topology.interactions[j]
            if pair in out:
                continue
            if pair[0] in used or pair[1] in used:
                continue
            if self.spec.kind == "k-bounded" and not self._bound_ok(j):
                continue
            out.append(pair)
            used.update(pair)
        return tuple(out)


def make_scheduler(spec: SchedulerSpec, topology: Topology, shared_rng: SplitMix64) -> Scheduler:
    rng = SplitMix64(spec.seed) if spec.seed is not None else shared_rng
    return Scheduler(spec, topology, rng)


@dataclass(frozen=True)
class FairnessViolation:
    pair: Pair
    start: int
    end: int
    detail: str = ""


@dataclass(frozen=True)
class FairnessReport:
    ok: bool
    violations: tuple[FairnessViolation, ...] = ()


def _trace_enabled_sets(trace) -> list[set[Pair]]:
    """Recompute the enabled set before each recorded step."""
    sets = []
    agents = trace.initial.agents
    for step in trace.steps:
        c = Configuration(agents, step.inputs)
        sets.append(set(enabled_pairs(trace.protocol, c, trace.topology)))
        agents = step.agents_after
    return sets


def check_weak_fairness(trace, threshold: Optional[int] = None) -> FairnessReport:
    """Finite-trace weak fairness: no pair stays continuously enabled for
    `threshold` steps (default 10 * number of pairs) without being activated."""
    if not trace.steps:
        return FairnessReport(True)
    topo = trace.topology
    if threshold is None:
        threshold = 10 * len(topo.interactions)
    enabled_sets = _trace_enabled_sets(trace)
    violations = []
    for pair in topo.interactions:
        run_start = None
        for t, enabled in enumerate(enabled_sets):
            scheduled = pair in trace.steps[t].scheduled
            if pair in enabled and not scheduled:
                if run_start is None:
                    run_start = t
                if t - run_start + 1 >= threshold:
                    violations.append(FairnessViolation(pair, run_start, t, "continuously enabled, never activated"))
                    break
            else:
                run_start = None
    return FairnessReport(not violations, tuple(violations))


def check_k_bounded(trace, k: int) -> FairnessReport:
    """Exact bound check on closed activation intervals.

    For every two consecutive activations of a pair p, every other pair may
    be activated at most k times strictly in between (activations sharing
    p's step are concurrent, not in between).
    """
    activations: dict[Pair, list[int]] = {}
    for t, step in enumerate(trace.steps):
        for pair in step.scheduled:
            activations.setdefault(pair, []).append(t)
    for p, times in activations.items():
        for t1, t2 in zip(times, times[1:]):
            for q, q_times in activations.items():
                if q == p:
                    continue
                count = sum(1 for t in q_times if t1 < t < t2)
                if count > k:
                    return FairnessReport(
                        False,
                        (FairnessViolation(q, t1, t2, f"activated {count} > {k} times between activations of {p}"),),
                    )
    return FairnessReport(True)


@dataclass(frozen=True)
class LassoStep:
    """One scheduled interaction: the configuration it fires from (agents
    only; oracle inputs are recomputed), the pair, and the outcome branch."""

    config: Configuration
    pair: Pair
    outcome: int


@dataclass(frozen=True)
class Lasso:
    stem: tuple[LassoStep, ...]
    cycle: tuple[LassoStep, ...]

    def to_json(self) -> dict:
        def enc(steps):
            return [
                {"agents": [int(a) for a in s.config.agents], "pair": list(s.pair), "outcome": s.outcome}
                for s in steps
            ]

        return {"stem": enc(self.stem), "cycle": enc(self.cycle)}

    @classmethod
    def from_json(cls, obj: dict) -> "Lasso":
        def dec(steps):
            return tuple(
                LassoStep(Configuration(tuple(bool(a) for a in s["agents"])), tuple(s["pair"]), int(s["outcome"]))
                for s in steps
            )

        return cls(dec(obj["stem"]), dec(obj["cycle"]))


def _refresh(c: Configuration, topology: Topology, spec: ProtocolSpec) -> Configuration:
    from .oracles import ground_truth_inputs

    if spec.oracle_requirement is None:
        return c.with_inputs(None)
    return c.with_inputs(ground_truth_inputs(spec.oracle_requirement, c, topology))


def _apply_step(step: LassoStep, topology: Topology, spec: ProtocolSpec) -> Configuration:
    c = _refresh(step.config, topology, spec)
    if not topology.has_pair(step.pair):
        raise DomainError(f"pair {step.pair} not in topology")
    new_c, _ = fire_interaction(c, step.pair, spec.table, select_index(step.outcome))
    return new_c


def check_global_fairness_lasso(lasso: Lasso, topology: Topology, spec: ProtocolSpec) -> bool:
    """Exact global fairness of the cycle's infinite unrolling.

    Every (pair, endpoint-transition) instance enabled at any configuration
    on the cycle must be scheduled by some cycle step from a configuration
    where that instance applies.  An instance is the concrete local rewrite
    (agent bits before and after on both endpoints); distinct rules or
    branches producing the same rewrite count as the same instance, and
    identity rewrites carry no obligation.
    """
    cycle = lasso.cycle
    if not cycle:
        raise DomainError("cycle must be non-empty")
    length = len(cycle)
    for i, step in enumerate(cycle):
        nxt = _apply_step(step, topology, spec)
        expected = cycle[(i + 1) % length].config
        if nxt.agents != expected.agents:
            raise DomainError(f"cycle not closed at step {i}: {nxt.agents} != {expected.agents}")

    obligations: set[tuple[Pair, tuple[bool, bool, bool, bool]]] = set()
    for step in cycle:
        c = _refresh(step.config, topology, spec)
        for pair, _rule, _out, succ in enumerate_successors(c, spec.table, topology, spec.oracle_requirement):
            if succ.agents == c.agents:
                continue
            u, v = pair
            obligations.add((pair, (c.agents[u], c.agents[v], succ.agents[u], succ.agents[v])))

    realized: set[tuple[Pair, tuple[bool, bool, bool, bool]]] = set()
    for step in cycle:
        nxt = _apply_step(step, topology, spec)
        u, v = step.pair
        before = (step.config.agents[u], step.config.agents[v])
        after = (nxt.agents[u], nxt.agents[v])
        if before != after:
            realized.add((step.pair, (*before, *after)))
    return obligations <= realized


def lasso_is_weakly_fair(lasso: Lasso, topology: Topology, spec: ProtocolSpec) -> bool:
    """Weak fairness of the cycle: any pair enabled at every cycle
    configuration must be scheduled somewhere on the cycle."""
    cycle = lasso.cycle
    if not cycle:
        raise DomainError("cycle must be non-empty")
    continuously = None
    for step in cycle:
        c = _refresh(step.config, topology, spec)
        here = set(enabled_pairs(spec, c, topology))
        continuously = here if continuously is None else (continuously & here)
    scheduled = {s.pair for s in cycle}
    return continuously <= scheduled


def validate_lasso(lasso: Lasso, topology: Topology, spec: ProtocolSpec) -> None:
    """Check that stem and cycle chain correctly (stem ends at cycle start)."""
    if not lasso.cycle:
        raise DomainError("cycle must be non-empty")
    seq = list(lasso.stem) + list(lasso.cycle)
    for i in range(len(lasso.stem)):
        nxt = _apply_step(seq[i], topology, spec)
        if nxt.agents != seq[i + 1].config.agents:
            raise DomainError(f"stem not contiguous at step {i}")
    last = lasso.cycle[-1]
    if _apply_step(last, topology, spec).agents != lasso.cycle[0].config.agents:
        raise DomainError("cycle not closed")
