"""Execution driver: runs, traces, replay, fault injection, batch statistics.

A run alternates oracle refresh -> enabled pairs -> scheduler -> global
application, recording everything needed for bit-exact replay.  Identical
run configurations (seed included) produce byte-identical JSONL traces.
"""
from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field, replace
from typing import Optional, Union

import numpy as np

from . import kernels
from .errors import ConfigurationError, DomainError, ReplayDivergenceError
from .model import Configuration, Pair, Topology, fire_interaction, random_selector, select_index
from .oracles import OracleSpec, refresh_inputs
from .predicates import is_legitimate
from .protocols import ProtocolSpec, builtin, enabled_pairs
from .rng import SplitMix64, substream
from .schedulers import SchedulerSpec, make_scheduler
from .topologies import generate as generate_topology

log = logging.getLogger(__name__)

STOP_MODES = ("on-legitimate", "on-terminal", "never")


@dataclass(frozen=True)
class RunConfig:
    topology: Topology
    protocol: ProtocolSpec
    scheduler: SchedulerSpec = SchedulerSpec()
    oracle: Optional[OracleSpec] = None
    initial: Union[Configuration, str] = "random"
    max_steps: int = 1000
    stop: str = "on-terminal"
    seed: int = 0

    def __post_init__(self):
        if self.max_steps < 1:
            raise DomainError("max_steps must be >= 1")
        if self.stop not in STOP_MODES:
            raise DomainError(f"unknown stop mode {self.stop!r}")
        if isinstance(self.initial, str) and self.initial != "random":
            raise DomainError(f"initial must be a Configuration or 'random', got {self.initial!r}")
        req = self.protocol.oracle_requirement
        if req is not None:
            if self.oracle is None:
                raise ConfigurationError(f"protocol {self.protocol.name} needs a {req.kind} oracle")
            got = self.oracle.kind
            if got.kind != req.kind or (req.kind == "k" and got.k < req.k):
                raise ConfigurationError(
                    f"oracle {got} does not satisfy the {req} requirement of {self.protocol.name}"
                )

    def to_json(self) -> dict:
        initial = self.initial if isinstance(self.initial, str) else [int(a) for a in self.initial.agents]
        return {
            "v": 1,
            "topology": self.topology.to_json(),
            "protocol": self.protocol.to_json(),
            "scheduler": self.scheduler.to_json(),
            "oracle": None if self.oracle is None else self.oracle.to_json(),
            "initial": initial,
            "max_steps": self.max_steps,
            "stop": self.stop,
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "RunConfig":
        topo_obj = obj["topology"]
        topology = generate_topology(topo_obj) if isinstance(topo_obj, str) else Topology.from_json(topo_obj)
        proto_obj = obj["protocol"]
        if isinstance(proto_obj, str):
            protocol = builtin(proto_obj, strict_listing=bool(obj.get("strict_listing", False)))
        else:
            protocol = ProtocolSpec.from_json(proto_obj)
        initial = obj.get("initial", "random")
        if not isinstance(initial, str):
            initial = Configuration(tuple(bool(a) for a in initial))
        oracle = obj.get("oracle")
        return cls(
            topology=topology,
            protocol=protocol,
            scheduler=SchedulerSpec.from_json(obj.get("scheduler", {})),
            oracle=None if oracle is None else OracleSpec.from_json(oracle),
            initial=initial,
            max_steps=int(obj.get("max_steps", 1000)),
            stop=obj.get("stop", "on-terminal"),
            seed=int(obj.get("seed", 0)),
        )

    def hash(self) -> str:
        canon = json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class TraceStep:
    index: int
    inputs: Optional[tuple[bool, ...]]  # after refresh, read by this step's guards
    scheduled: tuple[Pair, ...]
    fired: tuple[Optional[tuple[int, int]], ...]  # (rule, outcome) per scheduled pair
    agents_after: tuple[bool, ...]


@dataclass
class Trace:
    config: RunConfig
    initial: Configuration
    steps: list[TraceStep] = field(default_factory=list)
    terminal: bool = False
    legitimate_step: Optional[int] = None  # first step index with a legitimate configuration

    @property
    def topology(self) -> Topology:
        return self.config.topology

    @property
    def protocol(self) -> ProtocolSpec:
        return self.config.protocol

    @property
    def final(self) -> Configuration:
        agents = self.steps[-1].agents_after if self.steps else self.initial.agents
        return Configuration(agents)

    def to_jsonl(self) -> str:
        def dump(obj):
            return json.dumps(obj, sort_keys=True, separators=(",", ":"))

        lines = [
            dump(
                {
                    "v": 1,
                    "kind": "header",
                    "run": self.config.to_json(),
                    "hash": self.config.hash(),
                    "initial_agents": [int(a) for a in self.initial.agents],
                }
            )
        ]
        for s in self.steps:
            lines.append(
                dump(
                    {
                        "v": 1,
                        "kind": "step",
                        "i": s.index,
                        "inputs": None if s.inputs is None else [int(b) for b in s.inputs],
                        "scheduled": [list(p) for p in s.scheduled],
                        "fired": [list(f) if f is not None else None for f in s.fired],
                        "agents": [int(a) for a in s.agents_after],
                    }
                )
            )
        lines.append(
            dump(
                {
                    "v": 1,
                    "kind": "end",
                    "steps": len(self.steps),
                    "terminal": self.terminal,
                    "legitimate_step": self.legitimate_step,
                }
            )
        )
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text: str) -> "Trace":
        lines = [json.loads(line) for line in text.splitlines() if line.strip()]
        if not lines or lines[0].get("kind") != "header":
            raise DomainError("trace must start with a header line")
        header = lines[0]
        cfg = RunConfig.from_json(header["run"])
        trace = cls(cfg, Configuration(tuple(bool(a) for a in header["initial_agents"])))
        for obj in lines[1:]:
            if obj.get("kind") == "step":
                trace.steps.append(
                    TraceStep(
                        index=int(obj["i"]),
                        inputs=None if obj["inputs"] is None else tuple(bool(b) for b in obj["inputs"]),
                        scheduled=tuple((int(u), int(v)) for u, v in obj["scheduled"]),
                        fired=tuple(None if f is None else (int(f[0]), int(f[1])) for f in obj["fired"]),
                        agents_after=tuple(bool(a) for a in obj["agents"]),
                    )
                )
            elif obj.get("kind") == "end":
                trace.terminal = bool(obj["terminal"])
                ls = obj.get("legitimate_step")
                trace.legitimate_step = None if ls is None else int(ls)
        return trace


def _initial_configuration(cfg: RunConfig, rng: SplitMix64) -> Configuration:
    if isinstance(cfg.initial, Configuration):
        if cfg.initial.node_count != cfg.topology.node_count:
            raise DomainError("initial configuration size does not match topology")
        return Configuration(cfg.initial.agents)
    return Configuration(tuple(rng.bit() for _ in range(cfg.topology.node_count)))


def run(cfg: RunConfig) -> Trace:
    """Execute one session; deterministic given the seed."""
    rng = SplitMix64(cfg.seed)
    initial = _initial_configuration(cfg, rng)
    scheduler = make_scheduler(cfg.scheduler, cfg.topology, rng)
    selector = random_selector(rng)
    trace = Trace(cfg, initial)
    c = initial
    while True:
        i = len(trace.steps)
        if is_legitimate(cfg.protocol.legitimacy, c, cfg.topology):
            if trace.legitimate_step is None:
                trace.legitimate_step = i
            if cfg.stop == "on-legitimate":
                break
        if i >= cfg.max_steps:
            break
        if cfg.oracle is not None:
            c = refresh_inputs(cfg.oracle, c, cfg.topology, i)
        else:
            c = c.with_inputs(None)
        enabled = enabled_pairs(cfg.protocol, c, cfg.topology)
        if not enabled:
            trace.terminal = True
            break
        scheduled = scheduler.next(c, enabled)
        fired = []
        for pair in scheduled:
            c, f = fire_interaction(c, pair, cfg.protocol.table, selector, cfg.topology)
            fired.append(f)
        trace.steps.append(TraceStep(i, c.inputs, scheduled, tuple(fired), c.agents))
    return trace


@dataclass(frozen=True)
class SetAgent:
    node: int
    has_agent: bool


@dataclass(frozen=True)
class Randomize:
    seed: int
    count: int


def inject_fault(c: Configuration, fault: Union[SetAgent, Randomize]) -> Configuration:
    """Corrupt agent slots; oracle inputs are left stale until the next refresh."""
    if isinstance(fault, SetAgent):
        if not (0 <= fault.node < c.node_count):
            raise DomainError(f"node {fault.node} out of range")
        return Configuration(
            tuple(fault.has_agent if i == fault.node else a for i, a in enumerate(c.agents)),
            c.inputs,
        )
    if fault.count > c.node_count:
        raise DomainError("cannot flip more slots than nodes")
    rng = SplitMix64(fault.seed)
    nodes = list(range(c.node_count))
    for i in range(len(nodes) - 1, 0, -1):  # Fisher-Yates, take the first `count`
        j = rng.below(i + 1)
        nodes[i], nodes[j] = nodes[j], nodes[i]
    flip = set(nodes[: fault.count])
    return Configuration(
        tuple((not a) if i in flip else a for i, a in enumerate(c.agents)),
        c.inputs,
    )


def replay(trace: Trace) -> Trace:
    """Recompute every step from the recorded choices and verify it.

    The recorded scheduled pairs and outcome branches are replayed as-is
    (the seed is not re-drawn); any mismatch in refreshed inputs or
    resulting agent vectors raises ReplayDivergenceError.
    """
    cfg = trace.config
    c = trace.initial
    for step in trace.steps:
        i = step.index
        if cfg.oracle is not None:
            c = refresh_inputs(cfg.oracle, c, cfg.topology, i)
            if step.inputs is None or tuple(step.inputs) != c.inputs:
                raise ReplayDivergenceError(i, "inputs", c.inputs, step.inputs)
        else:
            c = c.with_inputs(None)
        for pair, recorded in zip(step.scheduled, step.fired):
            if recorded is None:
                c, fired = fire_interaction(c, pair, cfg.protocol.table, select_index(0), cfg.topology)
                if fired is not None:
                    raise ReplayDivergenceError(i, "fired", None, fired)
            else:
                rule_idx, out_idx = recorded
                c, fired = fire_interaction(c, pair, cfg.protocol.table, select_index(out_idx), cfg.topology)
                if fired is None or fired[0] != rule_idx:
                    raise ReplayDivergenceError(i, "rule", rule_idx, fired)
        if c.agents != step.agents_after:
            raise ReplayDivergenceError(i, "agents", step.agents_after, c.agents)
    return trace


@dataclass
class BatchStats:
    trials: int
    steps: np.ndarray
    converged: np.ndarray
    master_seed: int

    @property
    def convergence_rate(self) -> float:
        return float(self.converged.mean()) if self.trials else 0.0

    def _converged_steps(self) -> np.ndarray:
        return self.steps[self.converged]

    def summary(self) -> dict:
        done = self._converged_steps()
        if len(done) == 0:
            dist = {"min": None, "median": None, "mean": None, "max": None}
        else:
            dist = {
                "min": int(done.min()),
                "median": float(np.median(done)),
                "mean": float(done.mean()),
                "max": int(done.max()),
            }
        return {
            "v": 1,
            "trials": self.trials,
            "seed": self.master_seed,
            "convergence_rate": self.convergence_rate,
            "steps_to_legitimacy": dist,
            "histogram": self.histogram(),
        }

    def histogram(self, buckets: int = 20) -> list[list[int]]:
        """[bucket_start, count] rows over converged trials, fixed width."""
        done = self._converged_steps()
        if len(done) == 0:
            return []
        lo, hi = int(done.min()), int(done.max())
        width = max(1, -(-(hi - lo + 1) // buckets))
        counts: dict[int, int] = {}
        for s in done:
            start = lo + ((int(s) - lo) // width) * width
            counts[start] = counts.get(start, 0) + 1
        return [[start, counts[start]] for start in sorted(counts)]

    def to_csv(self) -> str:
        lines = ["trial,steps,converged"]
        for t in range(self.trials):
            lines.append(f"{t},{int(self.steps[t])},{int(self.converged[t])}")
        return "\n".join(lines) + "\n"


def _kernel_fast_path(cfg: RunConfig) -> bool:
    return (
        cfg.scheduler.kind == "uniform-random"
        and cfg.scheduler.seed is None
        and cfg.scheduler.matching == "single-pair"
        and (cfg.oracle is None or cfg.oracle.perfect)
        and isinstance(cfg.initial, Configuration)
    )


def batch_stats(cfg: RunConfig, trials: int) -> BatchStats:
    """Run independent trials and collect steps-to-legitimacy statistics.

    Trial i uses the seed substream(cfg.seed, i), so results are
    reproducible and identical between the kernel fast path and plain
    engine runs.
    """
    if trials < 1:
        raise DomainError("trials must be >= 1")
    if _kernel_fast_path(cfg):
        oracle_kind = None if cfg.oracle is None else cfg.oracle.kind
        sys_ = kernels.encode_system(cfg.protocol.table, cfg.topology, oracle_kind)
        pred_id = kernels.PRED_IDS[cfg.protocol.legitimacy]
        code = kernels.config_to_code(cfg.initial)
        steps, conv = kernels.simulate_batch(sys_, pred_id, code, cfg.seed, trials, cfg.max_steps)
        return BatchStats(trials, steps, conv, cfg.seed)
    log.info("batch_stats: falling back to per-trial engine runs")
    steps = np.zeros(trials, dtype=np.int64)
    conv = np.zeros(trials, dtype=bool)
    for t in range(trials):
        trial_cfg = replace(cfg, seed=substream(cfg.seed, t), stop="on-legitimate")
        trace = run(trial_cfg)
        steps[t] = len(trace.steps)
        conv[t] = trace.legitimate_step is not None and trace.legitimate_step == len(trace.steps)
    return BatchStats(trials, steps, conv, cfg.seed)
