from __future__ import annotations

from dataclasses import replace

import numpy as np
import pytest

from tipsim import builtin
from tipsim.engine import (
    BatchStats,
    Randomize,
    RunConfig,
    SetAgent,
    Trace,
    batch_stats,
    inject_fault,
    replay,
    run,
)
from tipsim.errors import ConfigurationError, DomainError, ReplayDivergenceError
from tipsim.model import Configuration
from tipsim.oracles import GLOBAL, OracleSpec, k_distance
from tipsim.rng import substream
from tipsim.schedulers import SchedulerSpec
from tipsim.topologies import chain, complete


def engine_roundtrip(trace: Trace) -> Trace:
    return Trace.from_jsonl(trace.to_jsonl())


def chain_token_cfg(n=4, **kw):
    defaults = dict(
        topology=chain(n),
        protocol=builtin("chain-token"),
        scheduler=SchedulerSpec("weakly-fair"),
        oracle=OracleSpec(GLOBAL),
        initial=Configuration((False,) * n),
        max_steps=200,
        stop="never",
        seed=1,
    )
    defaults.update(kw)
    return RunConfig(**defaults)


class TestRun:
    def test_reaches_and_keeps_a_unique_agent(self):
        trace = run(chain_token_cfg())
        counts = [sum(s.agents_after) for s in trace.steps]
        assert 1 in counts
        first = counts.index(1)
        assert all(c == 1 for c in counts[first:])

    def test_legitimate_start_stays_legitimate(self):
        cfg = chain_token_cfg(initial=Configuration.from_agent_nodes(4, [2]), max_steps=100)
        trace = run(cfg)
        assert trace.legitimate_step == 0
        assert all(sum(s.agents_after) == 1 for s in trace.steps)

    def test_max_steps_zero_rejected(self):
        with pytest.raises(DomainError):
            chain_token_cfg(max_steps=0)

    def test_oracle_requirement_enforced(self):
        with pytest.raises(ConfigurationError):
            chain_token_cfg(oracle=None)

    def test_k_oracle_satisfies_larger_radius(self):
        cfg = RunConfig(
            topology=chain(3),
            protocol=builtin("local-leader-k1"),
            oracle=OracleSpec(k_distance(2)),
            initial=Configuration((False,) * 3),
            max_steps=50,
            seed=0,
        )
        trace = run(cfg)
        assert trace.terminal

    def test_stop_on_legitimate_halts_at_first_hit(self):
        cfg = chain_token_cfg(stop="on-legitimate", seed=5)
        trace = run(cfg)
        assert trace.legitimate_step == len(trace.steps)

    def test_terminal_flag_set_when_nothing_is_enabled(self):
        cfg = RunConfig(
            topology=chain(2),
            protocol=builtin("two-node-token"),
            initial=Configuration((False, False)),
            max_steps=50,
            stop="never",
            seed=2,
        )
        trace = run(cfg)
        assert trace.terminal
        assert trace.final.agent_count == 1

    def test_unscheduled_nodes_never_change(self):
        for seed in range(5):
            trace = run(chain_token_cfg(seed=seed, scheduler=SchedulerSpec("uniform-random")))
            agents = trace.initial.agents
            for step in trace.steps:
                touched = {n for p in step.scheduled for n in p}
                for node in range(4):
                    if node not in touched:
                        assert step.agents_after[node] == agents[node]
                agents = step.agents_after


class TestDeterminism:
    def test_same_seed_gives_byte_identical_traces(self):
        a = run(chain_token_cfg(scheduler=SchedulerSpec("uniform-random"), seed=42))
        b = run(chain_token_cfg(scheduler=SchedulerSpec("uniform-random"), seed=42))
        assert a.to_jsonl() == b.to_jsonl()

    def test_different_seed_differs(self):
        a = run(chain_token_cfg(scheduler=SchedulerSpec("uniform-random"), seed=42, initial="random"))
        b = run(chain_token_cfg(scheduler=SchedulerSpec("uniform-random"), seed=43, initial="random"))
        assert a.to_jsonl() != b.to_jsonl()

    def test_trace_round_trips_through_jsonl(self):
        trace = run(chain_token_cfg(scheduler=SchedulerSpec("uniform-random"), seed=9))
        parsed = Trace.from_jsonl(trace.to_jsonl())
        assert parsed.to_jsonl() == trace.to_jsonl()


class TestClosure:
    def test_unique_agent_preserved_by_every_step(self):
        """Exhaustive: every successor of every 1-agent configuration keeps
        exactly one agent (chains up to 8 nodes)."""
        from tipsim.model import enumerate_successors

        spec = builtin("chain-token")
        for n in range(2, 9):
            topo = chain(n)
            for holder in range(n):
                c = Configuration.from_agent_nodes(n, [holder])
                for _, _, _, succ in enumerate_successors(c, spec.table, topo, spec.oracle_requirement):
                    assert succ.agent_count == 1


class TestInjectFault:
    def test_deleting_the_unique_agent(self):
        c = Configuration.from_agent_nodes(4, [2])
        assert inject_fault(c, SetAgent(2, False)).agent_count == 0

    def test_setting_a_holder_is_idempotent(self):
        c = Configuration.from_agent_nodes(4, [2])
        assert inject_fault(c, SetAgent(2, True)) == c

    def test_randomize_flips_exactly_count_slots(self):
        c = Configuration((False,) * 8)
        out = inject_fault(c, Randomize(seed=3, count=3))
        assert sum(a != b for a, b in zip(c.agents, out.agents)) == 3

    def test_inputs_left_stale(self):
        c = Configuration((False, True), (True, True))
        out = inject_fault(c, SetAgent(1, False))
        assert out.inputs == (True, True)

    def test_bad_node_rejected(self):
        with pytest.raises(DomainError):
            inject_fault(Configuration((False,)* 2), SetAgent(5, True))


class TestReplay:
    def test_recorded_runs_replay_clean(self):
        for kw in (
            dict(scheduler=SchedulerSpec("uniform-random"), seed=3),
            dict(scheduler=SchedulerSpec("weakly-fair"), seed=4),
            dict(protocol=builtin("prob-token"), scheduler=SchedulerSpec("uniform-random"), seed=5),
            dict(oracle=OracleSpec(GLOBAL, delay=10, prefix="random", seed=6), seed=6),
        ):
            trace = run(chain_token_cfg(**kw))
            replay(trace)

    def test_tampered_step_is_reported_with_its_index(self):
        trace = run(chain_token_cfg(scheduler=SchedulerSpec("uniform-random"), seed=8, max_steps=30))
        assert len(trace.steps) > 6
        step = trace.steps[5]
        tampered = step.agents_after[:-1] + (not step.agents_after[-1],)
        trace.steps[5] = replace(step, agents_after=tampered)
        with pytest.raises(ReplayDivergenceError) as err:
            replay(trace)
        assert err.value.step == 5

    def test_replay_ignores_the_seed(self):
        trace = run(chain_token_cfg(scheduler=SchedulerSpec("uniform-random"), seed=10))
        trace.config = replace(trace.config, seed=999)
        replay(trace)

    def test_matching_mode_traces_replay(self):
        cfg = chain_token_cfg(
            n=6,
            scheduler=SchedulerSpec("uniform-random", matching="maximal-random-matching"),
            initial=Configuration((False,) * 6),
            seed=14,
            max_steps=60,
        )
        trace = run(cfg)
        assert any(len(s.scheduled) > 1 for s in trace.steps)
        parsed = engine_roundtrip(trace)
        replay(parsed)


class TestBatchStats:
    def prob_cfg(self, **kw):
        defaults = dict(
            topology=complete(4),
            protocol=builtin("prob-token"),
            scheduler=SchedulerSpec("uniform-random"),
            oracle=OracleSpec(GLOBAL),
            initial=Configuration.from_agent_nodes(4, [0, 2]),
            max_steps=100000,
            stop="on-legitimate",
            seed=77,
        )
        defaults.update(kw)
        return RunConfig(**defaults)

    def test_two_agents_on_complete_graph_always_converge(self):
        stats = batch_stats(self.prob_cfg(), 1000)
        assert stats.convergence_rate == 1.0

    def test_legitimate_start_needs_zero_steps(self):
        stats = batch_stats(self.prob_cfg(initial=Configuration.from_agent_nodes(4, [1])), 50)
        assert stats.convergence_rate == 1.0
        assert stats.steps.max() == 0

    def test_deterministic_given_master_seed(self):
        a = batch_stats(self.prob_cfg(), 200)
        b = batch_stats(self.prob_cfg(), 200)
        assert np.array_equal(a.steps, b.steps) and np.array_equal(a.converged, b.converged)

    def test_kernel_trials_match_plain_engine_runs(self):
        cfg = self.prob_cfg()
        stats = batch_stats(cfg, 10)
        for t in range(10):
            trial = replace(cfg, seed=substream(cfg.seed, t), stop="on-legitimate")
            trace = run(trial)
            assert len(trace.steps) == stats.steps[t]
            assert (trace.legitimate_step is not None) == stats.converged[t]

    def test_csv_layout(self):
        stats = batch_stats(self.prob_cfg(), 5)
        lines = stats.to_csv().strip().splitlines()
        assert lines[0] == "trial,steps,converged"
        assert len(lines) == 6

    def test_summary_fields(self):
        s = batch_stats(self.prob_cfg(), 100).summary()
        assert set(s) == {"v", "trials", "seed", "convergence_rate", "steps_to_legitimacy", "histogram"}
        assert s["steps_to_legitimacy"]["min"] >= 1
