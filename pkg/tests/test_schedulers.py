from __future__ import annotations

from types import SimpleNamespace

import pytest

from tipsim import builtin
from tipsim.engine import RunConfig, run
from tipsim.errors import DomainError, ScheduleInfeasibleError
from tipsim.model import Configuration
from tipsim.oracles import GLOBAL, OracleSpec
from tipsim.rng import SplitMix64
from tipsim.schedulers import (
    Lasso,
    LassoStep,
    SchedulerSpec,
    check_global_fairness_lasso,
    check_k_bounded,
    check_weak_fairness,
    lasso_is_weakly_fair,
    make_scheduler,
    validate_lasso,
)
from tipsim.topologies import chain

SWAP_DSL = """
(A,*),(-,*) -> 1: (-,A)
(-,*),(A,*) -> 1: (A,-)
"""


def fake_trace(scheduled_sequence):
    steps = [SimpleNamespace(scheduled=(pair,)) for pair in scheduled_sequence]
    return SimpleNamespace(steps=steps)


class TestNext:
    def test_weakly_fair_picks_the_oldest_age(self):
        topo = chain(3)
        sched = make_scheduler(SchedulerSpec("weakly-fair"), topo, SplitMix64(0))
        p_young, p_old = (0, 1), (1, 2)
        j_young, j_old = topo.pair_index[p_young], topo.pair_index[p_old]
        sched.ledger.ages[j_old] = 5
        sched.ledger.ages[j_young] = 2
        c = Configuration((False,) * 3)
        assert sched.next(c, (p_young, p_old)) == (p_old,)

    def test_weakly_fair_breaks_ties_by_lowest_pair_id(self):
        topo = chain(3)
        sched = make_scheduler(SchedulerSpec("weakly-fair"), topo, SplitMix64(0))
        c = Configuration((False,) * 3)
        assert sched.next(c, tuple(topo.interactions)) == (topo.interactions[0],)

    def test_scripted_returns_the_scripted_pair(self):
        topo = chain(2)
        sched = make_scheduler(SchedulerSpec("scripted", script=((0, 1),)), topo, SplitMix64(0))
        c = Configuration((False, False))
        assert sched.next(c, ((0, 1), (1, 0))) == ((0, 1),)

    def test_scripted_infeasible_pair_raises_with_step(self):
        topo = chain(2)
        sched = make_scheduler(SchedulerSpec("scripted", script=((1, 0),)), topo, SplitMix64(0))
        c = Configuration((False, False))
        with pytest.raises(ScheduleInfeasibleError) as err:
            sched.next(c, ((0, 1),))
        assert err.value.step == 0 and err.value.pair == (1, 0)

    def test_k_bound_forces_the_starved_pair(self):
        # two pairs; the other one activated k=2 times in a row, so the
        # third step must activate the waiting pair
        topo = chain(2)
        sched = make_scheduler(SchedulerSpec("k-bounded", k=2, seed=9), topo, SplitMix64(0))
        both = ((0, 1), (1, 0))
        q = topo.pair_index[(0, 1)]
        sched.ledger.record({0, 1}, [q])
        sched.ledger.record({0, 1}, [q])
        c = Configuration((False, False))
        assert sched.next(c, both) == ((1, 0),)
        assert sched.bound_fallbacks == 0

    def test_next_only_returns_enabled_pairs(self):
        topo = chain(4)
        sched = make_scheduler(SchedulerSpec("uniform-random"), topo, SplitMix64(3))
        c = Configuration((False,) * 4)
        enabled = ((0, 1), (2, 3))
        for _ in range(20):
            for p in sched.next(c, enabled):
                assert p in enabled

    def test_empty_enabled_set_rejected(self):
        topo = chain(2)
        sched = make_scheduler(SchedulerSpec("uniform-random"), topo, SplitMix64(0))
        with pytest.raises(DomainError):
            sched.next(Configuration((False, False)), ())

    def test_matching_mode_returns_node_disjoint_pairs(self):
        from tipsim.protocols import load_dsl, enabled_pairs

        spec = load_dsl(SWAP_DSL, name="swap")
        topo = chain(6)
        c = Configuration((True, False, True, False, True, False))
        enabled = enabled_pairs(spec, c, topo)
        sched = make_scheduler(
            SchedulerSpec("uniform-random", matching="maximal-random-matching"), topo, SplitMix64(5)
        )
        pairs = sched.next(c, enabled)
        assert len(pairs) > 1
        nodes = [n for p in pairs for n in p]
        assert len(nodes) == len(set(nodes))


class TestWeakFairnessCheck:
    def test_weakly_fair_scheduler_passes_at_pair_count_threshold(self):
        topo = chain(4)
        cfg = RunConfig(
            topology=topo,
            protocol=builtin("chain-token"),
            scheduler=SchedulerSpec("weakly-fair"),
            oracle=OracleSpec(GLOBAL),
            initial=Configuration((False,) * 4),
            max_steps=300,
            stop="never",
            seed=11,
        )
        trace = run(cfg)
        report = check_weak_fairness(trace, threshold=len(topo.interactions))
        assert report.ok, report.violations

    def test_starving_script_is_flagged_with_the_starved_pair(self):
        # keep one agent bouncing between nodes 0 and 1 while the agent at
        # node 3 keeps (2,3) continuously enabled and never activated
        topo = chain(4)
        script = ((0, 1), (1, 0)) * 35
        cfg = RunConfig(
            topology=topo,
            protocol=builtin("chain-token"),
            scheduler=SchedulerSpec("scripted", script=script),
            oracle=OracleSpec(GLOBAL),
            initial=Configuration.from_agent_nodes(4, [1, 3]),
            max_steps=70,
            stop="never",
            seed=0,
        )
        trace = run(cfg)
        report = check_weak_fairness(trace)  # default threshold 10 * 6
        assert not report.ok
        assert any(v.pair == (2, 3) for v in report.violations)

    def test_never_enabled_pair_is_never_flagged(self):
        topo = chain(4)
        cfg = RunConfig(
            topology=topo,
            protocol=builtin("chain-token"),
            scheduler=SchedulerSpec("scripted", script=((0, 1), (1, 0)) * 10),
            oracle=OracleSpec(GLOBAL),
            initial=Configuration.from_agent_nodes(4, [1]),
            max_steps=20,
            stop="never",
            seed=0,
        )
        trace = run(cfg)
        # pairs beyond node 1 are never (continuously) enabled with one shuttling agent
        assert check_weak_fairness(trace, threshold=5).ok


class TestKBoundedCheck:
    def test_alternating_two_pairs_is_one_bounded(self):
        trace = fake_trace([(0, 1), (1, 2), (0, 1), (1, 2), (0, 1)])
        assert check_k_bounded(trace, 1).ok

    def test_three_between_is_flagged_at_two(self):
        trace = fake_trace([(0, 1), (1, 2), (1, 2), (1, 2), (0, 1)])
        report = check_k_bounded(trace, 2)
        assert not report.ok
        assert report.violations[0].pair == (1, 2)

    def test_bounded_scheduler_traces_pass_their_own_bound(self):
        topo = chain(4)
        cfg = RunConfig(
            topology=topo,
            protocol=builtin("chain-token"),
            scheduler=SchedulerSpec("k-bounded", k=3, seed=21),
            oracle=OracleSpec(GLOBAL),
            initial=Configuration((False,) * 4),
            max_steps=400,
            stop="never",
            seed=4,
        )
        trace = run(cfg)
        assert check_k_bounded(trace, 3).ok


class TestGlobalFairnessLasso:
    def test_two_step_shuttle_is_globally_fair(self):
        spec = builtin("chain-token")
        topo = chain(2)
        lasso = Lasso(
            stem=(),
            cycle=(
                LassoStep(Configuration((True, False)), (1, 0), 0),
                LassoStep(Configuration((False, True)), (0, 1), 0),
            ),
        )
        assert check_global_fairness_lasso(lasso, topo, spec) is True

    def test_cycle_omitting_an_enabled_instance_is_unfair(self):
        # a 4-step shuttle on a 3-chain that never schedules (2,1)
        spec = builtin("chain-token")
        topo = chain(3)
        lasso = Lasso(
            stem=(),
            cycle=(
                LassoStep(Configuration((False, True, False)), (0, 1), 0),
                LassoStep(Configuration((True, False, False)), (1, 0), 0),
            ),
        )
        assert check_global_fairness_lasso(lasso, topo, spec) is False

    def test_unclosed_cycle_rejected(self):
        spec = builtin("chain-token")
        topo = chain(2)
        lasso = Lasso(stem=(), cycle=(LassoStep(Configuration((True, False)), (1, 0), 0),))
        with pytest.raises(DomainError):
            check_global_fairness_lasso(lasso, topo, spec)

    def test_validate_lasso_checks_stem_contiguity(self):
        spec = builtin("chain-token")
        topo = chain(2)
        good = Lasso(
            stem=(LassoStep(Configuration((True, True)), (0, 1), 0),),
            cycle=(
                LassoStep(Configuration((True, False)), (1, 0), 0),
                LassoStep(Configuration((False, True)), (0, 1), 0),
            ),
        )
        validate_lasso(good, topo, spec)
        bad = Lasso(
            stem=(LassoStep(Configuration((True, True)), (0, 1), 0),),
            cycle=(
                LassoStep(Configuration((False, True)), (0, 1), 0),
                LassoStep(Configuration((True, False)), (1, 0), 0),
            ),
        )
        with pytest.raises(DomainError):
            validate_lasso(bad, topo, spec)

    def test_weak_lasso_check_sees_continuous_enablement(self):
        spec = builtin("chain-token")
        topo = chain(2)
        lasso = Lasso(
            stem=(),
            cycle=(
                LassoStep(Configuration((True, False)), (1, 0), 0),
                LassoStep(Configuration((False, True)), (0, 1), 0),
            ),
        )
        assert lasso_is_weakly_fair(lasso, topo, spec) is True


def test_lasso_round_trips_through_json():
    lasso = Lasso(
        stem=(LassoStep(Configuration((True, True)), (0, 1), 0),),
        cycle=(
            LassoStep(Configuration((True, False)), (1, 0), 0),
            LassoStep(Configuration((False, True)), (0, 1), 0),
        ),
    )
    assert Lasso.from_json(lasso.to_json()) == lasso
