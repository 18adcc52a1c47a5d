from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tipsim import builtin
from tipsim.errors import ConfigurationError, DomainError
from tipsim.model import (
    Configuration,
    NodeState,
    Outcome,
    Rule,
    RuleTable,
    Topology,
    apply_global,
    apply_interaction,
    enumerate_successors,
    fire_interaction,
    match_rule,
    select_first,
    select_index,
)
from tipsim.topologies import chain

from conftest import all_configurations, with_ground_truth


class TestTopology:
    def test_rejects_self_pairs(self):
        with pytest.raises(DomainError):
            Topology(2, ((0, 0), (0, 1), (1, 0)))

    def test_rejects_isolated_nodes(self):
        with pytest.raises(DomainError):
            Topology(3, ((0, 1), (1, 0)))

    def test_rejects_out_of_range_ids(self):
        with pytest.raises(DomainError):
            Topology(2, ((0, 1), (1, 2)))

    def test_undirected_json_expands_both_orientations(self):
        t = Topology.from_json({"nodes": 3, "interactions": [[0, 1], [1, 2]], "undirected": True})
        assert t.interactions == ((0, 1), (1, 0), (1, 2), (2, 1))

    def test_directed_json_kept_as_listed(self):
        t = Topology.from_json({"nodes": 4, "interactions": [[1, 0], [1, 2], [2, 3]]})
        assert t.interactions == ((1, 0), (1, 2), (2, 3))

    def test_partners_cover_both_roles(self):
        t = Topology(4, ((1, 0), (1, 2), (2, 3)))
        assert t.partners(1) == (0, 2)
        assert t.partners(3) == (2,)


class TestMatchRule:
    def test_chain_token_both_holders_hits_first_rule(self, chain_token):
        hit = match_rule(chain_token.table, NodeState(True, True), NodeState(True, True))
        assert hit is not None and hit[0] == 0

    def test_chain_token_clean_true_inputs_matches_nothing(self, chain_token):
        assert match_rule(chain_token.table, NodeState(False, True), NodeState(False, True)) is None

    def test_local_leader_k1_create_rule(self):
        spec = builtin("local-leader-k1")
        hit = match_rule(spec.table, NodeState(False, False), NodeState(False, True))
        assert hit is not None and hit[0] == 1

    def test_oracle_guard_without_input_is_configuration_error(self, chain_token):
        with pytest.raises(ConfigurationError):
            match_rule(chain_token.table, NodeState(False, None), NodeState(False, None))


class TestRuleValidation:
    def test_outcome_probabilities_must_sum_to_one(self):
        with pytest.raises(DomainError):
            Rule(None, None, None, None, (Outcome(Fraction(1, 2), True, False),))

    def test_zero_probability_rejected(self):
        with pytest.raises(DomainError):
            Rule(None, None, None, None, (Outcome(Fraction(0), True, False), Outcome(Fraction(1), False, True)))

    def test_builtin_tables_are_normalized(self):
        for name in ("chain-token", "prob-token", "local-leader-k1", "local-leader-ring", "two-node-token"):
            for rule in builtin(name).table:
                assert sum(o.prob for o in rule.outcomes) == 1


class TestApplyInteraction:
    def test_merge_cleans_the_responder(self, chain_token):
        c = Configuration((True, True), (True, True))
        out = apply_interaction(c, (0, 1), chain_token.table)
        assert out.agents == (True, False)

    def test_no_matching_guard_is_a_noop(self, chain_token):
        c = Configuration((False, False, False, False), (True,) * 4)
        assert apply_interaction(c, (0, 1), chain_token.table) is c

    def test_prob_move_branch_relocates_the_agent(self, prob_token):
        c = Configuration((True, False), (True, True))
        out = apply_interaction(c, (0, 1), prob_token.table, select_index(0))
        assert out.agents == (False, True)

    def test_prob_stay_branch_keeps_the_agent(self, prob_token):
        c = Configuration((True, False), (True, True))
        out = apply_interaction(c, (0, 1), prob_token.table, select_index(1))
        assert out.agents == (True, False)

    def test_pair_outside_topology_rejected(self, chain_token, chain4):
        c = Configuration((False,) * 4, (False,) * 4)
        with pytest.raises(DomainError):
            apply_interaction(c, (0, 2), chain_token.table, select_first, chain4)

    def test_selector_required_for_probabilistic_rules(self, prob_token):
        c = Configuration((True, False), (True, True))
        with pytest.raises(ConfigurationError):
            apply_interaction(c, (0, 1), prob_token.table)

    def test_only_the_scheduled_nodes_change(self):
        """Exhaustive locality check: n <= 5 chains, all builtin tables."""
        for name in ("chain-token", "prob-token", "local-leader-k1", "local-leader-ring", "two-node-token"):
            spec = builtin(name)
            for n in (2, 3, 4, 5):
                topo = chain(n)
                for c in all_configurations(n):
                    cc = with_ground_truth(c, topo, spec.oracle_requirement)
                    for pair in topo.interactions:
                        for out_idx in range(2):
                            try:
                                after = apply_interaction(cc, pair, spec.table, select_index(out_idx))
                            except DomainError:
                                continue  # branch index out of range for this rule
                            for node in range(n):
                                if node not in pair:
                                    assert after.agents[node] == cc.agents[node]


class TestApplyGlobal:
    def test_two_disjoint_creations_on_clean_chain(self, chain_token, chain4):
        c = Configuration((False,) * 4, (False,) * 4)
        out = apply_global(c, [(0, 1), (2, 3)], chain_token.table, chain4)
        assert out.agents == (True, False, True, False)

    def test_noop_pair_alongside_firing_pair(self, chain_token, chain4):
        c = Configuration((False, False, False, True), (True,) * 4)
        out = apply_global(c, [(0, 1), (2, 3)], chain_token.table, chain4)
        assert out.agents == (False, False, True, False)  # only the pull fires

    def test_overlapping_pairs_rejected(self, chain_token, chain4):
        c = Configuration((False,) * 4, (False,) * 4)
        with pytest.raises(DomainError):
            apply_global(c, [(0, 1), (1, 2)], chain_token.table, chain4)

    def test_empty_set_rejected(self, chain_token, chain4):
        with pytest.raises(DomainError):
            apply_global(Configuration((False,) * 4), [], chain_token.table, chain4)

    @settings(max_examples=30, deadline=None)
    @given(st.permutations([0, 1]))
    def test_order_invariance_over_matchings(self, order):
        spec = builtin("chain-token")
        topo = chain(4)
        pairs = [(0, 1), (2, 3)]
        for c in all_configurations(4):
            cc = with_ground_truth(c, topo, spec.oracle_requirement)
            base = apply_global(cc, pairs, spec.table, topo)
            permuted = apply_global(cc, [pairs[i] for i in order], spec.table, topo)
            assert base.agents == permuted.agents


class TestEnumerateSuccessors:
    def test_two_holders_on_two_nodes_mirror(self, chain_token):
        topo = chain(2)
        c = Configuration((True, True))
        succs = enumerate_successors(c, chain_token.table, topo, chain_token.oracle_requirement)
        got = {(pair, s.agents) for pair, _, _, s in succs}
        assert got == {((0, 1), (True, False)), ((1, 0), (False, True))}

    def test_terminal_configuration_has_no_successors(self):
        spec = builtin("local-leader-ring")
        topo = chain(2)
        c = Configuration((True, False))
        assert enumerate_successors(c, spec.table, topo) == []

    def test_prob_pair_yields_move_and_stay(self, prob_token):
        topo = chain(2)
        c = Configuration((True, False))
        succs = enumerate_successors(c, prob_token.table, topo, prob_token.oracle_requirement)
        by_pair = [(pair, out, s.agents) for pair, _, out, s in succs if pair == (0, 1)]
        assert ((0, 1), 0, (False, True)) in by_pair  # move
        assert ((0, 1), 1, (True, False)) in by_pair  # stay

    def test_agent_count_direction_per_rule(self):
        """Guard analysis, exhaustive: merges and pulls never increase the
        agent count, creation is the only increasing rule."""
        spec = builtin("chain-token")
        for n in (2, 3, 4, 5):
            topo = chain(n)
            for c in all_configurations(n):
                cc = with_ground_truth(c, topo, spec.oracle_requirement)
                for pair, rule_idx, _, succ in enumerate_successors(cc, spec.table, topo, spec.oracle_requirement):
                    delta = succ.agent_count - cc.agent_count
                    if rule_idx == 1:
                        assert delta == 1
                    else:
                        assert delta <= 0


def test_fire_interaction_reports_rule_and_outcome(prob_token):
    c = Configuration((True, False), (True, True))
    _, fired = fire_interaction(c, (0, 1), prob_token.table, select_index(1))
    assert fired == (2, 1)
