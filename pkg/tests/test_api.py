from __future__ import annotations

import json

import pytest
from fastapi.testclient import TestClient

from tipsim.api import create_app
from tipsim.model import Configuration, fire_interaction, select_index
from tipsim.protocols import builtin


@pytest.fixture
def client():
    return TestClient(create_app())


def make_session(client, agents=(0, 0, 0, 1), protocol="chain-token", seed=5):
    body = {
        "topology": "chain:4",
        "protocol": protocol,
        "oracle": {"kind": "global"},
        "initial": list(agents),
        "seed": seed,
        "max_steps": 1000,
    }
    r = client.post("/sessions", json=body)
    assert r.status_code == 201, r.text
    return r.json()


class TestSessionLifecycle:
    def test_create_returns_state_and_enabled_pairs(self, client):
        state = make_session(client)
        assert state["v"] == 1
        assert state["agents"] == [0, 0, 0, 1]
        assert state["inputs"] == [1, 1, 1, 1]
        assert state["enabled"] == [[2, 3]]
        assert state["legitimacy"]["unique-token"] is True

    def test_get_unknown_session_is_404(self, client):
        r = client.get("/sessions/deadbeef")
        assert r.status_code == 404
        assert r.json()["code"] == "UNKNOWN_SESSION"

    def test_malformed_body_is_400(self, client):
        state = make_session(client)
        r = client.post(f"/sessions/{state['id']}/step", json={"nope": 1})
        assert r.status_code == 400
        assert r.json()["code"] == "BAD_REQUEST"

    def test_delete_then_404(self, client):
        state = make_session(client)
        assert client.delete(f"/sessions/{state['id']}").status_code == 204
        assert client.get(f"/sessions/{state['id']}").status_code == 404

    def test_non_interactive_scheduler_rejected(self, client):
        r = client.post("/sessions", json={
            "topology": "chain:2", "protocol": "two-node-token",
            "initial": [0, 0], "scheduler": {"kind": "uniform-random"}})
        assert r.status_code == 400


class TestStepping:
    def test_step_advances_and_moves_the_agent(self, client):
        state = make_session(client)
        r = client.post(f"/sessions/{state['id']}/step", json={"pair": [2, 3]})
        assert r.status_code == 200
        body = r.json()
        assert body["agents"] == [0, 0, 1, 0]
        assert body["step_index"] == 1

    def test_disabled_pair_is_409_with_code(self, client):
        state = make_session(client)
        r = client.post(f"/sessions/{state['id']}/step", json={"pair": [0, 1]})
        assert r.status_code == 409
        assert r.json()["code"] == "PAIR_NOT_ENABLED"

    def test_outcome_choice_selects_the_branch(self, client):
        state = make_session(client, agents=(1, 0, 0, 0), protocol="prob-token")
        sid = state["id"]
        r = client.post(f"/sessions/{sid}/step", json={"pair": [0, 1], "outcome_choice": 1})
        assert r.json()["agents"] == [1, 0, 0, 0]  # stay branch
        r = client.post(f"/sessions/{sid}/step", json={"pair": [0, 1], "outcome_choice": 0})
        assert r.json()["agents"] == [0, 1, 0, 0]  # move branch

    def test_keeping_two_agents_apart_preserves_the_count(self, client):
        state = make_session(client, agents=(0, 1, 0, 1))
        sid = state["id"]
        for pair in ([0, 1], [1, 0], [0, 1]):
            r = client.post(f"/sessions/{sid}/step", json={"pair": pair})
            assert r.status_code == 200
            assert r.json()["agent_count"] == 2


class TestFaultAndOverride:
    def test_fault_deleting_the_agent_flips_legitimacy(self, client):
        state = make_session(client)
        sid = state["id"]
        r = client.post(f"/sessions/{sid}/fault", json={"node": 3, "has_agent": False})
        assert r.status_code == 200
        body = r.json()
        assert body["agents"] == [0, 0, 0, 0]
        assert body["legitimacy"]["unique-token"] is False
        # inputs stay stale until the next refresh
        assert body["inputs"] == [1, 1, 1, 1]

    def test_override_forces_inputs_without_touching_agents(self, client):
        state = make_session(client)
        sid = state["id"]
        r = client.post(f"/sessions/{sid}/oracle-override", json={"node": 0, "value": False})
        body = r.json()
        assert body["inputs"][0] == 0
        assert body["agents"] == [0, 0, 0, 1]
        # node 0 now believes there is no agent: creation becomes enabled
        assert [0, 1] in body["enabled"]
        r = client.post(f"/sessions/{sid}/oracle-override", json={"clear": True})
        assert r.json()["inputs"] == [1, 1, 1, 1]


class TestTraceEndpoint:
    def test_history_replays_through_the_model(self, client):
        state = make_session(client)
        sid = state["id"]
        client.post(f"/sessions/{sid}/step", json={"pair": [2, 3]})
        client.post(f"/sessions/{sid}/step", json={"pair": [1, 2]})
        client.post(f"/sessions/{sid}/fault", json={"node": 0, "has_agent": True})
        final = client.get(f"/sessions/{sid}").json()

        lines = [json.loads(l) for l in client.get(f"/sessions/{sid}/trace").text.splitlines()]
        assert lines[0]["kind"] == "header"
        table = builtin("chain-token").table
        c = Configuration(tuple(bool(a) for a in lines[0]["initial_agents"]))
        for entry in lines[1:]:
            if entry["kind"] == "step":
                pair = tuple(entry["scheduled"][0])
                out_idx = entry["fired"][0][1]
                c = c.with_inputs(tuple(bool(b) for b in entry["inputs"]))
                c, _ = fire_interaction(c, pair, table, select_index(out_idx))
                assert [int(a) for a in c.agents] == entry["agents"]
            elif entry["kind"] == "fault":
                c = c.with_agent(entry["node"], entry["has_agent"])
                assert [int(a) for a in c.agents] == entry["agents"]
        assert [int(a) for a in c.agents] == final["agents"]


class TestGc:
    def test_fresh_session_not_reaped(self, client):
        state = make_session(client)
        r = client.post("/gc")
        assert r.json()["reaped"] == 0
        assert client.get(f"/sessions/{state['id']}").status_code == 200

    def test_idle_sessions_reaped_and_counted(self, client):
        a = make_session(client)
        b = make_session(client)
        r = client.post("/gc", params={"ttl": 0})
        assert r.json()["reaped"] == 2
        assert client.get(f"/sessions/{a['id']}").status_code == 404
        assert client.get(f"/sessions/{b['id']}").status_code == 404
