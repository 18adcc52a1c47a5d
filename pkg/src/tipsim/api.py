"""HTTP session service for step-wise interactive execution.

A session holds one run whose scheduler is the human: every step names an
enabled pair (and optionally the probabilistic branch).  Faults and oracle
overrides can be injected between steps.  All payloads carry "v": 1;
errors carry machine-readable codes.
"""
from __future__ import annotations

import json
import secrets
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

from fastapi import FastAPI, Request, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, PlainTextResponse

from .engine import RunConfig, SetAgent, inject_fault
from .errors import DomainError, TipError
from .model import Configuration, fire_interaction, match_rule, random_selector, select_index
from .oracles import refresh_inputs
from .predicates import is_legitimate
from .protocols import enabled_pairs
from .rng import SplitMix64

DEFAULT_HISTORY = 10000


class ApiError(Exception):
    def __init__(self, status: int, code: str, detail: str = ""):
        super().__init__(detail or code)
        self.status = status
        self.code = code
        self.detail = detail


@dataclass
class Session:
    id: str
    config: RunConfig
    current: Configuration
    initial: Configuration
    step_index: int = 0
    overrides: dict[int, bool] = field(default_factory=dict)
    history: deque = field(default_factory=lambda: deque(maxlen=DEFAULT_HISTORY))
    lock: threading.Lock = field(default_factory=threading.Lock)
    last_touch: float = field(default_factory=time.monotonic)
    rng: SplitMix64 = field(default_factory=lambda: SplitMix64(0))

    def touch(self) -> None:
        self.last_touch = time.monotonic()

    def refresh(self) -> None:
        """Recompute oracle inputs for the current step, then apply overrides."""
        cfg = self.config
        if cfg.oracle is not None:
            self.current = refresh_inputs(cfg.oracle, self.current, cfg.topology, self.step_index)
        else:
            self.current = self.current.with_inputs(None)
        if self.overrides and self.current.inputs is not None:
            inputs = list(self.current.inputs)
            for node, value in self.overrides.items():
                inputs[node] = value
            self.current = self.current.with_inputs(tuple(inputs))

    def enabled(self) -> tuple:
        return enabled_pairs(self.config.protocol, self.current, self.config.topology)

    def state_payload(self) -> dict:
        c = self.current
        cfg = self.config
        enabled = self.enabled()
        legitimacy = {cfg.protocol.legitimacy: is_legitimate(cfg.protocol.legitimacy, c, cfg.topology)}
        if "unique-token" not in legitimacy:
            legitimacy["unique-token"] = is_legitimate("unique-token", c, cfg.topology)
        outcome_counts = []
        for u, v in enabled:
            hit = match_rule(cfg.protocol.table, c.state(u), c.state(v))
            outcome_counts.append(len(hit[1].outcomes) if hit else 1)
        return {
            "v": 1,
            "id": self.id,
            "step_index": self.step_index,
            "agents": [int(a) for a in c.agents],
            "inputs": None if c.inputs is None else [int(b) for b in c.inputs],
            "enabled": [list(p) for p in enabled],
            "enabled_outcomes": outcome_counts,
            "terminal": len(enabled) == 0,
            "agent_count": c.agent_count,
            "legitimacy": legitimacy,
            "node_count": cfg.topology.node_count,
            "interactions": [list(p) for p in cfg.topology.interactions],
            "protocol": cfg.protocol.name,
        }


class SessionStore:
    def __init__(self, ttl: float = 3600.0):
        self.ttl = ttl
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()

    def create(self, cfg: RunConfig) -> Session:
        rng = SplitMix64(cfg.seed)
        if isinstance(cfg.initial, Configuration):
            initial = Configuration(cfg.initial.agents)
        else:
            initial = Configuration(tuple(rng.bit() for _ in range(cfg.topology.node_count)))
        session = Session(
            id=secrets.token_hex(8),
            config=cfg,
            current=initial,
            initial=initial,
            rng=rng,
        )
        session.refresh()
        session.history.append(
            {"v": 1, "kind": "header", "run": cfg.to_json(), "initial_agents": [int(a) for a in initial.agents]}
        )
        with self._lock:
            self._sessions[session.id] = session
        return session

    def get(self, sid: str) -> Session:
        with self._lock:
            session = self._sessions.get(sid)
        if session is None:
            raise ApiError(404, "UNKNOWN_SESSION", f"no session {sid}")
        return session

    def delete(self, sid: str) -> None:
        with self._lock:
            if sid not in self._sessions:
                raise ApiError(404, "UNKNOWN_SESSION", f"no session {sid}")
            del self._sessions[sid]

    def gc(self, ttl: Optional[float] = None) -> int:
        """Remove sessions idle longer than ttl; returns the count reaped."""
        limit = self.ttl if ttl is None else ttl
        now = time.monotonic()
        with self._lock:
            stale = [sid for sid, s in self._sessions.items() if now - s.last_touch > limit]
            for sid in stale:
                del self._sessions[sid]
        return len(stale)


def create_app(static_dir: Optional[str] = None, session_ttl: float = 3600.0) -> FastAPI:
    app = FastAPI(title="tipsim session service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    store = SessionStore(ttl=session_ttl)
    app.state.store = store

    @app.exception_handler(ApiError)
    async def _api_error(_req: Request, exc: ApiError):
        return JSONResponse({"v": 1, "code": exc.code, "detail": exc.detail}, status_code=exc.status)

    async def _body(request: Request) -> dict:
        try:
            obj = await request.json()
        except json.JSONDecodeError:
            raise ApiError(400, "BAD_REQUEST", "body is not valid JSON")
        if not isinstance(obj, dict):
            raise ApiError(400, "BAD_REQUEST", "body must be a JSON object")
        return obj

    @app.post("/sessions")
    async def create_session(request: Request):
        store.gc()
        obj = await _body(request)
        obj.setdefault("scheduler", {})
        if isinstance(obj["scheduler"], str):
            obj["scheduler"] = {"kind": obj["scheduler"]}
        obj["scheduler"].setdefault("kind", "interactive")
        try:
            cfg = RunConfig.from_json(obj)
        except (TipError, KeyError, ValueError) as e:
            raise ApiError(400, "BAD_CONFIG", str(e))
        if cfg.scheduler.kind != "interactive":
            raise ApiError(400, "BAD_CONFIG", "session scheduler must be interactive")
        session = store.create(cfg)
        return JSONResponse(session.state_payload(), status_code=201)

    @app.get("/sessions/{sid}")
    def get_session(sid: str):
        session = store.get(sid)
        with session.lock:
            session.touch()
            return session.state_payload()

    @app.post("/sessions/{sid}/step")
    async def step_session(sid: str, request: Request):
        session = store.get(sid)
        obj = await _body(request)
        if "pair" not in obj or not isinstance(obj["pair"], list) or len(obj["pair"]) != 2:
            raise ApiError(400, "BAD_REQUEST", "body needs pair: [initiator, responder]")
        pair = (int(obj["pair"][0]), int(obj["pair"][1]))
        choice = obj.get("outcome_choice")
        with session.lock:
            session.touch()
            enabled = session.enabled()
            if pair not in enabled:
                raise ApiError(409, "PAIR_NOT_ENABLED", f"pair {list(pair)} is not enabled")
            cfg = session.config
            if choice is None:
                selector = random_selector(session.rng)
            else:
                selector = select_index(int(choice))
            inputs_used = session.current.inputs
            try:
                new_c, fired = fire_interaction(session.current, pair, cfg.protocol.table, selector, cfg.topology)
            except DomainError as e:
                raise ApiError(400, "BAD_REQUEST", str(e))
            session.history.append(
                {
                    "v": 1,
                    "kind": "step",
                    "i": session.step_index,
                    "inputs": None if inputs_used is None else [int(b) for b in inputs_used],
                    "scheduled": [list(pair)],
                    "fired": [list(fired) if fired else None],
                    "agents": [int(a) for a in new_c.agents],
                }
            )
            session.current = new_c
            session.step_index += 1
            session.refresh()
            return session.state_payload()

    @app.post("/sessions/{sid}/fault")
    async def fault_session(sid: str, request: Request):
        session = store.get(sid)
        obj = await _body(request)
        if "node" not in obj or "has_agent" not in obj:
            raise ApiError(400, "BAD_REQUEST", "body needs node and has_agent")
        with session.lock:
            session.touch()
            try:
                session.current = inject_fault(session.current, SetAgent(int(obj["node"]), bool(obj["has_agent"])))
            except DomainError as e:
                raise ApiError(400, "BAD_REQUEST", str(e))
            session.history.append(
                {"v": 1, "kind": "fault", "i": session.step_index,
                 "node": int(obj["node"]), "has_agent": bool(obj["has_agent"]),
                 "agents": [int(a) for a in session.current.agents]}
            )
            # inputs stay stale until the next refresh, which happens on the next step
            return session.state_payload()

    @app.post("/sessions/{sid}/oracle-override")
    async def override_session(sid: str, request: Request):
        session = store.get(sid)
        obj = await _body(request)
        with session.lock:
            session.touch()
            if obj.get("clear"):
                session.overrides.clear()
            elif "node" in obj and "value" in obj:
                session.overrides[int(obj["node"])] = bool(obj["value"])
            else:
                raise ApiError(400, "BAD_REQUEST", "body needs node+value or clear")
            session.history.append(
                {"v": 1, "kind": "oracle-override", "i": session.step_index,
                 "overrides": {str(k): v for k, v in sorted(session.overrides.items())}}
            )
            session.refresh()
            return session.state_payload()

    @app.get("/sessions/{sid}/trace")
    def trace_session(sid: str):
        session = store.get(sid)
        with session.lock:
            session.touch()
            lines = [json.dumps(entry, sort_keys=True, separators=(",", ":")) for entry in session.history]
        return PlainTextResponse("\n".join(lines) + "\n", media_type="application/x-ndjson")

    @app.delete("/sessions/{sid}")
    def delete_session(sid: str):
        store.delete(sid)
        return Response(status_code=204)

    @app.post("/gc")
    def gc(ttl: Optional[float] = None):
        return {"v": 1, "reaped": store.gc(ttl)}

    if static_dir:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")

    return app
