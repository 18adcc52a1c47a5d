"""Built-in rule tables and the rule DSL.

DSL grammar, one rule per line (blank lines and # comments ignored):

    (<a>,<o>),(<a>,<o>) -> <p>: (<a>,<a>) | <p>: (<a>,<a>) | ...

where guard slots use a in {A,-,*} and o in {T,F,*}, outcome slots use
a in {A,-}, and probabilities are decimals or fractions summing to 1.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .errors import ConfigurationError, DomainError, DslError
from .model import Configuration, Outcome, Pair, Rule, RuleTable, Topology, match_rule
from .oracles import GLOBAL, OracleKind, k_distance

BUILTIN_NAMES = ("chain-token", "prob-token", "local-leader-k1", "local-leader-ring", "two-node-token")

LEGITIMACY_IDS = ("unique-token", "terminal-mis", "terminal-alternating")


@dataclass(frozen=True)
class ProtocolSpec:
    """A rule table plus what it needs (oracle) and what it promises (legitimacy)."""

    name: str
    table: RuleTable
    oracle_requirement: Optional[OracleKind]
    legitimacy: str
    intended_topologies: str = ""

    def __post_init__(self):
        if self.legitimacy not in LEGITIMACY_IDS:
            raise DomainError(f"unknown legitimacy id {self.legitimacy!r}")
        if self.oracle_requirement is None and self.table.mentions_oracle():
            raise ConfigurationError("table reads oracle inputs but no oracle is required")

    def to_json(self) -> dict:
        oracle = None
        if self.oracle_requirement is not None:
            oracle = {"kind": self.oracle_requirement.kind, "k": self.oracle_requirement.k}
        return {
            "name": self.name,
            "dsl": print_dsl(self.table),
            "oracle": oracle,
            "legitimacy": self.legitimacy,
            "intended_topologies": self.intended_topologies,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ProtocolSpec":
        oracle = obj.get("oracle")
        kind = None if oracle is None else OracleKind(oracle["kind"], int(oracle.get("k", 0)))
        return cls(
            name=obj["name"],
            table=parse_dsl(obj["dsl"]),
            oracle_requirement=kind,
            legitimacy=obj["legitimacy"],
            intended_topologies=obj.get("intended_topologies", ""),
        )


def _rule(gi, goi, gr, gor, *outcomes) -> Rule:
    outs = tuple(Outcome(Fraction(p), ia, ra) for p, ia, ra in outcomes)
    return Rule(gi, goi, gr, gor, outs)


A, N, W = True, False, None  # agent, no agent, wildcard

_MERGE = _rule(A, W, A, W, (1, A, N))  # both hold -> responder cleaned
_CREATE_GLOBAL = _rule(N, False, N, W, (1, A, N))  # detector silent -> initiator creates
_PULL = _rule(N, W, A, W, (1, A, N))  # clean initiator pulls the responder's agent
_COINFLIP_PUSH = _rule(A, W, N, W, (Fraction(1, 2), N, A), (Fraction(1, 2), A, N))
_COINFLIP_PULL = _rule(N, W, A, W, (Fraction(1, 2), A, N), (Fraction(1, 2), N, A))
_CREATE_PLAIN = _rule(N, W, N, W, (1, A, N))  # oracle-free creation on a clean pair


def builtin(name: str, strict_listing: bool = False) -> ProtocolSpec:
    """Return a built-in protocol by name.

    `strict_listing` drops the responder-side coin-flip move of prob-token,
    keeping only the initiator-side one.
    """
    if name == "chain-token":
        table = RuleTable((_MERGE, _CREATE_GLOBAL, _PULL))
        return ProtocolSpec(name, table, GLOBAL, "unique-token", "chains")
    if name == "prob-token":
        rules = [_MERGE, _CREATE_GLOBAL, _COINFLIP_PUSH]
        if not strict_listing:
            rules.append(_COINFLIP_PULL)
        return ProtocolSpec(name, RuleTable(tuple(rules)), GLOBAL, "unique-token", "arbitrary graphs")
    if name == "local-leader-k1":
        table = RuleTable((_MERGE, _CREATE_GLOBAL))
        return ProtocolSpec(name, table, k_distance(1), "terminal-mis", "connected graphs")
    if name == "local-leader-ring":
        table = RuleTable((_MERGE, _CREATE_PLAIN))
        return ProtocolSpec(name, table, None, "terminal-alternating", "even rings")
    if name == "two-node-token":
        table = RuleTable((_MERGE, _CREATE_PLAIN))
        return ProtocolSpec(name, table, None, "unique-token", "two nodes")
    raise DomainError(f"unknown protocol {name!r}")


_AGENT_SYMS = {"A": True, "-": False, "*": None}
_ORACLE_SYMS = {"T": True, "F": False, "*": None}
_OUT_SYMS = {"A": True, "-": False}

_GUARD_RE = re.compile(r"\(\s*([A\-*])\s*,\s*([TF*])\s*\)")
_OUT_RE = re.compile(r"(?:([0-9./]+)\s*:\s*)?\(\s*([A\-])\s*,\s*([A\-])\s*\)")


def _parse_rule_line(line: str, lineno: int) -> Rule:
    def err(msg: str, col: int):
        raise DslError(msg, lineno, col + 1)

    offset = len(line) - len(line.lstrip())
    m1 = _GUARD_RE.match(line, offset)
    if not m1:
        err("expected initiator guard '(a,o)'", offset)
    rest = line[m1.end():]
    m_comma = re.match(r"\s*,\s*", rest)
    if not m_comma:
        err("expected ',' between guards", m1.end())
    m2 = _GUARD_RE.match(rest, m_comma.end())
    if not m2:
        err("expected responder guard '(a,o)'", m1.end() + m_comma.end())
    after = rest[m2.end():]
    m_arrow = re.match(r"\s*->\s*", after)
    if not m_arrow:
        err("expected '->'", m1.end() + m2.end())
    outcome_src = after[m_arrow.end():]
    outcome_base = len(line) - len(outcome_src)

    outcomes = []
    for piece_idx, piece in enumerate(outcome_src.split("|")):
        stripped = piece.strip()
        if not stripped:
            err("empty outcome", outcome_base)
        m = _OUT_RE.fullmatch(stripped)
        if not m:
            err(f"bad outcome {stripped!r}", outcome_base)
        prob_txt = m.group(1)
        try:
            prob = Fraction(prob_txt) if prob_txt is not None else Fraction(1)
        except (ValueError, ZeroDivisionError):
            err(f"bad probability {prob_txt!r}", outcome_base)
        outcomes.append(Outcome(prob, _OUT_SYMS[m.group(2)], _OUT_SYMS[m.group(3)]))

    try:
        return Rule(
            _AGENT_SYMS[m1.group(1)],
            _ORACLE_SYMS[m1.group(2)],
            _AGENT_SYMS[m2.group(1)],
            _ORACLE_SYMS[m2.group(2)],
            tuple(outcomes),
        )
    except DomainError as e:
        err(str(e), 0)


def parse_dsl(text: str) -> RuleTable:
    """Parse DSL text into a rule table; raises DslError with line/column."""
    rules = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        rules.append(_parse_rule_line(line, lineno))
    if not rules:
        raise DslError("no rules found", 1, 1)
    return RuleTable(tuple(rules))


def _sym(value: Optional[bool], syms: dict) -> str:
    for s, v in syms.items():
        if v is value:
            return s
    raise DomainError(f"unprintable pattern value {value!r}")


def print_dsl(table: RuleTable) -> str:
    """Canonical DSL text; parse_dsl(print_dsl(t)) == t."""
    lines = []
    for rule in table:
        guard = "({},{}),({},{})".format(
            _sym(rule.init_agent, _AGENT_SYMS),
            _sym(rule.init_oracle, _ORACLE_SYMS),
            _sym(rule.resp_agent, _AGENT_SYMS),
            _sym(rule.resp_oracle, _ORACLE_SYMS),
        )
        outs = " | ".join(
            "{}: ({},{})".format(o.prob, _sym(o.init_agent, _OUT_SYMS), _sym(o.resp_agent, _OUT_SYMS))
            for o in rule.outcomes
        )
        lines.append(f"{guard} -> {outs}")
    return "\n".join(lines) + "\n"


def load_dsl(
    text: str,
    name: str = "user",
    oracle: Optional[OracleKind] = "auto",
    legitimacy: str = "unique-token",
    intended_topologies: str = "",
) -> ProtocolSpec:
    """Parse a user table into a protocol spec.

    With oracle="auto", a global detector requirement is assumed whenever a
    guard mentions T or F, and none otherwise.
    """
    table = parse_dsl(text)
    if oracle == "auto":
        oracle = GLOBAL if table.mentions_oracle() else None
    return ProtocolSpec(name, table, oracle, legitimacy, intended_topologies)


def enabled_pairs(spec: ProtocolSpec, c: Configuration, topology: Topology) -> tuple[Pair, ...]:
    """Interactions whose matched rule can change at least one endpoint slot."""
    if spec.oracle_requirement is not None and c.inputs is None:
        raise ConfigurationError(f"protocol {spec.name} needs oracle inputs, none present")
    out = []
    for pair in topology.interactions:
        u, v = pair
        hit = match_rule(spec.table, c.state(u), c.state(v))
        if hit is None:
            continue
        _, rule = hit
        au, av = c.agents[u], c.agents[v]
        if any(o.init_agent != au or o.resp_agent != av for o in rule.outcomes):
            out.append(pair)
    return tuple(out)
