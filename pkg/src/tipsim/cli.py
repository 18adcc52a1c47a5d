"""Command-line entry point.

Verbs: run, check, terminals, lasso, stats, replay, serve.  Exit codes:
0 proved/ok, 2 refuted (witness written), 1 usage or I/O error.  Error
messages carry machine-greppable prefixes (E-PROTO, E-JSON, E-ORACLE).
Set TIP_LOG to a logging level name to see diagnostics.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from . import checker, engine, topologies
from .errors import ConfigurationError, DomainError, DslError, ReplayDivergenceError, TipError
from .model import Configuration, Topology
from .oracles import GLOBAL, OracleKind, OracleSpec, k_distance
from .protocols import BUILTIN_NAMES, ProtocolSpec, builtin, load_dsl

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_REFUTED = 2


def _setup_logging() -> None:
    level = os.environ.get("TIP_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


def _parse_oracle(text: str | None) -> OracleKind | None:
    if text is None or text == "none":
        return None
    if text == "global":
        return GLOBAL
    if text.startswith("k:"):
        return k_distance(int(text.split(":", 1)[1]))
    if text == "k1":
        return k_distance(1)
    raise DomainError(f"bad oracle spec {text!r} (use global, k:<n> or none)")


def _load_protocol(args) -> ProtocolSpec:
    if args.dsl:
        with open(args.dsl, "r", encoding="utf-8") as f:
            text = f.read()
        oracle = _parse_oracle(args.oracle) if args.oracle else "auto"
        return load_dsl(text, name=os.path.basename(args.dsl), oracle=oracle, legitimacy=args.pred or "unique-token")
    if not args.protocol:
        raise DomainError("one of --protocol or --dsl is required")
    if args.protocol not in BUILTIN_NAMES:
        raise DomainError(f"unknown protocol {args.protocol!r}; builtins: {', '.join(BUILTIN_NAMES)}")
    return builtin(args.protocol, strict_listing=getattr(args, "strict_listing", False))


def _load_topology(args) -> Topology:
    return topologies.generate(args.topology)


def _initial_from_arg(text: str | None, n: int) -> list[Configuration] | None:
    if not text:
        return None
    nodes = [int(x) for x in text.split(",") if x.strip() != ""]
    return [Configuration.from_agent_nodes(n, nodes)]


def _emit_verdict(verdict: checker.Verdict, args) -> int:
    fmt = getattr(args, "format", "text")
    payload = verdict.to_json()
    if fmt == "json":
        print(json.dumps(payload, sort_keys=True))
    else:
        print(f"{verdict.result}: {verdict.reason}")
        print(f"states explored: {verdict.stats.states_explored}, edges: {verdict.stats.edges}, "
              f"time: {verdict.stats.time_s:.3f}s")
    if verdict.result == "refuted":
        path = getattr(args, "witness", None) or "witness.json"
        with open(path, "w", encoding="utf-8") as f:
            json.dump(payload, f, indent=2, sort_keys=True)
            f.write("\n")
        print(f"witness written to {path}", file=sys.stderr)
        return EXIT_REFUTED
    return EXIT_OK


def cmd_run(args) -> int:
    with open(args.config, "r", encoding="utf-8") as f:
        obj = json.load(f)
    cfg = engine.RunConfig.from_json(obj)
    if args.seed is not None:
        from dataclasses import replace

        cfg = replace(cfg, seed=args.seed)
    print(f"seed: {cfg.seed}")
    trace = engine.run(cfg)
    text = trace.to_jsonl()
    if args.trace:
        with open(args.trace, "w", encoding="utf-8") as f:
            f.write(text)
        print(f"trace written to {args.trace} ({len(trace.steps)} steps)")
    else:
        sys.stdout.write(text)
    final = trace.final
    print(f"steps: {len(trace.steps)}, terminal: {trace.terminal}, "
          f"agents: {final.agent_count}, legitimate_step: {trace.legitimate_step}")
    return EXIT_OK


def cmd_check(args) -> int:
    protocol = _load_protocol(args)
    topology = _load_topology(args)
    verdict = checker.verify_stabilization(protocol, topology, args.pred or protocol.legitimacy)
    return _emit_verdict(verdict, args)


def cmd_terminals(args) -> int:
    protocol = _load_protocol(args)
    topology = _load_topology(args)
    terms = checker.enumerate_terminals(protocol, topology)
    if getattr(args, "format", "text") == "json":
        print(json.dumps({"v": 1, "terminals": [[int(a) for a in t.agents] for t in terms]}, sort_keys=True))
    else:
        print(f"{len(terms)} terminal configurations")
        for t in terms:
            print(" ".join("A" if a else "-" for a in t.agents))
    return EXIT_OK


def cmd_lasso(args) -> int:
    protocol = _load_protocol(args)
    topology = _load_topology(args)
    initial = _initial_from_arg(args.initial_agents, topology.node_count)
    verdict = checker.find_fair_nonconverging_lasso(
        protocol, topology, args.pred or protocol.legitimacy, args.fairness, initial
    )
    return _emit_verdict(verdict, args)


def cmd_stats(args) -> int:
    protocol = _load_protocol(args)
    topology = _load_topology(args)
    oracle = None
    if protocol.oracle_requirement is not None:
        oracle = OracleSpec(protocol.oracle_requirement)
    initial = _initial_from_arg(args.initial_agents, topology.node_count)
    if initial is None:
        initial = [Configuration((True,) * topology.node_count)]
    cfg = engine.RunConfig(
        topology=topology,
        protocol=protocol,
        oracle=oracle,
        initial=initial[0],
        max_steps=args.max_steps,
        stop="on-legitimate",
        seed=args.seed or 0,
    )
    print(f"seed: {cfg.seed}", file=sys.stderr)
    stats = engine.batch_stats(cfg, args.trials)
    fmt = getattr(args, "format", "text")
    if fmt == "csv":
        sys.stdout.write(stats.to_csv())
    elif fmt == "json":
        print(json.dumps(stats.summary(), sort_keys=True))
    else:
        s = stats.summary()
        print(f"trials: {s['trials']}, convergence rate: {s['convergence_rate']:.4f}")
        print(f"steps to legitimacy: {s['steps_to_legitimacy']}")
    return EXIT_OK


def cmd_replay(args) -> int:
    with open(args.trace, "r", encoding="utf-8") as f:
        trace = engine.Trace.from_jsonl(f.read())
    engine.replay(trace)
    print(f"replay ok: {len(trace.steps)} steps verified")
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .api import create_app

    app = create_app(static_dir=args.static, session_ttl=args.ttl)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tip", description="tiny interaction protocol workbench")
    sub = parser.add_subparsers(dest="verb", required=True)

    def add_protocol_args(p):
        p.add_argument("--protocol", help=f"builtin protocol ({', '.join(BUILTIN_NAMES)})")
        p.add_argument("--dsl", help="path to a rule DSL file instead of a builtin")
        p.add_argument("--oracle", help="oracle for DSL tables: global, k:<n>, none")
        p.add_argument("--strict-listing", action="store_true", dest="strict_listing",
                       help="prob-token: keep only the initiator-side coin-flip move")
        p.add_argument("--topology", required=True, help="chain:N, ring:N, complete:N, traffic-light, or JSON file")

    p = sub.add_parser("run", help="execute a run config and emit a JSONL trace")
    p.add_argument("--config", required=True, help="run config JSON file")
    p.add_argument("--trace", help="write the JSONL trace here instead of stdout")
    p.add_argument("--seed", type=int, help="override the seed in the config")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("check", help="verify closure + convergence exhaustively")
    add_protocol_args(p)
    p.add_argument("--pred", choices=["unique-token", "terminal-mis", "terminal-alternating"])
    p.add_argument("--format", choices=["text", "json"], default="text")
    p.add_argument("--witness", help="path for the refutation witness (default witness.json)")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("terminals", help="enumerate configurations with no enabled pair")
    add_protocol_args(p)
    p.add_argument("--format", choices=["text", "json"], default="text")
    p.set_defaults(func=cmd_terminals)

    p = sub.add_parser("lasso", help="search for a fair non-converging lasso")
    add_protocol_args(p)
    p.add_argument("--pred", choices=["unique-token", "terminal-mis", "terminal-alternating"])
    p.add_argument("--fairness", choices=["global", "weak"], default="global")
    p.add_argument("--initial-agents", dest="initial_agents",
                   help="comma-separated agent nodes for the stem start")
    p.add_argument("--format", choices=["text", "json"], default="text")
    p.add_argument("--witness", help="path for the witness (default witness.json)")
    p.set_defaults(func=cmd_lasso)

    p = sub.add_parser("stats", help="batch simulation statistics")
    add_protocol_args(p)
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--max-steps", type=int, default=100000, dest="max_steps")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--initial-agents", dest="initial_agents",
                   help="comma-separated agent nodes (default: all nodes hold)")
    p.add_argument("--format", choices=["text", "json", "csv"], default="text")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("replay", help="verify a recorded JSONL trace")
    p.add_argument("--trace", required=True)
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("serve", help="start the interactive session service")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--static", help="directory of frontend assets to serve at /")
    p.add_argument("--ttl", type=int, default=3600, help="idle session lifetime in seconds")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_ERROR if e.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except json.JSONDecodeError as e:
        print(f"E-JSON: {e}", file=sys.stderr)
        return EXIT_ERROR
    except DslError as e:
        print(f"E-PROTO: {e}", file=sys.stderr)
        return EXIT_ERROR
    except ConfigurationError as e:
        print(f"E-ORACLE: {e}", file=sys.stderr)
        return EXIT_ERROR
    except ReplayDivergenceError as e:
        print(f"E-REPLAY: {e}", file=sys.stderr)
        return EXIT_ERROR
    except (DomainError, TipError) as e:
        msg = str(e)
        prefix = "E-PROTO" if "protocol" in msg else "E-JSON" if "json" in msg.lower() else "E-ARGS"
        print(f"{prefix}: {msg}", file=sys.stderr)
        return EXIT_ERROR
    except FileNotFoundError as e:
        print(f"E-IO: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
