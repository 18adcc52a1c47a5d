"""tipsim: simulate, verify and adversarially explore tiny interaction protocols.

Anonymous nodes exchange a single memoryless agent under oracle guidance;
this package provides the state machine, the built-in protocol tables, the
scheduler/fairness machinery, an execution engine with replayable traces,
an exhaustive checker for small instances, a CLI, and an HTTP session
service for interactive adversarial stepping.
"""
from .model import Configuration, Outcome, Rule, RuleTable, Topology
from .oracles import GLOBAL, OracleKind, OracleSpec, k_distance
from .protocols import ProtocolSpec, builtin, enabled_pairs, load_dsl, parse_dsl, print_dsl
from .schedulers import Lasso, LassoStep, SchedulerSpec, check_global_fairness_lasso

__version__ = "0.1.0"

__all__ = [
    "Configuration",
    "GLOBAL",
    "Lasso",
    "LassoStep",
    "OracleKind",
    "OracleSpec",
    "Outcome",
    "ProtocolSpec",
    "Rule",
    "RuleTable",
    "SchedulerSpec",
    "Topology",
    "builtin",
    "check_global_fairness_lasso",
    "enabled_pairs",
    "k_distance",
    "load_dsl",
    "parse_dsl",
    "print_dsl",
]
