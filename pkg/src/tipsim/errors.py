"""Exception hierarchy shared across the package."""


class TipError(Exception):
    """Base class for all tipsim errors."""


class DomainError(TipError):
    """An argument is outside the domain of an operation (bad pair, bad node, overlap)."""


class ConfigurationError(TipError):
    """Inconsistent setup, e.g. a guard reads an oracle input that was never supplied."""


class DslError(TipError):
    """Rule DSL syntax or validation failure, with position information."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class ScheduleInfeasibleError(TipError):
    """A scripted schedule asked for a pair that is not enabled."""

    def __init__(self, step: int, pair):
        super().__init__(f"scripted pair {pair} not enabled at step {step}")
        self.step = step
        self.pair = pair


class OrderingError(TipError):
    """A check was run before a prerequisite check succeeded."""


class SolverError(TipError):
    """Iterative solver failed to reach the requested tolerance."""


class ReplayDivergenceError(TipError):
    """Recomputed trace differs from the recorded one."""

    def __init__(self, step: int, field: str, expected, got):
        super().__init__(f"divergence at step {step}: {field} expected {expected!r}, got {got!r}")
        self.step = step
        self.field = field
        self.expected = expected
        self.got = got
