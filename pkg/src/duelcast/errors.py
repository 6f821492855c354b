"""Exception types shared across the package."""

from __future__ import annotations


class DuelcastError(Exception):
    """Base class for all package-specific failures."""


class NonFiniteState(DuelcastError):
    """A state vector stopped being finite (NaN/overflow) during integration."""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step


class NonFiniteValue(DuelcastError):
    """A probe evaluation or derivative produced a non-finite number."""


class SingularJacobian(DuelcastError):
    """The control Jacobian is numerically rank-deficient at the linearization point."""


class NoConvergence(DuelcastError):
    """Newton iteration exhausted its budget without meeting the tolerance."""


class LeftLocalBranch(DuelcastError):
    """A Newton iterate escaped the trust region around its seed."""


class UnknownScenario(DuelcastError):
    pass


class BadParams(DuelcastError):
    pass


class AnchorTooEarly(DuelcastError):
    """The requested anchor does not have enough history behind it."""


class AllCandidatesFailed(DuelcastError):
    """Every candidate probe set scored infinitely bad in a backtest."""


class ExhaustedDraws(DuelcastError):
    """Seeded generation gave up after too many rejected draws."""


class PlanExhausted(DuelcastError):
    """A live control plan ran out of samples inside the prediction window."""


class UnknownSession(DuelcastError):
    pass


class SessionTerminated(DuelcastError):
    pass


class ConfigError(DuelcastError):
    """Invalid configuration; ``field`` is the dotted path of the offending entry."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class FormatError(DuelcastError):
    """Malformed persisted file; ``line`` is 1-based where applicable."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line
