"""Exception hierarchy shared across the package."""

from __future__ import annotations


class HotrackError(Exception):
    """Base class for all errors raised by hotrack."""


class TopologyError(HotrackError, ValueError):
    pass


class IndexOutOfRange(TopologyError):
    pass


class SelfLoop(TopologyError):
    pass


class NonPositiveWeight(TopologyError):
    pass


class DuplicateEdge(TopologyError):
    pass


class NonFiniteInput(HotrackError, ValueError):
    pass


class DimensionMismatch(HotrackError, ValueError):
    pass


class OutOfHorizon(HotrackError, ValueError):
    pass


class DegenerateDegree(HotrackError, ValueError):
    pass


class NotHurwitz(HotrackError, ArithmeticError):
    pass


class Diverged(HotrackError, ArithmeticError):
    """Integration produced a non-finite or runaway state."""

    def __init__(self, t: float, message: str = "") -> None:
        self.t = t
        super().__init__(message or f"simulation diverged at t={t:.6g}")


class StepTooLarge(Diverged):
    pass


class EmptyLog(HotrackError, ValueError):
    pass


class ParseError(HotrackError, ValueError):
    def __init__(self, line: int | None, message: str) -> None:
        self.line = line
        self.message = message
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{message}")


class ScenarioValidationError(HotrackError, ValueError):
    """Every violation found in a scenario, not just the first one."""

    def __init__(self, problems: list[str]) -> None:
        self.problems = list(problems)
        super().__init__("invalid scenario:\n  - " + "\n  - ".join(self.problems))
