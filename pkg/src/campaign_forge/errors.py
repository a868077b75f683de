"""Exception hierarchy shared by every campaign_forge module."""

from __future__ import annotations


class CampaignForgeError(Exception):
    """Base class for expected, user-facing errors."""


class ParseError(CampaignForgeError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{message}")


class ValidationError(CampaignForgeError, ValueError):
    """Raised with the full list of violated invariants, not just the first."""

    def __init__(self, problems: list[tuple[str, str]]):
        self.problems = list(problems)
        lines = [f"{field}: {msg}" for field, msg in self.problems]
        super().__init__("invalid scenario:\n  " + "\n  ".join(lines))

    @property
    def fields(self) -> list[str]:
        return [f for f, _ in self.problems]


class UnknownKey(CampaignForgeError):
    def __init__(self, keys: list[str]):
        self.keys = list(keys)
        super().__init__("unrecognized scenario keys: " + ", ".join(self.keys))


class UnknownTier(CampaignForgeError, KeyError):
    def __str__(self) -> str:
        return f"unknown storage tier {self.args[0]!r}"


class LayoutMismatch(CampaignForgeError):
    pass


class LayoutInfeasible(CampaignForgeError):
    pass


class EmptyTelemetry(CampaignForgeError):
    pass


class RateOutOfRange(CampaignForgeError):
    pass


class InvalidInputs(CampaignForgeError, ValueError):
    pass


class NonTerminating(CampaignForgeError):
    pass


class DigestMismatch(CampaignForgeError):
    pass


class UnknownField(CampaignForgeError):
    pass


class IncompatibleValue(CampaignForgeError):
    pass


class IncomparableScenarios(CampaignForgeError):
    pass


class UnsupportedFormat(CampaignForgeError):
    pass
