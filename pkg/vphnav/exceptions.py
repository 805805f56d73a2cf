"""
Exception hierarchy for the navigation stack.
"""


class NavigationError(Exception):
    """Root of every error raised by vphnav."""


class ScenarioError(NavigationError, ValueError):
    """A scenario could not be loaded."""


class ScenarioParseError(ScenarioError):
    """Scenario file is missing or is not valid JSON for the schema."""


class ScenarioValidationError(ScenarioError):
    """Scenario parsed but breaks a geometric invariant."""


class ConfigError(NavigationError, ValueError):
    """Params file, scenario params block or --set override is invalid."""


class NoFeasibleDirection(NavigationError):
    """Every candidate beam is masked by the symbol or threshold function."""

    def __init__(self, message: str = "no feasible direction: all candidate beams blocked or unsafe"):
        super().__init__(message)


class HorizonMismatchError(NavigationError, ValueError):
    """Reference length does not match the prediction horizon."""


class LogFormatError(NavigationError, ValueError):
    """A CSV artifact does not have the expected columns."""
