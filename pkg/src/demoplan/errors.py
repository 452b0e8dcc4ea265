"""Exception hierarchy.

Every error raised by this package derives from DemoplanError. Errors
caused by user-supplied input (files, flags, scripts) derive from
InputError; the CLI maps those to exit code 2 and everything else to 1.
"""


class DemoplanError(Exception):
    """Base class for all package errors."""


class InputError(DemoplanError):
    """Invalid user-supplied input."""


class OntologyError(InputError):
    """Malformed or inconsistent knowledge-base document."""


class UnknownClassError(OntologyError):
    """Lookup of an object class that is not in the ontology."""


class UnknownAffordanceError(OntologyError):
    """Lookup of an affordance that is not registered."""


class TraceError(InputError):
    """Malformed trace file or trace-level invariant violation."""


class ActionSyntaxError(InputError):
    """Action DSL grammar or validation error (carries line/column)."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        if line is not None:
            loc = f"line {line}" + (f", column {column}" if column is not None else "")
            message = f"{loc}: {message}"
        super().__init__(message)
        self.line = line
        self.column = column


class SceneError(InputError):
    """Initial scene analysis could not complete."""


class MatchError(InputError):
    """Recognition preconditions not met (empty trace, unknown class)."""


class PlanError(InputError):
    """Timeline cannot be turned into a well-formed command plan."""


class ScenarioError(InputError):
    """Scenario template invalid or not geometrically realizable."""


class SimulationError(DemoplanError):
    """A command's precondition failed in the symbolic world."""
