"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class AgentCellsError(Exception):
    exit_code = 4
    code = "internal"


class InputError(AgentCellsError, ValueError):
    """Malformed or inconsistent input."""

    exit_code = 2
    code = "input"


class InfeasibleError(AgentCellsError):
    """Well-formed input with no valid answer (unreachable node, all-zero matrix...)."""

    exit_code = 3
    code = "infeasible"


class InvariantError(AgentCellsError, AssertionError):
    exit_code = 4
    code = "invariant"
