"""Exception types shared across the package.

CLI exit codes map onto these: ConfigError -> 2, OSError -> 3,
ContractError -> 4.
"""


class ContractError(RuntimeError):
    """A caller broke a documented precondition."""


class ShapeError(ContractError, ValueError):
    """Tensor dimensions do not line up."""


class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""


class NoRouteError(LookupError):
    """The destination cannot be reached from the source."""


class StateError(ContractError):
    """An object was used before it was ready (e.g. unloaded parameters)."""


class ParseError(ValueError):
    """Malformed input file; carries the offending line number."""

    def __init__(self, message, path=None, line=None):
        where = ""
        if path is not None:
            where = f"{path}:"
        if line is not None:
            where += f"{line}: "
        elif where:
            where += " "
        super().__init__(where + message)
        self.path = path
        self.line = line


class BudgetExceeded(RuntimeError):
    """A run hit its wall-clock budget before finishing."""

    def __init__(self, message, done_steps: int = 0, total_steps: int = 0, elapsed: float = 0.0):
        super().__init__(message)
        self.done_steps = done_steps
        self.total_steps = total_steps
        self.elapsed = elapsed

    @property
    def projected_seconds(self) -> float:
        return self.elapsed * self.total_steps / max(self.done_steps, 1)
