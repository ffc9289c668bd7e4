"""Exception hierarchy shared by every pipeline stage."""


class WpultrError(Exception):
    """Base class for all wpultr failures."""


class ValidationError(WpultrError, ValueError):
    """Input, schema or configuration is invalid. Maps to CLI exit code 1."""


class SchemaMismatchError(ValidationError):
    """Records or headers disagree with the declared feature schema."""


class MalformedRowError(ValidationError):
    """A log file row could not be parsed."""

    def __init__(self, message: str, line: int | None = None, column: str | None = None):
        self.line = line
        self.column = column
        where = []
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column '{column}'")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(f"{prefix}{message}")


class LogValidationError(ValidationError):
    """A click log violates one or more type invariants."""

    def __init__(self, violations: list):
        self.violations = list(violations)
        head = "; ".join(str(v) for v in self.violations[:5])
        more = f" (+{len(self.violations) - 5} more)" if len(self.violations) > 5 else ""
        super().__init__(f"{len(self.violations)} log violation(s): {head}{more}")


class ConfigError(ValidationError):
    """Run configuration could not be parsed or is inconsistent."""

    def __init__(self, message: str, key: str | None = None, line: int | None = None):
        self.key = key
        self.line = line
        parts = []
        if line is not None:
            parts.append(f"line {line}")
        if key is not None:
            parts.append(f"key '{key}'")
        prefix = f"{', '.join(parts)}: " if parts else ""
        super().__init__(f"{prefix}{message}")


class TrainingConfigurationError(ValidationError):
    """Model wiring makes a training step impossible."""


class GraphError(WpultrError):
    """Base class for causal graph failures."""


class CyclicGraphError(GraphError, ValueError):
    """The directed part of a graph contains a cycle."""


class OrientationConflictError(GraphError):
    """Background knowledge contradicts an orientation forced by the data."""

    def __init__(self, message: str, edge: tuple[str, str]):
        self.edge = edge
        super().__init__(f"{message}: {edge[0]}→{edge[1]}")


class EstimationError(WpultrError):
    """A statistical estimate is undefined on the given data."""
