from typing import Any


class PlannerError(Exception):
    pass


class InstanceError(PlannerError, ValueError):
    pass


class InfeasibleError(PlannerError):
    def __init__(self, message: str, diagnostics: list[Any] | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or []


class OracleLimitError(PlannerError, ValueError):
    pass
