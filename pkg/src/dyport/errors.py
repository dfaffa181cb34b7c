"""Exception types shared across the toolkit."""

from __future__ import annotations


class DyportError(Exception):
    """Base class for all toolkit errors."""


class DyportWarning(UserWarning):
    """Non-fatal conditions: empty target sets, exhausted sampling pools,
    strata omitted for lack of records."""


class CorpusFormatError(DyportError):
    """A corpus file violates its schema. Carries file, line and reason."""

    def __init__(self, path: str, line: int, reason: str):
        self.path = str(path)
        self.line = line
        self.reason = reason
        super().__init__(f"{self.path}:{line}: {reason}")


class SchemaVersionError(DyportError):
    """A persisted artifact has a missing or incompatible schema version."""


class ValidationError(DyportError):
    """An argument or configuration violates a documented invariant."""


class ConvergenceError(DyportError):
    """An iterative solver hit its iteration budget. Carries the count."""

    def __init__(self, iterations: int, message: str | None = None):
        self.iterations = iterations
        super().__init__(message or f"no convergence after {iterations} iterations")


class TrainingDivergedError(DyportError):
    """A training loss became non-finite. Carries the epoch index."""

    def __init__(self, epoch: int, message: str | None = None):
        self.epoch = epoch
        super().__init__(message or f"loss became non-finite at epoch {epoch}")
