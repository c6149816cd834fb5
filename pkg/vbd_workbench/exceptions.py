"""
Exception types raised by the VBD Workbench.
"""


class WorkbenchError(Exception):
    """Base class for every error raised by the workbench."""


class ValidationError(WorkbenchError, ValueError):
    """Raised when an input, precondition or configuration value is invalid."""


class DataFormatError(ValidationError):
    """Raised when a CSV or IDX file cannot be parsed."""


class TrainingError(WorkbenchError, RuntimeError):
    """Raised when model training diverges (non-finite loss)."""

    def __init__(self, message: str, epoch: int):
        super().__init__(f"{message} (epoch {epoch})")
        self.epoch = epoch
