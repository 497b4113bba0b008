"""
Exception types shared across the package.
"""

from typing import Iterable, List


class SWGANError(Exception):
    """Base class for every error raised by swgan_inpaint."""


class ShapeError(SWGANError, ValueError):
    """Incompatible tensor shapes, channel counts or spatial sizes."""


class ConfigError(SWGANError, ValueError):
    """One or more configuration problems, reported together."""

    def __init__(self, problems: Iterable[str]):
        self.problems: List[str] = list(problems)
        lines = "\n".join(f"  - {p}" for p in self.problems)
        super().__init__(f"{len(self.problems)} configuration problem(s):\n{lines}")


class ContainerError(SWGANError, ValueError):
    """Malformed fixture, checkpoint or weights file."""


class ChecksumError(ContainerError):
    """Trailing checksum does not match the file contents."""


class VersionError(ContainerError):
    """Container written by an unsupported format version."""


class ImageIOError(SWGANError, OSError):
    """Image or mask file could not be read or has the wrong colour mode."""


class NonFiniteLossError(SWGANError, ArithmeticError):
    """A loss term became NaN or infinite."""

    def __init__(self, term: str, value: float, step: int = -1):
        self.term = term
        self.value = value
        self.step = step
        where = f" at step {step}" if step >= 0 else ""
        super().__init__(f"non-finite loss term '{term}' = {value}{where}")


class GradientError(SWGANError, RuntimeError):
    """Backward pass misuse: non-scalar loss or missing parameter gradient."""
