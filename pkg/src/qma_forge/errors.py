"""Exception hierarchy shared by every module."""

from __future__ import annotations


class QmaForgeError(Exception):
    """Base class for all errors raised by this package."""


class SizeLimitError(QmaForgeError):
    """A dense object would exceed the amplitude budget.

    ``stage`` is set when the failure happens inside a multi-stage
    compilation (1-based stage index).
    """

    def __init__(self, message: str, stage: int | None = None):
        if stage is not None:
            message = f"stage {stage}: {message}"
        super().__init__(message)
        self.stage = stage


class LayoutError(QmaForgeError, ValueError):
    """Register layout mismatch, unknown register, or bad permutation."""


class ContractError(QmaForgeError, ValueError):
    """An input violated a numerical precondition (Hermitian, unitary, ...)."""


class NotPSDError(ContractError):
    """Matrix has an eigenvalue below the PSD tolerance."""


class CutError(QmaForgeError, ValueError):
    """Invalid bipartition of a register layout."""


class CompatibilityError(QmaForgeError, ValueError):
    """Proofs do not match the proof registers of a verifier."""


class ShapeError(QmaForgeError, ValueError):
    """Wrong number of proofs, slots, or POVM elements."""


class HypothesisError(QmaForgeError, ValueError):
    """A parameter precondition of a bound (gap, delta > 10 eps) fails."""


class StateIndexError(QmaForgeError, IndexError):
    """Index outside the allowed range."""
