"""Exception types shared across the package.

The command line maps NonFiniteWeightsError to exit code 3 (numerical
failure) and every other SeqAccelError to exit code 2 (bad input).
"""

from __future__ import annotations


class SeqAccelError(Exception):
    """Base class for all errors raised by this package."""


class EmptyInputError(SeqAccelError):
    """Input contained no usable records."""


class IllegalResidueError(SeqAccelError):
    """A residue falls outside the configured alphabet."""


class HeaderWithoutSequenceError(SeqAccelError):
    """A FASTA header was not followed by any sequence line."""


class NoLabeledRecordsError(SeqAccelError):
    """The label join matched zero sequence records."""


class DuplicateIdError(SeqAccelError):
    """An identifier appeared more than once in a label table."""


class UnknownLabelError(SeqAccelError):
    """A label is not a member of the class list."""


class InvalidParameterError(SeqAccelError):
    """A parameter value violates its documented range or constraint."""


class SequenceTooShortError(SeqAccelError):
    """A sequence is shorter than the window the embedding needs."""


class DimensionMismatchError(SeqAccelError):
    """Array shapes disagree with each other or with a model."""


class FormatError(SeqAccelError):
    """A structured text file does not match its documented layout."""


class DegenerateSumError(SeqAccelError):
    """Sum-normalization hit a score sum too close to zero to divide by."""

    def __init__(self, message: str, sample_index: int | None = None):
        super().__init__(message)
        self.sample_index = sample_index


class NonFiniteWeightsError(SeqAccelError):
    """An update produced non-finite weight entries; training diverged.

    When raised from the training loop, ``trace`` holds the partial
    trace recorded so far and ``state`` the last finite model state.
    """

    def __init__(self, message: str):
        super().__init__(message)
        self.trace = None
        self.state = None
