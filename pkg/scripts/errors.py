"""
Exceptions raised by the potts-forge modules.

Solver outcomes (infeasible, unbounded, limits) are reported through
SolverStatus in scripts.milp and never raised.
"""


class PottsForgeError(Exception):
    """Base class for every error raised by potts-forge."""


class InvalidGraph(PottsForgeError):
    """Graph is not finite, simple and undirected, or cannot be parsed."""


class ModelMismatch(PottsForgeError):
    """Dimensions of a model, parameter vector, bounds or state disagree."""


class InvalidState(PottsForgeError):
    """A label or a state index is out of range."""


class TooLarge(PottsForgeError):
    """An enumeration or brute-force budget would be exceeded."""


class EmptyDataSet(PottsForgeError):
    """A data set with no states was given."""


class InvalidDataSet(PottsForgeError):
    """A data set has duplicate or malformed states."""


class DegenerateDataSet(PottsForgeError):
    """A data set covers every state, leaving nothing to separate it from."""


class DegenerateGap(PottsForgeError):
    """A strictly positive band gap was required."""


class InvalidArgument(PottsForgeError, ValueError):
    """A scalar argument is outside its allowed range."""


class InputFormatError(PottsForgeError):
    """A model, params, data or result file is malformed."""
