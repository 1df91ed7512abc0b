"""Exception hierarchy.

``ConfigError`` maps to CLI exit code 2, ``NumericalGuardError`` (and
subclasses) to exit code 3.
"""


class StrongWalkError(Exception):
    """Base class for all library errors."""


class ConfigError(StrongWalkError):
    """Invalid user configuration (bad flags, malformed config file)."""


class NumericalGuardError(StrongWalkError):
    """A numerical validity guard tripped."""


class LevelTooCoarseError(NumericalGuardError):
    """Level m is too coarse: q_up leaves (0,1) or the down factor is <= 0."""


class NonDyadicError(NumericalGuardError):
    """A maturity is not an exact dyadic rational on the requested grid."""


class InsufficientDataError(NumericalGuardError):
    """A walk or coin row is too short for the requested operation."""


class CapExceededError(NumericalGuardError):
    """A configured size cap (row length, lattice steps, tree depth) was hit."""


class DerivativeUnavailableError(NumericalGuardError):
    """The claim does not supply the payoff derivative of the needed order."""
