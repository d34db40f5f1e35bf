"""Exception hierarchy shared across the package.

Exit-code mapping used by the CLI: usage/parse errors exit 2, configuration
errors exit 3, capacity errors exit 4, anything else exit 5.
"""


class BoxModelError(Exception):
    """Base class for all package errors."""


class DomainError(BoxModelError):
    """An argument lies outside the mathematical domain of an operation."""


class ConfigurationError(BoxModelError):
    """Inconsistent or ill-defined model parameters (e.g. coupling too strong
    for the reference free energy, violated divisibility constraints)."""


class CapacityError(BoxModelError):
    """Exact enumeration was requested for a state space that is too large."""


class NoCoexistenceError(BoxModelError):
    """The double-tangent search found a single-welled landscape for every
    chemical potential in the bracket."""


class DegenerateMeasureError(BoxModelError):
    """Every candidate interval carries zero single-site mass."""


class WitnessRejectedError(BoxModelError):
    """A proposed minorant is nowhere below the potential it should bound."""
