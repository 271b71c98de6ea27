"""Exception types raised across the package."""

from __future__ import annotations


class EsdMixError(Exception):
    """Base class for all package errors."""


class InputDomainError(EsdMixError, ValueError):
    """An argument lies outside the domain of the operation."""


class ConfigurationError(EsdMixError, ValueError):
    """An object was configured inconsistently."""


class UnsupportedGeneratorError(EsdMixError, ValueError):
    """The requested quantity is not known in closed form for this generator."""


class ShapeError(EsdMixError, ValueError):
    """Array dimensions do not agree."""


class NotPSDError(EsdMixError, ValueError):
    """A scatter matrix has a clearly negative eigenvalue."""


class DegenerateScatterError(EsdMixError, ValueError):
    """Eigenvalues collapsed to zero where a positive value is required."""


class EmptyComponentError(EsdMixError, RuntimeError):
    """A mixture component lost (almost) all of its posterior mass."""

    def __init__(self, component: int, mass: float):
        super().__init__(f"component {component} collapsed (posterior mass {mass:.3g})")
        self.component = component
        self.mass = mass


class PreconditionError(EsdMixError, ValueError):
    """Finite-sample existence conditions for the constrained MLE are not met."""

    def __init__(self, diagnostics):
        super().__init__("; ".join(diagnostics.reasons) or "precondition failed")
        self.diagnostics = diagnostics


class FitFailedError(EsdMixError, RuntimeError):
    """Every start of a multi-start fit failed."""


class LevelRangeError(EsdMixError, IndexError):
    """A separation level outside the configured shift schedule was requested."""


class CSVParseError(EsdMixError, ValueError):
    """A CSV input file could not be parsed into a numeric matrix."""
