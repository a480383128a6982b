"""Exception hierarchy shared by all nflab modules."""


class NflabError(Exception):
    """Base class for every error raised by nflab."""


class ConfigError(NflabError, ValueError):
    """Invalid run configuration or rejected input parameter."""


class CapacityError(NflabError):
    """Requested truncation exceeds the configured memory bound."""


class NumericalError(NflabError):
    """A numerical kernel failed to converge or produced non-finite values."""


class ModelMismatchError(NflabError, ValueError):
    """Operators built on different spectral models were combined."""


class ResonanceViolation(NflabError):
    """An exact zero divisor was met outside the resonant set."""


class PrimitivityError(NflabError, ValueError):
    """Lattice rows cannot be completed to a unimodular basis."""

    def __init__(self, message, invariant_factors=()):
        super().__init__(message)
        self.invariant_factors = tuple(invariant_factors)


class GeneratorDeclarationError(NflabError, ValueError):
    """Declared frequency generators are not rationally independent."""


class ContaminationError(NflabError):
    """A trajectory leaked into the truncation buffer and cannot be trusted."""
