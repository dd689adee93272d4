"""Exception types shared across the package."""


class PercolabError(Exception):
    """Base class for all package errors."""


class ValidationError(PercolabError, ValueError):
    """Invalid input data (probabilities, codes, configs)."""


class LevelRangeError(PercolabError, IndexError):
    """A level index outside the sampled depth."""


class DomainError(PercolabError, ValueError):
    """An input outside the mathematical domain of an operation."""


class ResourceError(PercolabError, RuntimeError):
    """A computation would exceed the configured enumeration budget."""


class EmptySampleError(PercolabError, ValueError):
    """No usable samples (e.g. every trial went extinct)."""


class InsufficientSampleError(PercolabError, ValueError):
    """Too few conditioning events for a statistic to be meaningful."""


class DerivationError(PercolabError, RuntimeError):
    """A constructive derivation (e.g. interval selection) found no witness."""


class PreconditionError(PercolabError, ValueError):
    """A documented precondition of an operation does not hold."""


class OutOfRangeError(PercolabError, ValueError):
    """A projected value fell outside the codomain diagonal."""
