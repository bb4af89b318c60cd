"""Exception types raised across the package."""


class HybridPrecodingError(Exception):
    """Base class for all package errors."""


class InvalidInputError(HybridPrecodingError, ValueError):
    """Argument violates a documented precondition (shape, range, finiteness)."""


class DegenerateInputError(HybridPrecodingError, ArithmeticError):
    """Input is numerically degenerate: zero composite power, singular Gram, ..."""


class ConfigError(HybridPrecodingError):
    """Experiment configuration is malformed or inconsistent."""


class ContractViolation(HybridPrecodingError):
    """A checked postcondition or input contract does not hold."""
