"""Exception types shared across the package."""


class SmoothlabError(Exception):
    """Base class for all errors raised by smoothlab."""


class DimensionError(SmoothlabError, ValueError):
    """Shape or length mismatch between array arguments."""


class DomainError(SmoothlabError, ValueError):
    """Argument value outside its documented domain."""


class ConfigError(SmoothlabError, ValueError):
    """Invalid or infeasible configuration."""


class ParseError(SmoothlabError, ValueError):
    """Malformed input file; message names the offending row where possible."""


class NumericError(SmoothlabError, ArithmeticError):
    """Non-finite value encountered where a finite one is required."""
