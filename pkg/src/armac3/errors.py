"""Exception hierarchy; the CLI maps each family to its own exit code."""


class ArmaC3Error(Exception):
    exit_code = 1


class ConfigError(ArmaC3Error, ValueError):
    exit_code = 2


class DataError(ArmaC3Error, ValueError):
    exit_code = 3


class NumericError(ArmaC3Error, FloatingPointError):
    exit_code = 4


class ContractError(ArmaC3Error, ValueError):
    exit_code = 5


class DimensionError(ContractError):
    pass


class DegenerateError(ContractError):
    pass


class FormatError(ArmaC3Error):
    exit_code = 6


class DegenerateRowWarning(RuntimeWarning):
    """An all-zero row was normalized; it was mapped to zeros instead of NaN."""
