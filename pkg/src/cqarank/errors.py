class CQARankError(Exception):
    """Base class for all errors raised by cqarank."""


class ConfigError(CQARankError, ValueError):
    """Invalid parameters or an unusable method/configuration combination."""


class DataError(CQARankError, ValueError):
    """An input file or data structure violates its format or invariants."""
