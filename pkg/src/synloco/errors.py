"""Exception types shared across the package.

The CLI maps these onto exit codes: DataError -> 3, NumericalError -> 4.
Precondition violations in pure numeric functions raise plain ValueError.
"""


class DataError(Exception):
    """Malformed, missing, or inconsistent input data."""


class NumericalError(Exception):
    """A numeric procedure failed (divergence, non-finite values, collapse)."""
