"""Exception types shared across the package.

The CLI maps ``DataError`` (bad or degenerate input) to exit code 2 and
``NumericError`` (a linear-algebra routine failed) to exit code 3.
"""


class DataError(ValueError):
    """Invalid, mismatched, or degenerate input data."""


class NumericError(RuntimeError):
    """An eigendecomposition or factorization failed to converge."""
