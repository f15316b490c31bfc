"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes, so library code should raise
the most specific class that applies rather than bare ValueError when the
failure is a user-facing configuration, data, or numerical problem.
"""


class QnsError(Exception):
    """Base class for all package-specific errors."""

    exit_code = 1


class ConfigError(QnsError):
    """Invalid or inconsistent run configuration."""

    exit_code = 2


class DataError(QnsError):
    """Missing or malformed input data (plans, records, spectra files)."""

    exit_code = 3


class NumericalError(QnsError):
    """Numerical failure: rank deficiency, singular confusion matrix, etc."""

    exit_code = 4
