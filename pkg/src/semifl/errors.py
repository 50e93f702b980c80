"""Error taxonomy shared across the package.

Each class maps to a process exit code when raised through the CLI:
ConfigError -> 1, DataError -> 2, anything else -> 3.
"""


class SemiFLError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(SemiFLError):
    """Invalid or inconsistent run configuration (bad key, bad value, bad combination)."""


class DataError(SemiFLError):
    """Problem with input data: missing/corrupt files, unsatisfiable partition, bad assignment."""
