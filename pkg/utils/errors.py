"""Base exception types shared by every package"""

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class TumorCascadeError(Exception):
    """Root of all pipeline errors; ``exit_code`` is what the CLI returns"""

    exit_code = EXIT_DATA


class DataError(TumorCascadeError):
    exit_code = EXIT_DATA


class UsageError(TumorCascadeError):
    exit_code = EXIT_USAGE


class NumericError(TumorCascadeError):
    exit_code = EXIT_NUMERIC


class ConfigInvalid(UsageError):
    """Unknown key, unparsable value or out-of-range setting"""


class ManifestError(DataError):
    """Malformed manifest line or missing referenced file"""


class EmptyDataset(DataError):
    """Training was asked to run on nothing"""


class NumericFailure(NumericError):
    """A loss or gradient went non-finite"""


class ScanIdMismatch(DataError):
    """Prediction and truth manifests name different scans"""
