"""autonet exceptions"""
from utils.errors import DataError, NumericError


class ShapeMismatch(NumericError):
    """Tensor extents disagree with each other or with a ConvSpec"""


class LabelOutOfRange(NumericError):
    """Class label outside [0, classes)"""


class PrecisionError(NumericError):
    """Operation requires a different floating point precision"""


class CheckpointMismatch(DataError):
    """Checkpoint file malformed or incompatible with the network"""
