"""volcore exceptions"""
from utils.errors import DataError


class BadMagic(DataError):
    """File does not start with the VVL1 magic"""


class TruncatedData(DataError):
    """Header or payload shorter (or longer) than the header promises"""


class UnsupportedDtype(DataError):
    """Dtype code or array dtype outside {float32, uint8}"""


class IoFailure(DataError):
    """Underlying filesystem operation failed"""


class InvalidVolume(DataError):
    """Dims, spacing or member volumes violate the data model"""


class IllegalLabel(DataError):
    """Label value outside the BRATS coding {0, 1, 2, 4}"""

    def __init__(self, value: int, index: tuple):
        self.value = int(value)
        self.index = tuple(int(i) for i in index)
        super().__init__(f"illegal label {self.value} at voxel {self.index}")


class DegenerateBox(DataError):
    """Box with zero or negative extent after growing and clipping"""


class DimsMismatch(DataError):
    """Two volumes that must share a grid do not"""


class SpecMismatch(DataError):
    """Raw blob size disagrees with its declared dims and dtype"""
