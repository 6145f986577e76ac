"""ctxwin exceptions"""
from utils.errors import DataError


class WindowLargerThanImage(DataError):
    """Window extent exceeds the scaled slice it should tile"""


class InvalidRect(DataError):
    """Rect with x0 > x1 or y0 > y1"""


class WindowFormatError(DataError):
    """Malformed line in a window/proposal text file"""


class MissingLabels(DataError):
    """Window generation needs a label volume and the scan has none"""
