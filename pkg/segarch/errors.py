"""segarch exceptions"""
from utils.errors import DataError


class NoDetection(DataError):
    """The detector produced no box above the score floor"""
