"""segmetrics exceptions"""
from utils.errors import DataError


class EmptySurface(DataError):
    """A surface distance was requested for an empty mask"""
