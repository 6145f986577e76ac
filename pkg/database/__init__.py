"""Database module - SQLite history of training runs and evaluations"""
from .db_handler import ResultsStore
from .models import Base, TrainingRun, ScanEvaluation

__all__ = [
    "ResultsStore",
    "Base",
    "TrainingRun",
    "ScanEvaluation",
]
