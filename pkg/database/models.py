"""Database ORM models for training runs and scan evaluations"""
from datetime import datetime

from sqlalchemy import Column, DateTime, Float, Integer, JSON, String
from sqlalchemy.orm import declarative_base

Base = declarative_base()


class TrainingRun(Base):
    """One detector or segmentation training run"""
    __tablename__ = "training_runs"

    id = Column(Integer, primary_key=True, index=True)
    kind = Column(String, index=True)  # detector or seg
    seed = Column(Integer)
    iterations = Column(Integer)
    lr = Column(Float)
    momentum = Column(Float)
    final_loss = Column(Float)
    train_metrics = Column(JSON)
    val_metrics = Column(JSON)
    checkpoint_path = Column(String)
    config = Column(JSON)  # flattened run config
    created_at = Column(DateTime, default=datetime.utcnow)


class ScanEvaluation(Base):
    """Metrics of one predicted scan against its ground truth, one row per region"""
    __tablename__ = "scan_evaluations"

    id = Column(Integer, primary_key=True, index=True)
    batch = Column(String, index=True)  # groups rows written by one evaluate call
    scan_id = Column(String, index=True)
    region = Column(String)  # WT, TC or ET
    dice = Column(Float)
    sensitivity = Column(Float, nullable=True)
    specificity = Column(Float, nullable=True)
    precision = Column(Float, nullable=True)
    hausdorff = Column(Float, nullable=True)
    assd = Column(Float, nullable=True)
    flags = Column(JSON)
    created_at = Column(DateTime, default=datetime.utcnow)
