import logging
from typing import Optional, Sequence

from sqlalchemy import create_engine
from sqlalchemy.orm import sessionmaker

from segarch.training import TrainReport
from segmetrics.report import REGIONS, ScanReport
from .models import Base, ScanEvaluation, TrainingRun

logger = logging.getLogger(__name__)


class ResultsStore():
    def __init__(self, db_path='tumor_cascade.db'):
        logger.info(f"Opening results store {db_path}")

        self.engine = create_engine(f"sqlite:///{db_path}")
        Base.metadata.create_all(self.engine)

        Session = sessionmaker(bind=self.engine)
        self.session = Session()

    def record_training(self, report: TrainReport, checkpoint_path: str = "",
                        config: Optional[dict] = None) -> int:
        """Store a training run; returns its row id"""
        run = TrainingRun(
            kind=report.kind,
            seed=report.seed,
            iterations=report.iterations,
            lr=report.lr,
            momentum=report.momentum,
            final_loss=report.losses[-1] if report.losses else None,
            train_metrics=report.train_metrics,
            val_metrics=report.val_metrics,
            checkpoint_path=str(checkpoint_path),
            config=config or {},
        )
        self.session.add(run)
        self.session.commit()
        return run.id

    def record_evaluations(self, reports: Sequence[ScanReport], batch: str = "") -> int:
        """Store every region of every report; returns the number of rows written"""
        rows = 0
        for report in sorted(reports, key=lambda r: r.scan_id):
            for region in REGIONS:
                metrics = report.regions[region]
                self.session.add(ScanEvaluation(
                    batch=batch,
                    scan_id=report.scan_id,
                    region=region,
                    dice=metrics.dice,
                    sensitivity=metrics.sensitivity,
                    specificity=metrics.specificity,
                    precision=metrics.precision,
                    hausdorff=metrics.hausdorff,
                    assd=metrics.assd,
                    flags=list(metrics.flags),
                ))
                rows += 1
        self.session.commit()
        return rows

    def training_history(self, kind: Optional[str] = None, limit: int = 20) -> list:
        """Latest training runs, newest first"""
        query = self.session.query(TrainingRun)
        if kind:
            query = query.filter_by(kind=kind)
        runs = query.order_by(TrainingRun.id.desc()).limit(limit).all()

        return [
            {
                'kind': r.kind,
                'seed': r.seed,
                'final_loss': r.final_loss,
                'train_metrics': r.train_metrics,
                'checkpoint': r.checkpoint_path,
            }
            for r in runs
        ]

    def scan_history(self, scan_id: str) -> list:
        """All stored region rows for a scan, oldest first"""
        rows = self.session.query(ScanEvaluation)\
            .filter_by(scan_id=scan_id)\
            .order_by(ScanEvaluation.id)\
            .all()

        return [
            {
                'batch': r.batch,
                'region': r.region,
                'dice': r.dice,
                'hausdorff': r.hausdorff,
                'flags': r.flags,
            }
            for r in rows
        ]

    def close(self):
        """Close database connection"""
        self.session.close()
        self.engine.dispose()
