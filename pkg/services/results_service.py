import json
import logging
from typing import List, Optional, Sequence

from sqlalchemy.exc import IntegrityError
from sqlalchemy.orm import Session

from db_config import ExperimentRun, ResultRow

logger = logging.getLogger(__name__)


class ResultService:
    def __init__(self, session: Session):
        self.session = session

    def record_run(self, kind: str, seed: int, version: str, config: dict, rows: Sequence[dict],
                   summary: str = "", status: str = "ok", threads: int = 1) -> Optional[ExperimentRun]:
        """Stores one experiment run with its output rows."""
        logger.debug(f"record_run kind={kind} seed={seed} rows={len(rows)}")
        run = ExperimentRun(kind=kind, seed=seed, threads=threads, version=version,
                            config=json.dumps(config, sort_keys=True), summary=summary, status=status)
        run.rows = [ResultRow(position=i, payload=json.dumps(row, sort_keys=True)) for i, row in enumerate(rows)]
        try:
            self.session.add(run)
            self.session.commit()
            logger.info(f"Recorded {kind} run {run.id} ({status})")
            return run
        except IntegrityError:
            self.session.rollback()
            logger.error(f"Could not record {kind} run", exc_info=True)
            return None

    def get_run(self, run_id: int) -> Optional[ExperimentRun]:
        run = self.session.get(ExperimentRun, run_id)
        if run is None:
            logger.debug(f"Run {run_id} not found")
        return run

    def list_runs(self, kind: Optional[str] = None) -> List[ExperimentRun]:
        query = self.session.query(ExperimentRun)
        if kind is not None:
            query = query.filter_by(kind=kind)
        return query.order_by(ExperimentRun.id).all()

    def delete_run(self, run_id: int) -> bool:
        run = self.get_run(run_id)
        if run is None:
            return False
        self.session.delete(run)
        self.session.commit()
        logger.info(f"Deleted run {run_id}")
        return True

    @staticmethod
    def payloads(run: ExperimentRun) -> List[dict]:
        return [json.loads(row.payload) for row in run.rows]
