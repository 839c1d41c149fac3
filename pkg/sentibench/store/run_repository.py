import json
from pathlib import Path
from typing import Any, List, Optional, Union

from sqlalchemy.engine import Engine
from sqlmodel import Session, SQLModel, create_engine

from sentibench.evaluation.results import RunResult
from sentibench.logger import sentibench_logger
from sentibench.store.base_repository import BaseRepository
from sentibench.store.entity import RunRecord

RUN_STORE_FILENAME = "runs.sqlite"


def open_run_store(path: Union[str, Path]) -> Engine:
    """Creates (or opens) the SQLite run store at path and its tables"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    engine = create_engine(f"sqlite:///{path}")
    SQLModel.metadata.create_all(engine, tables=[RunRecord.__table__])  # type: ignore
    sentibench_logger.debug("Opening run store succeeded", path=str(path))
    return engine


class RunRecordRepository(BaseRepository[RunRecord]):
    """Persists finished benchmark runs so that interrupted benchmarks can resume"""

    def __init__(self, session: Session, logger: Optional[Any] = None):
        super().__init__(logger=logger, sensitive_attribute_keys=["predictions"])
        self.session = session

    def get_session(self) -> Session:
        return self.session

    def record_run(self, config_hash: str, run: RunResult) -> RunRecord:
        """Stores one run under the given configuration hash

        Raises:
            CouldNotStoreRunException: If the insert failed
        """
        record = RunRecord(
            config_hash=config_hash,
            kind=run.kind,
            dim=run.dim,
            dataset=run.dataset,
            seed=run.seed,
            label=run.label,
            accuracy=run.accuracy,
            dev_accuracy=run.dev_accuracy,
            predictions=json.dumps(list(run.predictions)),
            hyperparameters=json.dumps(run.hyperparameters, sort_keys=True),
        )
        return self.create(record)

    def completed_runs(self, config_hash: str) -> List[RunResult]:
        """Returns the runs stored for a configuration hash, in insertion order"""
        return [self.to_run_result(record) for record in self.find(config_hash=config_hash)]

    @staticmethod
    def to_run_result(record: RunRecord) -> RunResult:
        return RunResult(
            kind=record.kind,
            dim=record.dim,
            dataset=record.dataset,
            seed=record.seed,
            predictions=tuple(json.loads(record.predictions)),
            accuracy=record.accuracy,
            label=record.label,
            dev_accuracy=record.dev_accuracy,
            hyperparameters=json.loads(record.hyperparameters),
        )
