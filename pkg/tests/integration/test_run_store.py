from pathlib import Path
from typing import Generator

import pytest
from sqlmodel import Session

from sentibench.evaluation.results import RunResult
from sentibench.exceptions import CouldNotStoreRunException, RecordDoesNotPossessAttributeException
from sentibench.store import RUN_STORE_FILENAME, RunRecord, RunRecordRepository, open_run_store


def make_run(seed: int, dataset: str = "semeval", accuracy: float = 0.5) -> RunResult:
    return RunResult(kind="bilstm", dim=100, dataset=dataset, seed=seed, predictions=(0, 2, 1, 1), accuracy=accuracy, label="BiLSTM-100", dev_accuracy=0.75, hyperparameters={"hidden": 50, "epochs": 3})


class TestRunStoreWithDatabase:
    """Integration tests of the run store on an SQLite file"""

    @pytest.fixture
    def store_path(self, tmp_path: Path) -> Path:
        return tmp_path / "store" / RUN_STORE_FILENAME

    @pytest.fixture
    def session(self, store_path: Path) -> Generator[Session, None, None]:
        session = Session(open_run_store(store_path))
        yield session
        session.close()

    @pytest.fixture
    def run_repository(self, session: Session) -> RunRecordRepository:
        return RunRecordRepository(session)

    # pylint: disable=missing-function-docstring
    def test_open_creates_the_file(self, store_path: Path, session: Session):
        assert store_path.is_file()

    def test_record_run(self, run_repository: RunRecordRepository):
        record = run_repository.record_run("abc", make_run(1))
        assert record.id is not None
        assert record.config_hash == "abc"
        assert record.predictions == "[0, 2, 1, 1]"

    def test_completed_runs_round_trip(self, run_repository: RunRecordRepository):
        runs = [make_run(seed, accuracy=seed / 10) for seed in (3, 1, 2)]
        for run in runs:
            run_repository.record_run("abc", run)
        restored = run_repository.completed_runs("abc")
        assert restored == runs
        assert [run.hyperparameters for run in restored] == [{"hidden": 50, "epochs": 3}] * 3

    def test_completed_runs_are_keyed_by_hash(self, run_repository: RunRecordRepository):
        run_repository.record_run("abc", make_run(1))
        run_repository.record_run("def", make_run(2))
        assert [run.seed for run in run_repository.completed_runs("def")] == [2]
        assert run_repository.completed_runs("unknown") == []

    def test_runs_survive_reopening(self, store_path: Path, run_repository: RunRecordRepository):
        run_repository.record_run("abc", make_run(1))
        with Session(open_run_store(store_path)) as session:
            assert [run.seed for run in RunRecordRepository(session).completed_runs("abc")] == [1]

    def test_find(self, run_repository: RunRecordRepository):
        run_repository.record_run("abc", make_run(1, dataset="opener"))
        run_repository.record_run("abc", make_run(2, dataset="semeval"))
        assert [record.seed for record in run_repository.find(config_hash="abc", dataset="semeval")] == [2]

    def test_find_unknown_attribute(self, run_repository: RunRecordRepository):
        with pytest.raises(RecordDoesNotPossessAttributeException):
            run_repository.find(colour="red")

    def test_delete_batch_keeps_other_hashes(self, run_repository: RunRecordRepository):
        for seed in (1, 2):
            run_repository.record_run("abc", make_run(seed))
        run_repository.record_run("def", make_run(3))

        run_repository.delete_batch(run_repository.find(config_hash="abc"))
        assert run_repository.completed_runs("abc") == []
        assert [run.seed for run in run_repository.completed_runs("def")] == [3]

    def test_failed_insert_is_rolled_back(self, run_repository: RunRecordRepository):
        stored = run_repository.record_run("abc", make_run(1))
        duplicate = RunRecord(id=stored.id, config_hash="abc", kind="bow", dim=50, dataset="semeval", seed=9, label="BOW", accuracy=0.5, predictions="[]")
        with pytest.raises(CouldNotStoreRunException):
            run_repository.create(duplicate)
        assert [run.seed for run in run_repository.completed_runs("abc")] == [1]
