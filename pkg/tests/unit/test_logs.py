import json
from typing import Any, Dict, Generator, Literal
from unittest.mock import MagicMock, patch

import pytest
from sqlmodel import col
from structlog import WriteLogger

from sentibench.evaluation.results import RunResult
from sentibench.store import BaseRepository, RunRecord, RunRecordRepository


def payload(entity: RunRecord) -> Dict[str, Any]:
    dump = getattr(entity, "model_dump", None)
    return dump() if dump is not None else entity.dict()


def get_log_entry(caplog, message_beginning: str) -> dict:
    """Helper Method. Return the log entry for a given message beginning."""
    for record in caplog.records:
        _json = json.loads(record.message)
        if _json.get("event", "").startswith(message_beginning):
            return _json
    raise ValueError(f"No log entry found for message beginning: {message_beginning}")


def check_attributes(values_to_check: dict, log_entry: dict, base_repository: BaseRepository) -> Literal[True]:
    """Helper Method. Test that the log entry contains the non-sensitive values and none of the sensitive ones."""
    for attribute_key, value in values_to_check.items():
        if attribute_key in [*base_repository.sensitive_attribute_keys, *base_repository._default_excluded_keys]:  # pylint: disable=protected-access
            assert attribute_key not in log_entry
        else:
            assert log_entry.get(attribute_key) == value
    return True


# pylint: disable=protected-access,missing-class-docstring,missing-function-docstring
class TestLogs:
    """Test the logging functionality of the repositories"""

    @pytest.fixture
    def base_repository(self) -> Generator[RunRecordRepository, None, None]:
        yield RunRecordRepository(MagicMock())

    @pytest.fixture
    def entity(self) -> RunRecord:
        return RunRecord(id=1, config_hash="abc", kind="lstm", dim=50, dataset="semeval", seed=1, label="LSTM-50", accuracy=0.5, predictions="[0, 1, 2, 1]")

    @pytest.fixture(autouse=True)
    def patch_get_batch(self, request, entity: RunRecord):
        """Patch get_batch to return the entity as no actual session is used"""
        if "disable_patch_get_batch" in request.keywords:
            yield
        else:
            with patch("sentibench.store.base_repository.BaseRepository.get_batch", return_value=[entity]) as mock_get_batch:
                yield mock_get_batch

    class TestClass:
        def test_set_logger(self):
            logger = WriteLogger()
            repository = RunRecordRepository(MagicMock(), logger=logger)
            assert repository.logger == logger

        def test_predictions_are_sensitive(self, base_repository: RunRecordRepository):
            assert base_repository.sensitive_attribute_keys == ["predictions"]

        def test_safe_kwargs(self, base_repository: RunRecordRepository, entity: RunRecord):
            safe = base_repository._safe_kwargs(**payload(entity))
            assert "predictions" not in safe
            assert safe["config_hash"] == "abc"
            assert safe["accuracy"] == 0.5

        def test_safe_kwargs_prefix(self, base_repository: RunRecordRepository):
            assert base_repository._safe_kwargs(prefix="kwarg_", seed=3, predictions="[]") == {"kwarg_seed": 3}

        def test_emit_operation_begin_log(self, caplog, base_repository: RunRecordRepository, entity: RunRecord):
            base_repository._emit_operation_begin_log("test_event", entities=[entity])
            log_entry = get_log_entry(caplog, "test_event")
            assert check_attributes(payload(entity), log_entry, base_repository)

        def test_emit_operation_begin_log_multiple_entities(self, caplog, base_repository: RunRecordRepository, entity: RunRecord):
            base_repository._emit_operation_begin_log("test_event", entities=[entity, entity])
            log_entry = get_log_entry(caplog, "test_event")
            assert len(log_entry["payload"]) == 2
            assert all("predictions" not in entry for entry in log_entry["payload"])

        def test_emit_operation_success_log_ids(self, caplog, base_repository: RunRecordRepository, entity: RunRecord):
            base_repository._emit_operation_success_log("test_event", entities=[entity, entity])
            log_entry = get_log_entry(caplog, "test_event")
            assert log_entry.get("event") == "test_event RunRecord succeeded"
            assert log_entry.get("entity_ids") == [entity.id, entity.id]

        def test_emit_log_silent_raise_exception(self, caplog, base_repository: RunRecordRepository):
            base_repository._emit_operation_begin_log("test_event", entities=["entity"])  # type: ignore
            assert get_log_entry(caplog, "Could not emit log for starting test_event RunRecord")

    class TestFind:
        def test_log_kwargs(self, base_repository: RunRecordRepository, caplog):
            base_repository.find(config_hash="abc")
            log_entry = get_log_entry(caplog=caplog, message_beginning="Finding")
            assert log_entry.get("event") == "Finding RunRecord"
            assert log_entry.get("kwarg_config_hash") == "abc"

        def test_completed_runs_logs_the_hash(self, base_repository: RunRecordRepository, caplog):
            runs = base_repository.completed_runs("abc")
            assert [run.predictions for run in runs] == [(0, 1, 2, 1)]
            assert get_log_entry(caplog=caplog, message_beginning="Finding").get("kwarg_config_hash") == "abc"

    class TestGetBatch:
        @pytest.mark.disable_patch_get_batch
        def test(self, base_repository: RunRecordRepository, entity: RunRecord, caplog):
            base_repository.get_batch([col(RunRecord.id) == entity.id])
            assert get_log_entry(caplog=caplog, message_beginning="Batch get").get("event") == "Batch get RunRecord"
            assert get_log_entry(caplog=caplog, message_beginning="Batch get RunRecord succeeded")

    class TestCreate:
        def test_log_entity_attributes(self, base_repository: RunRecordRepository, entity: RunRecord, caplog):
            values_to_check = payload(entity)
            base_repository.create(entity)
            log_entry = get_log_entry(caplog=caplog, message_beginning="Creating")
            assert log_entry.get("event") == "Creating RunRecord"
            assert check_attributes(values_to_check=values_to_check, log_entry=log_entry, base_repository=base_repository)

        def test_log_id(self, base_repository: RunRecordRepository, entity: RunRecord, caplog):
            base_repository.create(entity)
            log_entry = get_log_entry(caplog=caplog, message_beginning="Creating RunRecord succeeded")
            assert log_entry.get("entity_ids") == [entity.id]

        def test_record_run_hides_predictions(self, base_repository: RunRecordRepository, caplog):
            run = RunResult(kind="cnn", dim=100, dataset="opener", seed=2, predictions=(3, 1, 0), accuracy=1 / 3, label="CNN-100")
            base_repository.record_run("abc", run)
            log_entry = get_log_entry(caplog=caplog, message_beginning="Creating")
            assert log_entry.get("kind") == "cnn"
            assert log_entry.get("config_hash") == "abc"
            assert "predictions" not in log_entry

    class TestDeleteBatch:
        def test(self, base_repository: RunRecordRepository, entity: RunRecord, caplog):
            base_repository.delete_batch([entity])
            log_entry = get_log_entry(caplog=caplog, message_beginning="Batch deleting")
            assert check_attributes(values_to_check=payload(entity), log_entry=log_entry, base_repository=base_repository)
            assert get_log_entry(caplog=caplog, message_beginning="Batch deleting RunRecord succeeded").get("entity_ids") == [entity.id]
