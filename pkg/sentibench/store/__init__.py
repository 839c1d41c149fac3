from .base_repository import BaseRepository
from .entity import RunRecord, SQLModelEntity
from .run_repository import RUN_STORE_FILENAME, RunRecordRepository, open_run_store

__all__ = ["BaseRepository", "RUN_STORE_FILENAME", "RunRecord", "RunRecordRepository", "SQLModelEntity", "open_run_store"]
