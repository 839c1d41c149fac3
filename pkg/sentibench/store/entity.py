from typing import Optional

from sqlmodel import Field, SQLModel


class SQLModelEntity(SQLModel):
    """Base SQLModel Entity"""

    id: Optional[int] = Field(index=True, default=None, primary_key=True)


class RunRecord(SQLModelEntity, table=True):
    """One finished benchmark run, keyed by the hash of the configuration that produced it

    Notes:
        - predictions and hyperparameters hold JSON documents.
    """

    config_hash: str = Field(index=True)
    kind: str
    dim: int
    dataset: str
    seed: int
    label: str
    accuracy: float
    dev_accuracy: Optional[float] = None
    predictions: str
    hyperparameters: str = "{}"
