from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple

from sentibench.exceptions import MetricInputException


@dataclass(frozen=True)
class RunResult:
    """Test-set outcome of one trained model"""

    kind: str
    dim: int
    dataset: str
    seed: int
    predictions: Tuple[int, ...]
    accuracy: float
    label: str = ""
    dev_accuracy: Optional[float] = None
    hyperparameters: Dict[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not 0.0 <= self.accuracy <= 1.0:
            raise MetricInputException(f"Accuracy {self.accuracy} is outside of [0, 1]")
        object.__setattr__(self, "predictions", tuple(int(label) for label in self.predictions))

    @property
    def cell(self) -> Tuple[str, int, str]:
        """The (kind, dim, dataset) cell the run belongs to"""
        return self.kind, self.dim, self.dataset

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "dim": self.dim,
            "dataset": self.dataset,
            "seed": self.seed,
            "label": self.label,
            "accuracy": self.accuracy,
            "dev_accuracy": self.dev_accuracy,
            "hyperparameters": dict(self.hyperparameters),
            "predictions": list(self.predictions),
        }


@dataclass(frozen=True)
class CellFailure:
    """A (model, dataset) cell whose training raised"""

    kind: str
    dim: int
    dataset: str
    label: str
    error: str

    @property
    def cell(self) -> Tuple[str, int, str]:
        return self.kind, self.dim, self.dataset

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind, "dim": self.dim, "dataset": self.dataset, "label": self.label, "error": self.error}
