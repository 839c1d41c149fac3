from typing import Mapping, Sequence, Tuple

import numpy as np

from sentibench.data import BENCHMARK_DATASET_NAMES
from sentibench.exceptions import MetricInputException


def _aligned(gold: Sequence[int], pred: Sequence[int]) -> Tuple[np.ndarray, np.ndarray]:
    gold_array = np.asarray(gold, dtype=np.int64)
    pred_array = np.asarray(pred, dtype=np.int64)
    if gold_array.ndim != 1 or gold_array.shape != pred_array.shape:
        raise MetricInputException(f"Gold ({gold_array.shape}) and predictions ({pred_array.shape}) must be aligned label vectors")
    if len(gold_array) == 0:
        raise MetricInputException("Cannot evaluate an empty prediction vector")
    return gold_array, pred_array


def accuracy(gold: Sequence[int], pred: Sequence[int]) -> float:
    """Fraction of positions where the prediction equals the gold label

    Raises:
        MetricInputException: If the vectors are empty or differ in length
    """
    gold_array, pred_array = _aligned(gold, pred)
    return float(np.mean(gold_array == pred_array))


def macro_average(per_dataset: Mapping[str, float], datasets: Sequence[str] = BENCHMARK_DATASET_NAMES) -> float:
    """Unweighted mean of the accuracies of the given datasets

    Args:
        per_dataset (Mapping[str, float]): Accuracy by dataset name
        datasets (Sequence[str]): The datasets that must all be present. Defaults to the six benchmarks.

    Returns:
        float: The arithmetic mean, in the unit of the inputs

    Raises:
        MetricInputException: If a dataset is missing
    """
    missing = [name for name in datasets if name not in per_dataset]
    if missing or not datasets:
        raise MetricInputException(f"Macro-average needs all of {list(datasets)}, missing {missing}")
    return float(np.mean([per_dataset[name] for name in datasets]))


def confusion_matrix(gold: Sequence[int], pred: Sequence[int], num_classes: int) -> np.ndarray:
    """Counts gold class i predicted as class j at entry (i, j)

    Raises:
        MetricInputException: If a label is outside of [0, num_classes)
    """
    gold_array, pred_array = _aligned(gold, pred)
    if min(gold_array.min(), pred_array.min()) < 0 or max(gold_array.max(), pred_array.max()) >= num_classes:
        raise MetricInputException(f"Labels must lie in [0, {num_classes})")
    matrix = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(matrix, (gold_array, pred_array), 1)
    return matrix


def per_class_accuracy(matrix: np.ndarray) -> np.ndarray:
    """Recall of every gold class; NaN for classes without gold examples"""
    totals = matrix.sum(axis=1)
    return np.where(totals > 0, np.diag(matrix) / np.maximum(totals, 1), np.nan)


def mean_and_std(values: Sequence[float]) -> Tuple[float, float]:
    """Mean and sample (n - 1) standard deviation; the deviation of a single value is 0"""
    array = np.asarray(values, dtype=np.float64)
    if len(array) == 0:
        raise MetricInputException("Cannot summarize an empty list of values")
    return float(array.mean()), float(array.std(ddof=1)) if len(array) > 1 else 0.0
