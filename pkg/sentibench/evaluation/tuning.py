from dataclasses import replace
from typing import Callable, List, Optional, Sequence, Tuple

from sentibench.data import DatasetSplit
from sentibench.embeddings import EmbeddingMatrix
from sentibench.logger import sentibench_logger
from sentibench.models import ModelSpec, train_sentiment_model

DevEvaluator = Callable[[ModelSpec, DatasetSplit], Sequence[float]]


def dev_curve_evaluator(embeddings: Optional[EmbeddingMatrix] = None) -> DevEvaluator:
    """Evaluator that trains the spec and returns its dev accuracies

    Notes:
        - Neural models yield one accuracy per epoch, linear models one per penalty tried.
    """

    def _evaluate(spec: ModelSpec, data: DatasetSplit) -> Sequence[float]:
        return list(train_sentiment_model(spec, data, embeddings).dev_curve)

    return _evaluate


def _tune_neural(spec: ModelSpec, data: DatasetSplit, evaluator: DevEvaluator) -> ModelSpec:
    candidates: List[Tuple[float, int, int]] = []
    for hidden in spec.hidden_grid:
        curve = evaluator(replace(spec, hidden=hidden, epochs=None), data)
        sentibench_logger.debug("Tuning candidate evaluated", kind=spec.kind.value, hidden=hidden, epochs=len(curve), best_dev_accuracy=max(curve, default=None))
        candidates.extend((-float(accuracy), hidden, epoch) for epoch, accuracy in enumerate(curve, start=1))
    if not candidates:
        return replace(spec, hidden=min(spec.hidden_grid), epochs=0)
    _, hidden, epochs = min(candidates)
    return replace(spec, hidden=hidden, epochs=epochs)


def _tune_linear(spec: ModelSpec, data: DatasetSplit, evaluator: DevEvaluator) -> ModelSpec:
    best_l2, best_accuracy = spec.l2_grid[0], -1.0
    for l2 in spec.l2_grid:
        curve = evaluator(replace(spec, l2=l2), data)
        accuracy = float(curve[-1]) if curve else -1.0
        if accuracy > best_accuracy:
            best_l2, best_accuracy = l2, accuracy
    return replace(spec, l2=best_l2)


def tune_hyperparameters(spec: ModelSpec, data: DatasetSplit, evaluator: Optional[DevEvaluator] = None, embeddings: Optional[EmbeddingMatrix] = None) -> ModelSpec:
    """Grid-searches the tunable hyperparameters of a spec on the dev partition

    Args:
        spec (ModelSpec): The spec; its hidden_grid or l2_grid defines the search space
        data (DatasetSplit): The dataset whose dev partition is scored
        evaluator (Optional[DevEvaluator]): Returns the dev accuracy curve of a concrete spec. Defaults to training the spec.
        embeddings (Optional[EmbeddingMatrix]): Input vectors for the default evaluator

    Returns:
        ModelSpec: The spec with the selected values filled in

    Notes:
        - Neural kinds search hidden size x epoch count, each hidden size trained once with early stopping; ties go to the smaller hidden size, then fewer epochs.
        - Linear kinds search the L2 penalty; ties go to the earlier grid entry.
    """
    evaluator = evaluator if evaluator is not None else dev_curve_evaluator(embeddings)
    sentibench_logger.info("Tuning hyperparameters", kind=spec.kind.value, dim=spec.dim, dataset=data.name)
    tuned = _tune_neural(spec, data, evaluator) if spec.kind.is_neural else _tune_linear(spec, data, evaluator)
    sentibench_logger.info("Tuning hyperparameters succeeded", kind=spec.kind.value, dim=spec.dim, dataset=data.name, hidden=tuned.hidden, epochs=tuned.epochs, l2=tuned.l2)
    return tuned
