"""Paired approximate randomization testing over system predictions

The statistic is the absolute difference in the number of correct predictions (equivalently, in
accuracy). A shuffle swaps the two systems' predictions at each position independently with
probability one half; only positions where exactly one system is correct can change the statistic.
"""
from dataclasses import dataclass, field
from itertools import combinations
from math import comb
from typing import Dict, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from sentibench.evaluation.results import RunResult
from sentibench.exceptions import MetricInputException, RunCountMismatchException
from sentibench.logger import sentibench_logger

SIGNIFICANCE_THRESHOLD = 0.01
DEFAULT_ITERATIONS = 10000
_CHUNK_ELEMENTS = 4_000_000

Predictions = Union[Sequence[int], np.ndarray, RunResult]


def _predictions(run: Predictions) -> np.ndarray:
    return np.asarray(run.predictions if isinstance(run, RunResult) else run, dtype=np.int64)


def _signed_differences(pred_a: Predictions, pred_b: Predictions, gold: Sequence[int]) -> np.ndarray:
    a, b, gold_array = _predictions(pred_a), _predictions(pred_b), np.asarray(gold, dtype=np.int64)
    if not a.shape == b.shape == gold_array.shape or a.ndim != 1:
        raise MetricInputException(f"Predictions {a.shape}, {b.shape} and gold {gold_array.shape} must have equal lengths")
    if len(gold_array) == 0:
        raise MetricInputException("Cannot test empty prediction vectors")
    differences = (a == gold_array).astype(np.int64) - (b == gold_array).astype(np.int64)
    return differences[differences != 0]


def approx_rand_test(pred_a: Predictions, pred_b: Predictions, gold: Sequence[int], iterations: int = DEFAULT_ITERATIONS, rng: Optional[np.random.Generator] = None) -> float:
    """Approximate randomization p-value of the accuracy difference of two systems

    Args:
        pred_a (Predictions): Predictions of system A
        pred_b (Predictions): Predictions of system B
        gold (Sequence[int]): Gold labels
        iterations (int): Number of random shuffles
        rng (Optional[np.random.Generator]): Source of the shuffles. Defaults to a generator seeded with 1.

    Returns:
        float: (number of shuffles with a statistic >= the observed one + 1) / (iterations + 1), in [1 / (iterations + 1), 1]

    Raises:
        MetricInputException: If the vectors differ in length or are empty
    """
    if iterations < 1:
        raise MetricInputException(f"iterations must be >= 1, got {iterations}")
    rng = rng if rng is not None else np.random.default_rng(1)
    differences = _signed_differences(pred_a, pred_b, gold)
    observed = abs(int(differences.sum()))

    at_least_observed = 0
    if len(differences) == 0:
        at_least_observed = iterations
    else:
        chunk = max(1, _CHUNK_ELEMENTS // len(differences))
        for start in range(0, iterations, chunk):
            size = min(chunk, iterations - start)
            swapped = rng.random((size, len(differences))) < 0.5
            statistics = np.abs(np.where(swapped, -differences, differences).sum(axis=1))
            at_least_observed += int(np.count_nonzero(statistics >= observed))
    return (at_least_observed + 1) / (iterations + 1)


def exact_rand_test(pred_a: Predictions, pred_b: Predictions, gold: Sequence[int]) -> float:
    """Exact randomization p-value over all 2^n swap patterns, without smoothing

    Notes:
        - Patterns are counted combinatorially from the numbers of positions where only A or only
          B is correct, so the cost does not grow with 2^n.
    """
    differences = _signed_differences(pred_a, pred_b, gold)
    only_a = int(np.count_nonzero(differences > 0))
    only_b = int(np.count_nonzero(differences < 0))
    observed = abs(only_a - only_b)
    favourable = 0
    for swapped_a in range(only_a + 1):
        for swapped_b in range(only_b + 1):
            if abs((only_a - 2 * swapped_a) - (only_b - 2 * swapped_b)) >= observed:
                favourable += comb(only_a, swapped_a) * comb(only_b, swapped_b)
    return favourable / 2 ** (only_a + only_b)


def majority_verdict(p_values: Sequence[float], threshold: float = SIGNIFICANCE_THRESHOLD, majority: Optional[int] = None) -> bool:
    """Whether at least `majority` p-values fall below the threshold

    Args:
        p_values (Sequence[float]): One p-value per run pair
        threshold (float): Per-pair significance threshold
        majority (Optional[int]): Required number of significant pairs. Defaults to a strict majority (3 of 5).
    """
    majority = majority if majority is not None else len(p_values) // 2 + 1
    return sum(1 for p_value in p_values if p_value < threshold) >= majority


@dataclass(frozen=True)
class PairSignificance:
    """Per-run p-values of one system pair and the resulting verdict"""

    p_values: Tuple[float, ...]
    verdict: bool

    def to_dict(self) -> Dict[str, object]:
        return {"p_values": list(self.p_values), "verdict": self.verdict}


def runs_significance(
    runs_a: Sequence[Predictions],
    runs_b: Sequence[Predictions],
    gold: Sequence[int],
    iterations: int = DEFAULT_ITERATIONS,
    seed: int = 1,
    threshold: float = SIGNIFICANCE_THRESHOLD,
) -> PairSignificance:
    """Pairs run i of A with run i of B and applies the majority-of-runs rule

    Args:
        runs_a (Sequence[Predictions]): Runs of system A, in seed order
        runs_b (Sequence[Predictions]): Runs of system B, in seed order
        gold (Sequence[int]): Gold labels of the shared test set
        iterations (int): Shuffles per run pair
        seed (int): Seed of the per-pair shuffle generators
        threshold (float): Per-pair significance threshold

    Returns:
        PairSignificance: The p-values and whether a strict majority of them is below the threshold

    Raises:
        RunCountMismatchException: If the run counts differ and neither system has a single run

    Notes:
        - A single-run system is paired with every run of the other system.
    """
    if len(runs_a) != len(runs_b):
        if len(runs_a) == 1:
            runs_a = list(runs_a) * len(runs_b)
        elif len(runs_b) == 1:
            runs_b = list(runs_b) * len(runs_a)
        else:
            raise RunCountMismatchException(f"Cannot pair {len(runs_a)} runs with {len(runs_b)} runs")
    if not runs_a:
        raise RunCountMismatchException("At least one run per system is required")

    p_values = tuple(approx_rand_test(run_a, run_b, gold, iterations, np.random.default_rng([seed, index])) for index, (run_a, run_b) in enumerate(zip(runs_a, runs_b)))
    return PairSignificance(p_values=p_values, verdict=majority_verdict(p_values, threshold))


@dataclass
class SignificanceMatrix:
    """Pairwise significance of the systems evaluated on one dataset"""

    dataset: str
    systems: Tuple[str, ...]
    entries: Dict[Tuple[str, str], PairSignificance] = field(default_factory=dict)

    def get(self, system_a: str, system_b: str) -> PairSignificance:
        """Returns the entry of a pair in either order"""
        if (system_a, system_b) in self.entries:
            return self.entries[(system_a, system_b)]
        return self.entries[(system_b, system_a)]

    def to_dict(self) -> Dict[str, object]:
        return {"dataset": self.dataset, "systems": list(self.systems), "pairs": [{"a": a, "b": b, **entry.to_dict()} for (a, b), entry in sorted(self.entries.items())]}


def significance_matrix(dataset: str, runs_by_system: Mapping[str, Sequence[RunResult]], gold: Sequence[int], iterations: int = DEFAULT_ITERATIONS, seed: int = 1) -> SignificanceMatrix:
    """Tests every pair of systems, in the given system order"""
    systems = tuple(runs_by_system)
    matrix = SignificanceMatrix(dataset=dataset, systems=systems)
    sentibench_logger.info("Testing significance", dataset=dataset, systems=len(systems), iterations=iterations)
    for system_a, system_b in combinations(systems, 2):
        matrix.entries[(system_a, system_b)] = runs_significance(runs_by_system[system_a], runs_by_system[system_b], gold, iterations, seed)
    sentibench_logger.info("Testing significance succeeded", dataset=dataset, pairs=len(matrix.entries))
    return matrix
