from dataclasses import dataclass
from typing import Dict, Sequence, Tuple, Union

import numpy as np
from scipy.special import gammaincc

from sentibench.data import DatasetSplit
from sentibench.exceptions import DegenerateContingencyTableException, MetricInputException
from sentibench.logger import sentibench_logger

EMOTICONS: Tuple[str, ...] = (":)", ":(", ":-)", ":-(", ":D", "=)")

TextSource = Union[DatasetSplit, Sequence[str]]


def _texts(source: TextSource) -> Sequence[str]:
    return source.texts() if isinstance(source, DatasetSplit) else source


def emoticon_counts(source: TextSource, emoticons: Sequence[str] = EMOTICONS) -> Dict[str, int]:
    """Counts substring occurrences of every emoticon in the raw texts of all partitions

    Args:
        source (TextSource): A dataset split or a list of raw texts
        emoticons (Sequence[str]): The categories to count

    Returns:
        Dict[str, int]: Occurrences per emoticon, in category order
    """
    texts = _texts(source)
    return {emoticon: sum(text.count(emoticon) for text in texts) for emoticon in emoticons}


def chi2_tail(statistic: float, df: int) -> float:
    """Upper tail probability of the chi-squared distribution, via the regularized upper incomplete gamma function"""
    if df < 1:
        raise MetricInputException(f"Degrees of freedom must be >= 1, got {df}")
    if statistic <= 0.0:
        return 1.0
    return float(gammaincc(df / 2.0, statistic / 2.0))


@dataclass(frozen=True)
class ChiSquaredResult:
    """Pearson test of homogeneity of two emoticon distributions"""

    statistic: float
    p_value: float
    df: int
    counts_a: Dict[str, int]
    counts_b: Dict[str, int]

    def to_dict(self) -> Dict[str, object]:
        return {"chi2": self.statistic, "p": self.p_value, "df": self.df, "counts_a": dict(self.counts_a), "counts_b": dict(self.counts_b)}


def chi_squared_from_counts(counts_a: Dict[str, int], counts_b: Dict[str, int]) -> ChiSquaredResult:
    """Pearson chi-squared statistic of the 2 x k contingency table of two count vectors

    Args:
        counts_a (Dict[str, int]): Counts per category of the first dataset
        counts_b (Dict[str, int]): Counts per category of the second dataset, same categories

    Returns:
        ChiSquaredResult: The statistic, its upper-tail p-value and df = (kept categories - 1)

    Raises:
        DegenerateContingencyTableException: If a dataset has no occurrence at all or fewer than two categories occur

    Notes:
        - Categories absent from both datasets carry no information and are dropped, lowering df.
    """
    if list(counts_a) != list(counts_b):
        raise MetricInputException("Both count vectors must cover the same categories in the same order")
    table = np.array([list(counts_a.values()), list(counts_b.values())], dtype=np.float64)
    counts = {"a": dict(counts_a), "b": dict(counts_b)}
    if np.any(table.sum(axis=1) == 0):
        raise DegenerateContingencyTableException("Degenerate contingency table, a dataset has no emoticon", counts)
    table = table[:, table.sum(axis=0) > 0]
    if table.shape[1] < 2:
        raise DegenerateContingencyTableException("Degenerate contingency table, fewer than two emoticon categories occur", counts)

    expected = np.outer(table.sum(axis=1), table.sum(axis=0)) / table.sum()
    statistic = float(np.sum((table - expected) ** 2 / expected))
    df = table.shape[1] - 1
    return ChiSquaredResult(statistic=statistic, p_value=chi2_tail(statistic, df), df=df, counts_a=dict(counts_a), counts_b=dict(counts_b))


def chi_squared_emoticons(dataset_a: TextSource, dataset_b: TextSource) -> ChiSquaredResult:
    """Tests whether two datasets use the six emoticons with the same relative frequencies

    Args:
        dataset_a (TextSource): First dataset (all partitions) or raw texts
        dataset_b (TextSource): Second dataset (all partitions) or raw texts

    Returns:
        ChiSquaredResult: Symmetric in its arguments up to the order of the count vectors

    Raises:
        DegenerateContingencyTableException: If a dataset contains no emoticon
    """
    result = chi_squared_from_counts(emoticon_counts(dataset_a), emoticon_counts(dataset_b))
    sentibench_logger.info("Emoticon chi-squared test succeeded", chi2=result.statistic, df=result.df, p=result.p_value)
    return result
