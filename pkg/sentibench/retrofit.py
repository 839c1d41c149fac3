from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Tuple, Union

import numpy as np

from sentibench.data import Vocabulary
from sentibench.embeddings import EmbeddingMatrix
from sentibench.exceptions import InvalidHyperparameterException, LexiconFormatException, ShapeMismatchException, VocabularyMismatchException
from sentibench.logger import sentibench_logger

INVERSE_DEGREE = "inverse_degree"


@dataclass(frozen=True)
class LexiconGraph:
    """Undirected word graph without self-loops; neighbours are kept sorted"""

    adjacency: Mapping[str, Tuple[str, ...]]

    @classmethod
    def from_pairs(cls, pairs: Iterable[Tuple[str, str]]) -> "LexiconGraph":
        """Builds a symmetric, deduplicated graph from word pairs, dropping self-loops"""
        neighbours: Dict[str, set] = {}
        for first, second in pairs:
            if first == second:
                continue
            neighbours.setdefault(first, set()).add(second)
            neighbours.setdefault(second, set()).add(first)
        return cls(adjacency={word: tuple(sorted(words)) for word, words in sorted(neighbours.items())})

    @property
    def vertices(self) -> FrozenSet[str]:
        """Words with at least one edge"""
        return frozenset(self.adjacency)

    @property
    def edges(self) -> FrozenSet[Tuple[str, str]]:
        """Unordered edges as lexicographically ordered pairs"""
        return frozenset((word, neighbour) for word, neighbours in self.adjacency.items() for neighbour in neighbours if word < neighbour)

    def degree(self, word: str) -> int:
        """Number of neighbours of a word"""
        return len(self.adjacency.get(word, ()))

    def neighbours(self, word: str) -> Tuple[str, ...]:
        """Sorted neighbours of a word"""
        return self.adjacency.get(word, ())


@dataclass(frozen=True)
class RetrofitConfig:
    """Weights and sweep count of the retrofitting objective

    Notes:
        - beta is either a positive constant or "inverse_degree" (beta_ij = 1 / degree(i)).
        - Each undirected edge carries the symmetrized weight (beta_ij + beta_ji) / 2, which
          equals beta_ij for constant weights and keeps every update an exact minimizer.
    """

    iterations: int = 10
    alpha: float = 1.0
    alpha_overrides: Mapping[str, float] = field(default_factory=dict)
    beta: Union[float, str] = INVERSE_DEGREE

    def __post_init__(self):
        if self.iterations < 0:
            raise InvalidHyperparameterException(f"iterations must be >= 0, got {self.iterations}")
        if self.alpha <= 0 or any(value <= 0 for value in self.alpha_overrides.values()):
            raise InvalidHyperparameterException("alpha weights must be > 0")
        if isinstance(self.beta, str):
            if self.beta != INVERSE_DEGREE:
                raise InvalidHyperparameterException(f"Unknown beta rule '{self.beta}'")
        elif self.beta <= 0:
            raise InvalidHyperparameterException(f"beta must be > 0, got {self.beta}")

    def alpha_for(self, word: str) -> float:
        """Anchor weight of a word"""
        return self.alpha_overrides.get(word, self.alpha)

    def edge_weight(self, graph: LexiconGraph, first: str, second: str) -> float:
        """Symmetrized weight of the edge between two words"""
        if isinstance(self.beta, str):
            return 0.5 * (1.0 / graph.degree(first) + 1.0 / graph.degree(second))
        return float(self.beta)


def load_lexicon(path: Union[str, Path], vocab: Vocabulary) -> LexiconGraph:
    """Reads a lexicon and restricts it to pairs whose words are both in the vocabulary

    Args:
        path (Union[str, Path]): One entry per line: "word1<TAB>word2", "word1 word2", or a head word followed by several neighbours
        vocab (Vocabulary): The vocabulary to restrict to

    Returns:
        LexiconGraph: The symmetric, deduplicated graph without self-loops

    Raises:
        LexiconFormatException: If a line is not valid UTF-8 or names a single word
    """
    path = Path(path)
    pairs: List[Tuple[str, str]] = []
    dropped = 0
    with path.open("rb") as handle:
        for line_number, raw_line in enumerate(handle, start=1):
            try:
                line = raw_line.decode("utf-8")
            except UnicodeDecodeError as decode_error:
                raise LexiconFormatException(f"{path}:{line_number}: line is not valid UTF-8") from decode_error
            words = line.lower().split()
            if not words:
                continue
            if len(words) < 2:
                raise LexiconFormatException(f"{path}:{line_number}: expected at least two words, found '{line.strip()}'")
            head = words[0]
            for neighbour in words[1:]:
                if head in vocab and neighbour in vocab:
                    pairs.append((head, neighbour))
                else:
                    dropped += 1

    graph = LexiconGraph.from_pairs(pairs)
    sentibench_logger.info("Loading lexicon succeeded", path=str(path), vertices=len(graph.vertices), edges=len(graph.edges), dropped_pairs=dropped)
    return graph


def retrofit_objective_terms(q: np.ndarray, q_hat: np.ndarray, vocab: Vocabulary, graph: LexiconGraph, config: Optional[RetrofitConfig] = None) -> Tuple[float, float]:
    """Returns the anchor term and the edge term of the retrofitting objective separately"""
    config = config if config is not None else RetrofitConfig()
    if q.shape != q_hat.shape:
        raise ShapeMismatchException(f"Q has shape {q.shape} but Q_hat has shape {q_hat.shape}")
    if q.shape[0] != len(vocab):
        raise ShapeMismatchException(f"Q has {q.shape[0]} rows for a vocabulary of {len(vocab)} words")

    alphas = np.array([config.alpha_for(word) for word in vocab.words])
    anchor = float(np.sum(alphas * np.sum((q - q_hat) ** 2, axis=1)))
    edge = 0.0
    for first, second in sorted(graph.edges):
        i, j = vocab.index(first), vocab.index(second)
        if i is None or j is None:
            raise VocabularyMismatchException(f"Edge ({first}, {second}) is not covered by the vocabulary")
        edge += config.edge_weight(graph, first, second) * float(np.sum((q[i] - q[j]) ** 2))
    return anchor, edge


def retrofit_objective(q: np.ndarray, q_hat: np.ndarray, vocab: Vocabulary, graph: LexiconGraph, config: Optional[RetrofitConfig] = None) -> float:
    """Evaluates sum_i alpha_i |q_i - q_hat_i|^2 + sum over edges beta_ij |q_i - q_j|^2

    Args:
        q (np.ndarray): Current vectors, one row per vocabulary word
        q_hat (np.ndarray): Original vectors, same shape as q
        vocab (Vocabulary): Row labels of q and q_hat
        graph (LexiconGraph): The lexicon graph; every edge counts once
        config (Optional[RetrofitConfig]): The weights

    Returns:
        float: The non-negative objective value

    Raises:
        ShapeMismatchException: If q and q_hat differ in shape
    """
    anchor, edge = retrofit_objective_terms(q, q_hat, vocab, graph, config)
    return anchor + edge


@dataclass
class Retrofitter:
    """Gauss-Seidel minimization of the retrofitting objective

    Notes:
        - Vertices are swept in ascending word order, neighbours are summed in ascending word
          order, so results do not depend on the row order of the embedding matrix.
        - objective_history holds the objective before the first sweep and after each sweep.
    """

    config: RetrofitConfig = field(default_factory=RetrofitConfig)
    objective_history: List[float] = field(default_factory=list, init=False)

    def fit(self, matrix: EmbeddingMatrix, graph: LexiconGraph) -> EmbeddingMatrix:
        """Retrofits the vectors of an embedding matrix to a lexicon graph

        Args:
            matrix (EmbeddingMatrix): The original vectors
            graph (LexiconGraph): The lexicon, restricted to the matrix vocabulary

        Returns:
            EmbeddingMatrix: The refined vectors; words without edges are unchanged

        Raises:
            VocabularyMismatchException: If the graph names a word the matrix does not know
        """
        unknown = sorted(word for word in graph.vertices if word not in matrix.vocab)
        if unknown:
            raise VocabularyMismatchException(f"Lexicon words missing from the embedding vocabulary: {unknown[:10]}")

        q_hat = np.array(matrix.matrix)
        q = q_hat.copy()
        schedule = []
        for word in sorted(graph.vertices):
            neighbours = graph.neighbours(word)
            schedule.append(
                (
                    matrix.vocab.index(word),
                    self.config.alpha_for(word),
                    np.array([matrix.vocab.index(neighbour) for neighbour in neighbours], dtype=np.int64),
                    np.array([self.config.edge_weight(graph, word, neighbour) for neighbour in neighbours]),
                )
            )

        self.objective_history = [retrofit_objective(q, q_hat, matrix.vocab, graph, self.config)]
        sentibench_logger.info("Retrofitting", words=len(matrix.vocab), vertices=len(schedule), iterations=self.config.iterations)
        for sweep in range(self.config.iterations):
            for row, alpha, neighbour_rows, weights in schedule:
                q[row] = (alpha * q_hat[row] + weights @ q[neighbour_rows]) / (alpha + weights.sum())
            self.objective_history.append(retrofit_objective(q, q_hat, matrix.vocab, graph, self.config))
            sentibench_logger.debug("Retrofitting sweep finished", sweep=sweep + 1, objective=self.objective_history[-1])

        sentibench_logger.info("Retrofitting succeeded", objective=self.objective_history[-1])
        return EmbeddingMatrix(vocab=matrix.vocab, matrix=q, oov_seed=matrix.oov_seed)


def retrofit_embeddings(matrix: EmbeddingMatrix, graph: LexiconGraph, config: Optional[RetrofitConfig] = None) -> EmbeddingMatrix:
    """Runs config.iterations retrofitting sweeps over an embedding matrix"""
    return Retrofitter(config=config if config is not None else RetrofitConfig()).fit(matrix, graph)
