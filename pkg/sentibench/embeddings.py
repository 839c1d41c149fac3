import hashlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Union

import numpy as np

from sentibench.data import Vocabulary, build_vocabulary
from sentibench.exceptions import EmbeddingFormatException, InvalidHyperparameterException, ShapeMismatchException
from sentibench.logger import sentibench_logger

OOV_RANGE = 0.25


def oov_vector(word: str, dim: int, oov_seed: int = 0) -> np.ndarray:
    """Deterministic pseudo-random vector for an out-of-vocabulary word

    Args:
        word (str): The word
        dim (int): The vector dimensionality
        oov_seed (int): Seed shared by all words of one embedding matrix

    Returns:
        np.ndarray: Coordinates uniform in [-0.25, 0.25], identical for repeated calls
    """
    digest = hashlib.sha256(f"{oov_seed}\x00{word}".encode("utf-8")).digest()
    rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
    return rng.uniform(-OOV_RANGE, OOV_RANGE, size=dim)


@dataclass(frozen=True, eq=False)
class EmbeddingMatrix:
    """Vocabulary-indexed dense matrix; lookups of unknown words fall back to oov_vector"""

    vocab: Vocabulary
    matrix: np.ndarray
    oov_seed: int = 0

    def __post_init__(self):
        matrix = np.array(self.matrix, dtype=np.float64, copy=True)
        if matrix.ndim != 2 or matrix.shape[0] != len(self.vocab) or matrix.shape[1] < 1:
            raise ShapeMismatchException(f"Embedding matrix of shape {matrix.shape} does not match a vocabulary of {len(self.vocab)} words")
        if not np.all(np.isfinite(matrix)):
            raise EmbeddingFormatException("Embedding matrix contains non-finite values")
        matrix.flags.writeable = False
        object.__setattr__(self, "matrix", matrix)

    @property
    def dim(self) -> int:
        """Vector dimensionality"""
        return int(self.matrix.shape[1])

    def lookup(self, word: str) -> np.ndarray:
        """Returns the stored row of a word, or its deterministic OOV vector"""
        position = self.vocab.index(word)
        if position is None:
            return oov_vector(word, self.dim, self.oov_seed)
        return self.matrix[position]

    def lookup_many(self, tokens: Sequence[str]) -> np.ndarray:
        """Stacks the lookups of several tokens into a len(tokens) x dim array"""
        if not tokens:
            return np.zeros((0, self.dim))
        return np.stack([self.lookup(token) for token in tokens])


def lookup(matrix: EmbeddingMatrix, word: str) -> np.ndarray:
    """Returns the vector of a word under the matrix's OOV policy"""
    return matrix.lookup(word)


@dataclass(frozen=True)
class SkipgramConfig:
    """Hyperparameters of skip-gram training with negative sampling"""

    dim: int = 100
    window: int = 10
    negatives: int = 5
    subsample: float = 1e-4
    iterations: int = 5
    learning_rate: float = 0.025
    min_learning_rate: float = 0.0001
    min_count: int = 5
    seed: int = 1
    workers: int = 1

    def __post_init__(self):
        if self.dim < 1:
            raise InvalidHyperparameterException(f"dim must be >= 1, got {self.dim}")
        if self.window < 1:
            raise InvalidHyperparameterException(f"window must be >= 1, got {self.window}")
        if self.negatives < 1:
            raise InvalidHyperparameterException(f"negatives must be >= 1, got {self.negatives}")
        if not 0 < self.subsample <= 1:
            raise InvalidHyperparameterException(f"subsample must be in (0, 1], got {self.subsample}")
        if self.iterations < 0:
            raise InvalidHyperparameterException(f"iterations must be >= 0, got {self.iterations}")
        if self.workers < 1:
            raise InvalidHyperparameterException(f"workers must be >= 1, got {self.workers}")


def _sigmoid(values: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * values))


@dataclass
class SkipgramTrainer:
    """Skip-gram with negative sampling over token sequences

    Notes:
        - With workers > 1 sentences are sharded over threads that update the shared matrices
          without locking; the result is then no longer bitwise reproducible.
        - loss_history holds the negative-sampling loss of a fixed monitor batch before training
          and after every iteration.
    """

    config: SkipgramConfig = field(default_factory=SkipgramConfig)
    monitor_size: int = 1000
    loss_history: List[float] = field(default_factory=list, init=False)

    def fit(self, corpus: Iterable[Sequence[str]]) -> EmbeddingMatrix:
        """Trains embeddings for every word that reaches min_count

        Args:
            corpus (Iterable[Sequence[str]]): Token sequences

        Returns:
            EmbeddingMatrix: Input vectors of the retained words

        Raises:
            EmptyVocabularyException: If the corpus yields no word
        """
        config = self.config
        sentences = [list(tokens) for tokens in corpus]
        vocab = build_vocabulary(sentences, min_count=config.min_count)
        encoded = [np.array(vocab.indices(tokens), dtype=np.int64) for tokens in sentences]
        encoded = [ids for ids in encoded if len(ids) > 0]

        rng = np.random.default_rng(config.seed)
        input_vectors = (rng.random((len(vocab), config.dim)) - 0.5) / config.dim
        output_vectors = np.zeros((len(vocab), config.dim))

        counts = np.array(vocab.counts, dtype=np.float64)
        noise = counts**0.75
        self._noise_cdf = np.cumsum(noise / noise.sum())
        frequencies = counts / counts.sum()
        self._keep_probability = np.minimum(1.0, (np.sqrt(frequencies / config.subsample) + 1.0) * config.subsample / frequencies)

        monitor = self._monitor_batch(encoded, np.random.default_rng([config.seed, 1]))
        self.loss_history = [self._monitor_loss(input_vectors, output_vectors, monitor)]

        total_tokens = max(1, sum(len(ids) for ids in encoded)) * max(1, config.iterations)
        processed = 0
        sentibench_logger.info("Training skip-gram", words=len(vocab), dim=config.dim, iterations=config.iterations, workers=config.workers)
        for iteration in range(config.iterations):
            if config.workers == 1:
                processed = self._train_shard(encoded, input_vectors, output_vectors, rng, processed, total_tokens)
            else:
                shards = [encoded[worker :: config.workers] for worker in range(config.workers)]
                shard_rngs = [np.random.default_rng([config.seed, iteration, worker]) for worker in range(config.workers)]
                with ThreadPoolExecutor(max_workers=config.workers) as executor:
                    results = list(executor.map(lambda args: self._train_shard(args[0], input_vectors, output_vectors, args[1], processed, total_tokens), zip(shards, shard_rngs)))
                processed = processed + sum(result - processed for result in results)
            self.loss_history.append(self._monitor_loss(input_vectors, output_vectors, monitor))
            sentibench_logger.debug("Skip-gram iteration finished", iteration=iteration + 1, monitor_loss=self.loss_history[-1])

        if not np.all(np.isfinite(input_vectors)):
            raise EmbeddingFormatException("Skip-gram training produced non-finite vectors")
        sentibench_logger.info("Training skip-gram succeeded", words=len(vocab), monitor_loss=self.loss_history[-1])
        return EmbeddingMatrix(vocab=vocab, matrix=input_vectors, oov_seed=config.seed)

    def _sample_negatives(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return np.searchsorted(self._noise_cdf, rng.random(size), side="right").clip(max=len(self._noise_cdf) - 1)

    def _train_shard(self, sentences: List[np.ndarray], input_vectors: np.ndarray, output_vectors: np.ndarray, rng: np.random.Generator, processed: int, total_tokens: int) -> int:
        config = self.config
        for ids in sentences:
            kept = ids[rng.random(len(ids)) < self._keep_probability[ids]]
            progress = processed / total_tokens
            learning_rate = max(config.min_learning_rate, config.learning_rate - (config.learning_rate - config.min_learning_rate) * progress)
            processed += len(ids)
            for position, center in enumerate(kept):
                reduced = int(rng.integers(1, config.window + 1))
                context = np.concatenate([kept[max(0, position - reduced) : position], kept[position + 1 : position + 1 + reduced]])
                if len(context) == 0:
                    continue
                negatives = self._sample_negatives(rng, len(context) * config.negatives)
                targets = np.concatenate([context, negatives])
                labels = np.concatenate([np.ones(len(context)), np.zeros(len(negatives))])

                center_vector = input_vectors[center].copy()
                scores = _sigmoid(output_vectors[targets] @ center_vector)
                gradient = (labels - scores) * learning_rate
                input_vectors[center] += gradient @ output_vectors[targets]
                np.add.at(output_vectors, targets, np.outer(gradient, center_vector))
        return processed

    def _monitor_batch(self, sentences: List[np.ndarray], rng: np.random.Generator) -> Optional[tuple]:
        pairs = []
        for ids in sentences:
            for position in range(len(ids)):
                for offset in range(1, self.config.window + 1):
                    if position + offset < len(ids):
                        pairs.append((ids[position], ids[position + offset]))
                if len(pairs) >= self.monitor_size:
                    break
            if len(pairs) >= self.monitor_size:
                break
        if not pairs:
            return None
        centers, contexts = (np.array(column, dtype=np.int64) for column in zip(*pairs[: self.monitor_size]))
        negatives = self._sample_negatives(rng, len(centers) * self.config.negatives).reshape(len(centers), self.config.negatives)
        return centers, contexts, negatives

    @staticmethod
    def _monitor_loss(input_vectors: np.ndarray, output_vectors: np.ndarray, monitor: Optional[tuple]) -> float:
        if monitor is None:
            return 0.0
        centers, contexts, negatives = monitor
        center_vectors = input_vectors[centers]
        positive = np.einsum("nd,nd->n", center_vectors, output_vectors[contexts])
        negative = np.einsum("nd,nkd->nk", center_vectors, output_vectors[negatives])
        loss = np.logaddexp(0.0, -positive) + np.logaddexp(0.0, negative).sum(axis=1)
        return float(loss.mean())


def train_skipgram(corpus: Iterable[Sequence[str]], config: Optional[SkipgramConfig] = None) -> EmbeddingMatrix:
    """Trains skip-gram embeddings with negative sampling

    Args:
        corpus (Iterable[Sequence[str]]): Token sequences
        config (Optional[SkipgramConfig]): Hyperparameters. Defaults to SkipgramConfig().

    Returns:
        EmbeddingMatrix: One row per retained word
    """
    return SkipgramTrainer(config=config if config is not None else SkipgramConfig()).fit(corpus)


def load_embeddings(path: Union[str, Path], oov_seed: Optional[int] = None) -> EmbeddingMatrix:
    """Reads the whitespace-separated text format, with or without a '<count> <dim> [<oov_seed>]' header

    Args:
        path (Union[str, Path]): The embedding file
        oov_seed (Optional[int]): Seed of the OOV vectors of the returned matrix. Defaults to the seed in the header, else 0.

    Returns:
        EmbeddingMatrix: The vectors in file order

    Raises:
        EmbeddingFormatException: On inconsistent dimensionality, duplicate words or unparsable values
    """
    path = Path(path)
    words: List[str] = []
    rows: List[List[float]] = []
    seen = set()
    declared: Optional[tuple] = None
    dim: Optional[int] = None

    with path.open("r", encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            parts = line.split()
            if not parts:
                continue
            if line_number == 1 and len(parts) in (2, 3) and parts[0].isdigit() and parts[1].isdigit() and (len(parts) == 2 or parts[2].lstrip("-").isdigit()):
                declared = (int(parts[0]), int(parts[1]))
                dim = declared[1]
                if len(parts) == 3 and oov_seed is None:
                    oov_seed = int(parts[2])
                continue
            word, values = parts[0], parts[1:]
            if dim is None:
                dim = len(values)
            if len(values) != dim or dim == 0:
                raise EmbeddingFormatException(f"{path}:{line_number}: expected {dim} values for '{word}', found {len(values)}")
            if word in seen:
                raise EmbeddingFormatException(f"{path}:{line_number}: duplicate word '{word}'")
            try:
                rows.append([float(value) for value in values])
            except ValueError as value_error:
                raise EmbeddingFormatException(f"{path}:{line_number}: unparsable value for '{word}'") from value_error
            seen.add(word)
            words.append(word)

    if not words:
        raise EmbeddingFormatException(f"{path}: no vectors found")
    if declared is not None and declared[0] != len(words):
        raise EmbeddingFormatException(f"{path}: header declares {declared[0]} words, found {len(words)}")

    sentibench_logger.info("Loading embeddings succeeded", path=str(path), words=len(words), dim=dim)
    return EmbeddingMatrix(vocab=Vocabulary.from_words(words), matrix=np.array(rows, dtype=np.float64), oov_seed=oov_seed if oov_seed is not None else 0)


def save_embeddings(matrix: EmbeddingMatrix, path: Union[str, Path], header: bool = True) -> None:
    """Writes the text format read by load_embeddings

    Notes:
        - A nonzero oov_seed is written as a third header field; without a header it is not kept.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as handle:
        if header:
            seed = f" {matrix.oov_seed}" if matrix.oov_seed else ""
            handle.write(f"{len(matrix.vocab)} {matrix.dim}{seed}\n")
        for word, row in zip(matrix.vocab.words, matrix.matrix):
            handle.write(word + " " + " ".join(f"{value:.12g}" for value in row) + "\n")
