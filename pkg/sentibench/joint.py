from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from sentibench.data import Vocabulary, build_vocabulary, tokenize
from sentibench.embeddings import EmbeddingMatrix
from sentibench.exceptions import EmptyVocabularyException, InvalidDatasetException, InvalidHyperparameterException, ShapeMismatchException
from sentibench.logger import sentibench_logger

POSITIVE = 1
NEGATIVE = -1


@dataclass(frozen=True)
class DistantExample:
    """A text labeled by distant supervision"""

    tokens: Tuple[str, ...]
    polarity: int

    def __post_init__(self):
        if self.polarity not in (POSITIVE, NEGATIVE):
            raise InvalidDatasetException(f"polarity must be +1 or -1, got {self.polarity}")


@dataclass(frozen=True)
class DistantMarkers:
    """Emoticons and hashtags that act as polarity proxies"""

    positive: Tuple[str, ...] = (":)", ":-)", ":D", "=)")
    negative: Tuple[str, ...] = (":(", ":-(")
    positive_hashtags: Tuple[str, ...] = ()
    negative_hashtags: Tuple[str, ...] = ()

    @property
    def all_positive(self) -> Tuple[str, ...]:
        return self.positive + self.positive_hashtags

    @property
    def all_negative(self) -> Tuple[str, ...]:
        return self.negative + self.negative_hashtags


def distant_label(text: str, markers: Optional[DistantMarkers] = None) -> Optional[int]:
    """Labels a text by the markers it contains

    Args:
        text (str): The raw, untokenized text
        markers (Optional[DistantMarkers]): The marker lists. Defaults to the emoticon lists.

    Returns:
        Optional[int]: +1 for only positive markers, -1 for only negative markers, None otherwise
    """
    markers = markers if markers is not None else DistantMarkers()
    positive = any(marker in text for marker in markers.all_positive)
    negative = any(marker in text for marker in markers.all_negative)
    if positive == negative:
        return None
    return POSITIVE if positive else NEGATIVE


def strip_markers(text: str, markers: Optional[DistantMarkers] = None) -> str:
    """Removes every marker from a text, longest markers first"""
    markers = markers if markers is not None else DistantMarkers()
    for marker in sorted(markers.all_positive + markers.all_negative, key=len, reverse=True):
        text = text.replace(marker, " ")
    return text


def load_distant_corpus(path: Union[str, Path], markers: Optional[DistantMarkers] = None) -> List[DistantExample]:
    """Reads one text per line and keeps the lines distant_label can label

    Args:
        path (Union[str, Path]): The corpus file
        markers (Optional[DistantMarkers]): The marker lists

    Returns:
        List[DistantExample]: Labeled examples, with the markers removed before tokenization
    """
    path = Path(path)
    examples: List[DistantExample] = []
    skipped = 0
    with path.open("r", encoding="utf-8") as handle:
        for line in handle:
            polarity = distant_label(line, markers)
            tokens = tuple(tokenize(strip_markers(line, markers))) if polarity is not None else ()
            if polarity is None or not tokens:
                skipped += 1
                continue
            examples.append(DistantExample(tokens=tokens, polarity=polarity))
    sentibench_logger.info("Loading distant corpus succeeded", path=str(path), examples=len(examples), skipped=skipped)
    return examples


@dataclass(frozen=True)
class JointConfig:
    """Hyperparameters of joint language-model and sentiment training"""

    dim: int = 50
    window: int = 3
    hidden: int = 20
    alpha: float = 0.5
    learning_rate: float = 0.05
    epochs: int = 5
    batch_size: int = 1
    min_count: int = 1
    seed: int = 1
    monitor_size: int = 500

    def __post_init__(self):
        if self.window < 1 or self.window % 2 == 0:
            raise InvalidHyperparameterException(f"window must be odd and >= 1, got {self.window}")
        if not 0.0 <= self.alpha <= 1.0:
            raise InvalidHyperparameterException(f"alpha must be in [0, 1], got {self.alpha}")
        if self.dim < 1 or self.hidden < 1:
            raise InvalidHyperparameterException("dim and hidden must be >= 1")
        if self.learning_rate <= 0:
            raise InvalidHyperparameterException(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.epochs < 0 or self.batch_size < 1:
            raise InvalidHyperparameterException("epochs must be >= 0 and batch_size >= 1")


def hinge_losses(f_cw_t: np.ndarray, f_cw_r: np.ndarray, f_s1_t: np.ndarray, f_s1_r: np.ndarray, polarity: np.ndarray, alpha: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Language-model hinge, sentiment hinge and their alpha-weighted sum for given scores

    Args:
        f_cw_t (np.ndarray): Language-model scores of the original windows
        f_cw_r (np.ndarray): Language-model scores of the corrupted windows
        f_s1_t (np.ndarray): First sentiment scores of the original windows
        f_s1_r (np.ndarray): First sentiment scores of the corrupted windows
        polarity (np.ndarray): +1 or -1 per window; the corrupted window shares it
        alpha (float): Weight of the language-model hinge, in [0, 1]

    Returns:
        Tuple[np.ndarray, np.ndarray, np.ndarray]: loss_cw, loss_s, loss_combined

    Raises:
        InvalidHyperparameterException: If alpha is outside of [0, 1]
    """
    if not 0.0 <= alpha <= 1.0:
        raise InvalidHyperparameterException(f"alpha must be in [0, 1], got {alpha}")
    polarity = np.asarray(polarity, dtype=np.float64)
    loss_cw = np.maximum(0.0, 1.0 - np.asarray(f_cw_t, dtype=np.float64) + np.asarray(f_cw_r, dtype=np.float64))
    loss_s = np.maximum(0.0, 1.0 - polarity * np.asarray(f_s1_t, dtype=np.float64) + polarity * np.asarray(f_s1_r, dtype=np.float64))
    return loss_cw, loss_s, alpha * loss_cw + (1.0 - alpha) * loss_s


def corrupt_window(window: np.ndarray, vocab: Union[Vocabulary, int], rng: np.random.Generator) -> np.ndarray:
    """Replaces the center of a window by a uniformly drawn different vocabulary word

    Args:
        window (np.ndarray): Token indices of odd length
        vocab (Union[Vocabulary, int]): The vocabulary, or its size
        rng (np.random.Generator): Source of the replacement

    Returns:
        np.ndarray: A copy of the window with a new center

    Raises:
        EmptyVocabularyException: If the vocabulary has fewer than two words
    """
    size = vocab if isinstance(vocab, int) else len(vocab)
    if size < 2:
        raise EmptyVocabularyException(f"Corrupting a window needs at least two vocabulary words, got {size}")
    corrupted = np.array(window, dtype=np.int64, copy=True)
    center = len(corrupted) // 2
    replacement = int(rng.integers(size - 1))
    corrupted[center] = replacement + 1 if replacement >= corrupted[center] else replacement
    return corrupted


def _corrupt_batch(windows: np.ndarray, size: int, rng: np.random.Generator) -> np.ndarray:
    corrupted = windows.copy()
    center = windows.shape[1] // 2
    replacement = rng.integers(size - 1, size=len(windows))
    corrupted[:, center] = np.where(replacement >= windows[:, center], replacement + 1, replacement)
    return corrupted


@dataclass(eq=False)
class JointScorer:
    """Window scorer with a language-model head and a sentiment head

    Notes:
        - Row len(vocab) of the embedding table is the padding vector used beyond text borders.
        - The window embeddings are concatenated, mapped to the hidden layer and squashed with
          hard-tanh; f_cw is a scalar head, f_s a 2-vector head whose first entry enters the
          sentiment hinge.
    """

    vocab: Vocabulary
    window: int
    embeddings: np.ndarray
    hidden_weights: np.ndarray
    hidden_bias: np.ndarray
    cw_weights: np.ndarray
    cw_bias: np.ndarray
    sentiment_weights: np.ndarray
    sentiment_bias: np.ndarray

    PARAMETER_NAMES = ("embeddings", "hidden_weights", "hidden_bias", "cw_weights", "cw_bias", "sentiment_weights", "sentiment_bias")

    @classmethod
    def initialize(cls, vocab: Vocabulary, config: JointConfig, rng: Optional[np.random.Generator] = None) -> "JointScorer":
        """Creates a scorer with seeded uniform embeddings and Glorot-uniform layers"""
        rng = rng if rng is not None else np.random.default_rng(config.seed)
        fan_in = config.window * config.dim

        def _glorot(rows: int, columns: int) -> np.ndarray:
            limit = np.sqrt(6.0 / (rows + columns))
            return rng.uniform(-limit, limit, size=(rows, columns))

        return cls(
            vocab=vocab,
            window=config.window,
            embeddings=rng.uniform(-0.1, 0.1, size=(len(vocab) + 1, config.dim)),
            hidden_weights=_glorot(config.hidden, fan_in),
            hidden_bias=np.zeros(config.hidden),
            cw_weights=_glorot(1, config.hidden)[0],
            cw_bias=np.zeros(1),
            sentiment_weights=_glorot(2, config.hidden),
            sentiment_bias=np.zeros(2),
        )

    @property
    def pad_index(self) -> int:
        return len(self.vocab)

    def parameters(self) -> Dict[str, np.ndarray]:
        """Returns the parameter arrays by name (not copies)"""
        return {name: getattr(self, name) for name in self.PARAMETER_NAMES}

    def windows(self, tokens: Sequence[str]) -> np.ndarray:
        """Encodes a text as one window per in-vocabulary token, padded at the borders"""
        ids = self.vocab.indices(tokens)
        half = self.window // 2
        padded = [self.pad_index] * half + ids + [self.pad_index] * half
        if not ids:
            return np.zeros((0, self.window), dtype=np.int64)
        return np.array([padded[position : position + self.window] for position in range(len(ids))], dtype=np.int64)

    def forward(self, windows: np.ndarray) -> Tuple[np.ndarray, np.ndarray, tuple]:
        """Scores a batch of windows; returns f_cw (B), f_s (B x 2) and a backward cache"""
        windows = np.atleast_2d(np.asarray(windows, dtype=np.int64))
        if windows.shape[1] != self.window:
            raise ShapeMismatchException(f"Windows have length {windows.shape[1]}, the scorer expects {self.window}")
        inputs = self.embeddings[windows].reshape(len(windows), -1)
        pre_activation = inputs @ self.hidden_weights.T + self.hidden_bias
        activation = np.clip(pre_activation, -1.0, 1.0)
        f_cw = activation @ self.cw_weights + self.cw_bias[0]
        f_s = activation @ self.sentiment_weights.T + self.sentiment_bias
        return f_cw, f_s, (windows, inputs, pre_activation, activation)

    def _backward(self, cache: tuple, grad_cw: np.ndarray, grad_s1: np.ndarray, gradients: Dict[str, np.ndarray]) -> np.ndarray:
        windows, inputs, pre_activation, activation = cache
        gradients["cw_weights"] += grad_cw @ activation
        gradients["cw_bias"][0] += grad_cw.sum()
        gradients["sentiment_weights"][0] += grad_s1 @ activation
        gradients["sentiment_bias"][0] += grad_s1.sum()
        grad_activation = np.outer(grad_cw, self.cw_weights) + np.outer(grad_s1, self.sentiment_weights[0])
        grad_pre = grad_activation * (np.abs(pre_activation) < 1.0)
        gradients["hidden_weights"] += grad_pre.T @ inputs
        gradients["hidden_bias"] += grad_pre.sum(axis=0)
        return (grad_pre @ self.hidden_weights).reshape(windows.shape[0], windows.shape[1], -1)

    def loss_and_gradients(self, windows: np.ndarray, corrupted: np.ndarray, polarity: np.ndarray, alpha: float, dense_embeddings: bool = True) -> Tuple[float, Dict[str, np.ndarray]]:
        """Mean combined hinge loss over a batch and its gradient for every parameter

        Args:
            windows (np.ndarray): B x window original windows
            corrupted (np.ndarray): B x window corrupted windows
            polarity (np.ndarray): B polarities in {+1, -1}
            alpha (float): Weight of the language-model hinge
            dense_embeddings (bool): Whether the embedding gradient is returned as a dense table.
                Otherwise "embedding_rows" and "embedding_updates" hold the sparse form.

        Returns:
            Tuple[float, Dict[str, np.ndarray]]: The loss and the gradients by parameter name
        """
        windows = np.atleast_2d(windows)
        corrupted = np.atleast_2d(corrupted)
        polarity = np.atleast_1d(np.asarray(polarity, dtype=np.float64))
        f_cw_t, f_s_t, cache_t = self.forward(windows)
        f_cw_r, f_s_r, cache_r = self.forward(corrupted)
        loss_cw, loss_s, combined = hinge_losses(f_cw_t, f_cw_r, f_s_t[:, 0], f_s_r[:, 0], polarity, alpha)

        batch = len(windows)
        active_cw = (loss_cw > 0) * alpha / batch
        active_s = (loss_s > 0) * (1.0 - alpha) * polarity / batch
        gradients = {name: np.zeros_like(value) for name, value in self.parameters().items() if name != "embeddings"}
        grad_inputs_t = self._backward(cache_t, -active_cw, -active_s, gradients)
        grad_inputs_r = self._backward(cache_r, active_cw, active_s, gradients)

        rows = np.concatenate([windows.ravel(), corrupted.ravel()])
        updates = np.concatenate([grad_inputs_t.reshape(-1, self.embeddings.shape[1]), grad_inputs_r.reshape(-1, self.embeddings.shape[1])])
        if dense_embeddings:
            gradients["embeddings"] = np.zeros_like(self.embeddings)
            np.add.at(gradients["embeddings"], rows, updates)
        else:
            gradients["embedding_rows"] = rows
            gradients["embedding_updates"] = updates
        return float(combined.mean()), gradients

    def embedding_matrix(self, oov_seed: int = 0) -> EmbeddingMatrix:
        """Returns the word rows of the embedding table, without the padding row"""
        return EmbeddingMatrix(vocab=self.vocab, matrix=self.embeddings[: len(self.vocab)], oov_seed=oov_seed)


def joint_losses(scorer: JointScorer, t: np.ndarray, t_r: np.ndarray, polarity: Union[int, np.ndarray], alpha: float) -> Tuple[float, float, float]:
    """Evaluates the three hinge losses of a scorer, averaged over the given windows

    Args:
        scorer (JointScorer): The scorer
        t (np.ndarray): Original window(s)
        t_r (np.ndarray): Corrupted window(s) of the same length
        polarity (Union[int, np.ndarray]): Polarity of each original window
        alpha (float): Weight of the language-model hinge

    Returns:
        Tuple[float, float, float]: loss_cw, loss_s, loss_combined

    Raises:
        ShapeMismatchException: If t and t_r differ in shape
        InvalidHyperparameterException: If alpha is outside of [0, 1]
    """
    t, t_r = np.atleast_2d(t), np.atleast_2d(t_r)
    if t.shape != t_r.shape:
        raise ShapeMismatchException(f"Original windows {t.shape} and corrupted windows {t_r.shape} differ")
    f_cw_t, f_s_t, _ = scorer.forward(t)
    f_cw_r, f_s_r, _ = scorer.forward(t_r)
    loss_cw, loss_s, combined = hinge_losses(f_cw_t, f_cw_r, f_s_t[:, 0], f_s_r[:, 0], np.broadcast_to(polarity, f_cw_t.shape), alpha)
    return float(loss_cw.mean()), float(loss_s.mean()), float(combined.mean())


def sentiment_hinge_accuracy(scorer: JointScorer, windows: np.ndarray, corrupted: np.ndarray, polarity: np.ndarray) -> float:
    """Fraction of window pairs whose sentiment scores are ordered by polarity"""
    f_s_t = scorer.forward(windows)[1][:, 0]
    f_s_r = scorer.forward(corrupted)[1][:, 0]
    return float(np.mean(np.asarray(polarity) * (f_s_t - f_s_r) > 0))


@dataclass
class JointTrainer:
    """Stochastic-gradient training of a JointScorer on a distantly labeled corpus

    Notes:
        - One corruption is drawn per window and epoch.
        - loss_history holds the mean combined loss of a fixed monitor batch (fixed corruptions)
          before training and after each epoch.
    """

    config: JointConfig = field(default_factory=JointConfig)
    loss_history: List[float] = field(default_factory=list, init=False)
    scorer: Optional[JointScorer] = field(default=None, init=False)

    def fit(self, corpus: Sequence[DistantExample]) -> EmbeddingMatrix:
        """Trains the scorer and returns its word embeddings

        Args:
            corpus (Sequence[DistantExample]): The labeled texts

        Returns:
            EmbeddingMatrix: The sentiment-aware embeddings

        Raises:
            EmptyVocabularyException: If the corpus has fewer than two distinct words
        """
        config = self.config
        vocab = build_vocabulary((example.tokens for example in corpus), min_count=config.min_count)
        if len(vocab) < 2:
            raise EmptyVocabularyException(f"Joint training needs at least two vocabulary words, got {len(vocab)}")
        polarities = {example.polarity for example in corpus}
        if len(polarities) < 2:
            sentibench_logger.warning("Distant corpus has a single polarity, the sentiment hinge is degenerate", polarities=sorted(polarities))

        scorer = JointScorer.initialize(vocab, config, np.random.default_rng(config.seed))
        self.scorer = scorer
        window_blocks, polarity_blocks = [], []
        for example in corpus:
            encoded = scorer.windows(example.tokens)
            window_blocks.append(encoded)
            polarity_blocks.append(np.full(len(encoded), example.polarity, dtype=np.float64))
        windows = np.concatenate(window_blocks) if window_blocks else np.zeros((0, config.window), dtype=np.int64)
        polarity = np.concatenate(polarity_blocks) if polarity_blocks else np.zeros(0)

        rng = np.random.default_rng([config.seed, 1])
        monitor_rng = np.random.default_rng([config.seed, 2])
        monitor_rows = monitor_rng.permutation(len(windows))[: config.monitor_size]
        monitor = (windows[monitor_rows], _corrupt_batch(windows[monitor_rows], len(vocab), monitor_rng), polarity[monitor_rows])
        self.loss_history = [self._monitor_loss(monitor)]

        sentibench_logger.info("Training joint embeddings", words=len(vocab), windows=len(windows), epochs=config.epochs, alpha=config.alpha)
        for epoch in range(config.epochs):
            order = rng.permutation(len(windows))
            for start in range(0, len(order), config.batch_size):
                rows = order[start : start + config.batch_size]
                batch = windows[rows]
                corrupted = _corrupt_batch(batch, len(vocab), rng)
                _, gradients = scorer.loss_and_gradients(batch, corrupted, polarity[rows], config.alpha, dense_embeddings=False)
                scale = config.learning_rate * len(rows)
                for name in JointScorer.PARAMETER_NAMES[1:]:
                    getattr(scorer, name)[...] -= scale * gradients[name]
                np.subtract.at(scorer.embeddings, gradients["embedding_rows"], scale * gradients["embedding_updates"])
            self.loss_history.append(self._monitor_loss(monitor))
            sentibench_logger.debug("Joint training epoch finished", epoch=epoch + 1, monitor_loss=self.loss_history[-1])

        sentibench_logger.info("Training joint embeddings succeeded", monitor_loss=self.loss_history[-1])
        return scorer.embedding_matrix(oov_seed=config.seed)

    def _monitor_loss(self, monitor: tuple) -> float:
        windows, corrupted, polarity = monitor
        if len(windows) == 0:
            return 0.0
        return joint_losses(self.scorer, windows, corrupted, polarity, self.config.alpha)[2]


def train_joint(corpus: Sequence[DistantExample], config: Optional[JointConfig] = None) -> EmbeddingMatrix:
    """Trains sentiment-aware embeddings on a distantly labeled corpus"""
    return JointTrainer(config=config if config is not None else JointConfig()).fit(corpus)
