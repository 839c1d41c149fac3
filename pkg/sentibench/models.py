from abc import ABC, abstractmethod
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Type, Union

import numpy as np
from scipy import sparse

from sentibench.checkpoint import load_checkpoint, save_checkpoint
from sentibench.data import DatasetSplit, LabeledExample, LabelScheme, Vocabulary, build_vocabulary
from sentibench.embeddings import EmbeddingMatrix, SkipgramConfig, load_embeddings, oov_vector, train_skipgram
from sentibench.exceptions import CheckpointFormatException, InvalidDatasetException, ModelSpecException, TrainingDivergedException
from sentibench.joint import JointConfig, load_distant_corpus, train_joint
from sentibench.linear_models import HINGE, LOGISTIC, LinearModel, predict_linear, train_logreg, train_svm
from sentibench.logger import sentibench_logger
from sentibench.neural import (
    AdamState,
    LSTMWeights,
    Parameter,
    adam_step,
    bilstm_backward,
    bilstm_sequence,
    conv_pool_apply,
    conv_pool_backward,
    dense_apply,
    dense_backward,
    dropout_apply,
    dropout_backward,
    glorot_uniform,
    lstm_backward,
    lstm_sequence,
    softmax_xent,
    softmax_xent_backward,
)
from sentibench.retrofit import RetrofitConfig, load_lexicon, retrofit_embeddings

PAD = "<pad>"
HIDDEN_GRID = (50, 100, 200)
L2_GRID = (1e-4, 1e-3, 1e-2, 1e-1, 1.0)
PREDICTION_BATCH = 256

Example = Union[LabeledExample, Sequence[str]]


class ModelKind(str, Enum):
    """The seven benchmark systems"""

    BOW = "bow"
    AVE = "ave"
    RETROFIT = "retrofit"
    JOINT = "joint"
    LSTM = "lstm"
    BILSTM = "bilstm"
    CNN = "cnn"

    @property
    def is_neural(self) -> bool:
        return self in (ModelKind.LSTM, ModelKind.BILSTM, ModelKind.CNN)

    @property
    def uses_embeddings(self) -> bool:
        return self is not ModelKind.BOW

    @property
    def display_name(self) -> str:
        return {"bilstm": "BiLSTM"}.get(self.value, self.value.upper())


@dataclass(frozen=True)
class ModelSpec:
    """Declarative description of one system and its hyperparameters

    Notes:
        - epochs=None trains neural models with early stopping on dev accuracy; an integer trains exactly that many epochs.
        - l2=None selects the penalty of linear models from l2_grid on dev accuracy.
        - Without an embeddings path, skip-gram vectors are trained on the train and dev texts.
    """

    kind: ModelKind
    dim: int = 50
    embeddings: Optional[str] = None
    lexicon: Optional[str] = None
    joint_corpus: Optional[str] = None
    hidden: int = 50
    epochs: Optional[int] = None
    max_epochs: int = 30
    patience: int = 5
    l2: Optional[float] = None
    dropout: float = 0.5
    batch_size: int = 32
    learning_rate: float = 0.001
    seed: int = 1
    retrofit_iterations: int = 10
    lstm_units: int = 50
    num_filters: int = 50
    embedding_iterations: int = 5
    joint_epochs: int = 5
    hidden_grid: Tuple[int, ...] = HIDDEN_GRID
    l2_grid: Tuple[float, ...] = L2_GRID

    def __post_init__(self):
        try:
            object.__setattr__(self, "kind", ModelKind(self.kind))
        except ValueError as value_error:
            raise ModelSpecException(f"Unknown model kind '{self.kind}'") from value_error
        object.__setattr__(self, "hidden_grid", tuple(self.hidden_grid))
        object.__setattr__(self, "l2_grid", tuple(self.l2_grid))

        if self.kind is ModelKind.RETROFIT and not self.lexicon:
            raise ModelSpecException("RETROFIT requires a lexicon")
        if self.kind is ModelKind.JOINT and not (self.embeddings or self.joint_corpus):
            raise ModelSpecException("JOINT requires joint embeddings or a distant corpus to train them on")
        if self.dim < 1 or self.hidden < 1 or self.lstm_units < 1 or self.num_filters < 1:
            raise ModelSpecException("dim, hidden, lstm_units and num_filters must be >= 1")
        if self.epochs is not None and self.epochs < 0:
            raise ModelSpecException(f"epochs must be >= 0, got {self.epochs}")
        if self.max_epochs < 0 or self.patience < 1 or self.batch_size < 1:
            raise ModelSpecException("max_epochs must be >= 0, patience and batch_size >= 1")
        if self.l2 is not None and self.l2 < 0:
            raise ModelSpecException(f"l2 must be >= 0, got {self.l2}")
        if not 0.0 <= self.dropout < 1.0:
            raise ModelSpecException(f"dropout must be in [0, 1), got {self.dropout}")
        if self.learning_rate <= 0:
            raise ModelSpecException(f"learning_rate must be > 0, got {self.learning_rate}")
        if not self.hidden_grid or not self.l2_grid:
            raise ModelSpecException("hidden_grid and l2_grid must not be empty")

    @property
    def label(self) -> str:
        """Row label in reports, e.g. "BOW" or "LSTM-50" """
        return self.kind.display_name if self.kind is ModelKind.BOW else f"{self.kind.display_name}-{self.dim}"

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["kind"] = self.kind.value
        data["hidden_grid"] = list(self.hidden_grid)
        data["l2_grid"] = list(self.l2_grid)
        return data

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ModelSpec":
        return cls(**dict(data))

    def with_overrides(self, **overrides: Any) -> "ModelSpec":
        return replace(self, **overrides)


def _tokens(example: Example) -> Sequence[str]:
    return example.tokens if isinstance(example, LabeledExample) else example


def bow_features(example: Example, vocab: Vocabulary) -> np.ndarray:
    """Token counts over the vocabulary; out-of-vocabulary tokens are ignored"""
    return np.bincount(np.array(vocab.indices(_tokens(example)), dtype=np.int64), minlength=len(vocab)).astype(np.float64)


def bow_matrix(examples: Sequence[Example], vocab: Vocabulary) -> sparse.csr_matrix:
    """Stacks the bag-of-words counts of several examples into a sparse matrix"""
    rows, columns = [], []
    for row, example in enumerate(examples):
        indices = vocab.indices(_tokens(example))
        rows.extend([row] * len(indices))
        columns.extend(indices)
    values = np.ones(len(rows))
    return sparse.csr_matrix((values, (rows, columns)), shape=(len(examples), len(vocab)), dtype=np.float64)


def _token_vectors(example: Example, embeddings: EmbeddingMatrix) -> np.ndarray:
    tokens = _tokens(example)
    if len(tokens) == 0:
        raise InvalidDatasetException("Cannot compute features of an empty example")
    return embeddings.lookup_many(tokens)


def ave_features(example: Example, embeddings: EmbeddingMatrix) -> np.ndarray:
    """Mean of the token vectors, OOV tokens included through the lookup policy

    Raises:
        InvalidDatasetException: If the example has no token
    """
    return _token_vectors(example, embeddings).mean(axis=0)


def minmaxavg_features(example: Example, embeddings: EmbeddingMatrix) -> np.ndarray:
    """Coordinate-wise maximum, minimum and mean of the token vectors, concatenated in that order

    Raises:
        InvalidDatasetException: If the example has no token
    """
    vectors = _token_vectors(example, embeddings)
    return np.concatenate([vectors.max(axis=0), vectors.min(axis=0), vectors.mean(axis=0)])


def _accuracy(gold: np.ndarray, predicted: np.ndarray) -> float:
    return float(np.mean(np.asarray(gold) == np.asarray(predicted)))


def _labels(examples: Sequence[LabeledExample]) -> np.ndarray:
    return np.array([example.label for example in examples], dtype=np.int64)


@lru_cache(maxsize=8)
def _cached_embeddings(path: str) -> EmbeddingMatrix:
    return load_embeddings(path)


def _check_dim(matrix: EmbeddingMatrix, spec: ModelSpec, source: str) -> EmbeddingMatrix:
    if matrix.dim != spec.dim:
        raise ModelSpecException(f"{source} has dimensionality {matrix.dim}, the spec asks for {spec.dim}")
    return matrix


def base_embeddings(spec: ModelSpec, data: DatasetSplit) -> EmbeddingMatrix:
    """Loads or trains the input vectors of a spec, before any retrofitting

    Notes:
        - Fallback skip-gram vectors see the train and dev texts only; test words get OOV vectors.

    Raises:
        ModelSpecException: If loaded vectors have another dimensionality
    """
    if spec.embeddings:
        return _check_dim(_cached_embeddings(str(spec.embeddings)), spec, str(spec.embeddings))
    if spec.kind is ModelKind.JOINT:
        corpus = load_distant_corpus(spec.joint_corpus)
        return train_joint(corpus, JointConfig(dim=spec.dim, epochs=spec.joint_epochs, seed=spec.seed))
    corpus = [example.tokens for example in (*data.train, *data.dev)]
    config = SkipgramConfig(dim=spec.dim, window=5, subsample=1e-3, iterations=spec.embedding_iterations, min_count=1, seed=spec.seed)
    return train_skipgram(corpus, config)


def resolve_embeddings(spec: ModelSpec, data: DatasetSplit) -> EmbeddingMatrix:
    """Provides the input vectors a spec asks for

    Args:
        spec (ModelSpec): The model spec
        data (DatasetSplit): The dataset; its train and dev texts train fallback skip-gram vectors

    Returns:
        EmbeddingMatrix: Loaded, trained, retrofitted or jointly trained vectors of dimensionality spec.dim

    Raises:
        ModelSpecException: If loaded vectors have another dimensionality
    """
    matrix = base_embeddings(spec, data)
    if spec.kind is ModelKind.RETROFIT:
        graph = load_lexicon(spec.lexicon, matrix.vocab)
        matrix = retrofit_embeddings(matrix, graph, RetrofitConfig(iterations=spec.retrofit_iterations))
    return matrix


def _split_words(data: DatasetSplit) -> List[str]:
    return sorted({token for examples in data.partitions().values() for example in examples for token in example.tokens})


def bind_embeddings(matrix: EmbeddingMatrix, words: Sequence[str]) -> EmbeddingMatrix:
    """Restricts a matrix to the given words it knows, keeping its OOV policy"""
    known = [word for word in words if word in matrix.vocab]
    rows = matrix.lookup_many(known) if known else np.zeros((0, matrix.dim))
    return EmbeddingMatrix(vocab=Vocabulary.from_words(known), matrix=rows, oov_seed=matrix.oov_seed)


class SentimentClassifier(ABC):
    """Uniform train/predict interface of the seven systems"""

    kind: ModelKind

    def __init__(self, spec: ModelSpec, scheme: LabelScheme):
        self.spec = spec
        self.scheme = scheme
        self.dev_curve: List[float] = []
        self.hyperparameters: Dict[str, Any] = {}

    @abstractmethod
    def fit(self, data: DatasetSplit, embeddings: Optional[EmbeddingMatrix] = None) -> None:
        """Trains on data.train, using data.dev for model selection"""

    @abstractmethod
    def predict(self, examples: Sequence[Example]) -> np.ndarray:
        """Predicts one label per example"""

    @abstractmethod
    def state(self) -> Tuple[Dict[str, np.ndarray], Dict[str, Any]]:
        """Returns the arrays and the metadata needed to rebuild the classifier"""

    @abstractmethod
    def restore(self, arrays: Mapping[str, np.ndarray], metadata: Mapping[str, Any]) -> None:
        """Rebuilds the classifier from state()"""


class _LinearClassifier(SentimentClassifier):
    loss = LOGISTIC

    def __init__(self, spec: ModelSpec, scheme: LabelScheme):
        super().__init__(spec, scheme)
        self.model: Optional[LinearModel] = None

    @abstractmethod
    def prepare(self, data: DatasetSplit, embeddings: Optional[EmbeddingMatrix]) -> None:
        """Builds the feature space from the training data"""

    @abstractmethod
    def featurize(self, examples: Sequence[Example]):
        """Maps examples to a feature matrix"""

    def fit(self, data: DatasetSplit, embeddings: Optional[EmbeddingMatrix] = None) -> None:
        self.prepare(data, embeddings)
        train_features, dev_features = self.featurize(data.train), self.featurize(data.dev)
        train_labels, dev_labels = _labels(data.train), _labels(data.dev)
        trainer = train_svm if self.loss == HINGE else train_logreg

        grid = (self.spec.l2,) if self.spec.l2 is not None else self.spec.l2_grid
        best_accuracy = -1.0
        for l2 in grid:
            model = trainer(train_features, train_labels, l2, num_classes=self.scheme.num_labels)
            dev_accuracy = _accuracy(dev_labels, predict_linear(model, dev_features))
            self.dev_curve.append(dev_accuracy)
            sentibench_logger.debug("Linear model evaluated on dev", kind=self.kind.value, l2=l2, dev_accuracy=dev_accuracy)
            if dev_accuracy > best_accuracy:
                best_accuracy, self.model = dev_accuracy, model
                self.hyperparameters = {"l2": l2}

    def predict(self, examples: Sequence[Example]) -> np.ndarray:
        return predict_linear(self.model, self.featurize(examples))

    def _linear_state(self) -> Dict[str, np.ndarray]:
        return {"linear.weights": self.model.weights, "linear.bias": self.model.bias}

    def _restore_linear(self, arrays: Mapping[str, np.ndarray], metadata: Mapping[str, Any]) -> None:
        self.model = LinearModel(weights=arrays["linear.weights"], bias=arrays["linear.bias"], l2=metadata["hyperparameters"]["l2"], loss=self.loss)
        self.hyperparameters = dict(metadata["hyperparameters"])


class BowClassifier(_LinearClassifier):
    """Logistic regression on token counts over the training vocabulary"""

    kind = ModelKind.BOW

    def __init__(self, spec: ModelSpec, scheme: LabelScheme):
        super().__init__(spec, scheme)
        self.vocab: Optional[Vocabulary] = None

    def prepare(self, data: DatasetSplit, embeddings: Optional[EmbeddingMatrix]) -> None:
        self.vocab = build_vocabulary(example.tokens for example in data.train)

    def featurize(self, examples: Sequence[Example]) -> sparse.csr_matrix:
        return bow_matrix(examples, self.vocab)

    def state(self) -> Tuple[Dict[str, np.ndarray], Dict[str, Any]]:
        return self._linear_state(), {"words": list(self.vocab.words), "counts": list(self.vocab.counts), "hyperparameters": self.hyperparameters}

    def restore(self, arrays: Mapping[str, np.ndarray], metadata: Mapping[str, Any]) -> None:
        self.vocab = Vocabulary(words=tuple(metadata["words"]), counts=tuple(metadata["counts"]))
        self._restore_linear(arrays, metadata)


class AverageClassifier(_LinearClassifier):
    """Logistic regression on averaged word vectors"""

    kind = ModelKind.AVE

    def __init__(self, spec: ModelSpec, scheme: LabelScheme):
        super().__init__(spec, scheme)
        self.embeddings: Optional[EmbeddingMatrix] = None

    def prepare(self, data: DatasetSplit, embeddings: Optional[EmbeddingMatrix]) -> None:
        matrix = embeddings if embeddings is not None else resolve_embeddings(self.spec, data)
        self.embeddings = bind_embeddings(matrix, _split_words(data))

    def featurize(self, examples: Sequence[Example]) -> np.ndarray:
        return np.stack([ave_features(example, self.embeddings) for example in examples])

    def state(self) -> Tuple[Dict[str, np.ndarray], Dict[str, Any]]:
        arrays = self._linear_state()
        arrays["embeddings"] = self.embeddings.matrix
        return arrays, {"words": list(self.embeddings.vocab.words), "oov_seed": self.embeddings.oov_seed, "hyperparameters": self.hyperparameters}

    def restore(self, arrays: Mapping[str, np.ndarray], metadata: Mapping[str, Any]) -> None:
        matrix = arrays["embeddings"] if metadata["words"] else np.zeros((0, self.spec.dim))
        self.embeddings = EmbeddingMatrix(vocab=Vocabulary.from_words(metadata["words"]), matrix=matrix, oov_seed=metadata["oov_seed"])
        self._restore_linear(arrays, metadata)


class RetrofitClassifier(AverageClassifier):
    """Logistic regression on averaged retrofitted vectors"""

    kind = ModelKind.RETROFIT

    def prepare(self, data: DatasetSplit, embeddings: Optional[EmbeddingMatrix]) -> None:
        """Retrofits provided base vectors; without them, resolve_embeddings loads and retrofits"""
        if embeddings is not None:
            graph = load_lexicon(self.spec.lexicon, embeddings.vocab)
            embeddings = retrofit_embeddings(embeddings, graph, RetrofitConfig(iterations=self.spec.retrofit_iterations))
        super().prepare(data, embeddings)


class JointClassifier(AverageClassifier):
    """Linear SVM on the max, min and mean of jointly trained vectors"""

    kind = ModelKind.JOINT
    loss = HINGE

    def featurize(self, examples: Sequence[Example]) -> np.ndarray:
        return np.stack([minmaxavg_features(example, self.embeddings) for example in examples])


class _NeuralClassifier(SentimentClassifier):
    """Embedding layer fine-tuned together with an architecture-specific network

    Notes:
        - Row 0 of the embedding table is a fixed zero padding vector.
        - Tokens unknown to the table at prediction time use the OOV vectors of the input embeddings.
    """

    def __init__(self, spec: ModelSpec, scheme: LabelScheme):
        super().__init__(spec, scheme)
        self.vocab: Optional[Vocabulary] = None
        self.oov_seed = 0
        self.params: Dict[str, Parameter] = {}

    @abstractmethod
    def build(self, rng: np.random.Generator, data: DatasetSplit) -> None:
        """Creates the layer parameters"""

    @abstractmethod
    def forward(self, inputs: np.ndarray, mask: np.ndarray, training: bool, rng: Optional[np.random.Generator]) -> Tuple[np.ndarray, tuple]:
        """Maps embedded B x T x d inputs to B x C logits"""

    @abstractmethod
    def backward(self, cache: tuple, grad_logits: np.ndarray) -> np.ndarray:
        """Accumulates parameter gradients and returns the gradient of the embedded inputs"""

    def _add(self, name: str, value: np.ndarray) -> Parameter:
        self.params[name] = Parameter(name=name, value=value)
        return self.params[name]

    def value(self, name: str) -> np.ndarray:
        return self.params[name].value

    def _accumulate(self, prefix: str, gradients: Mapping[str, np.ndarray]) -> None:
        for name, gradient in gradients.items():
            self.params[f"{prefix}.{name}"].grad += gradient

    def sequence_length(self, lengths: Sequence[int]) -> int:
        return max(1, max(lengths, default=1))

    def encode(self, examples: Sequence[Example], table_size: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray, List[str]]:
        """Maps examples to padded index rows; returns the ids, the mask and the unknown words appended after the table"""
        table_size = table_size if table_size is not None else len(self.vocab)
        token_lists = [_tokens(example) for example in examples]
        length = self.sequence_length([len(tokens) for tokens in token_lists])
        ids = np.zeros((len(token_lists), length), dtype=np.int64)
        mask = np.zeros((len(token_lists), length), dtype=bool)
        unknown: Dict[str, int] = {}
        for row, tokens in enumerate(token_lists):
            for position, token in enumerate(tokens[:length]):
                index = self.vocab.index(token)
                if index is None:
                    index = unknown.setdefault(token, table_size + len(unknown))
                ids[row, position] = index
                mask[row, position] = True
        return ids, mask, list(unknown)

    def fit(self, data: DatasetSplit, embeddings: Optional[EmbeddingMatrix] = None) -> None:
        matrix = embeddings if embeddings is not None else resolve_embeddings(self.spec, data)
        rng = np.random.default_rng(self.spec.seed)
        words = _split_words(data)
        self.vocab = Vocabulary.from_words([PAD] + words)
        self.oov_seed = matrix.oov_seed
        self._add("embeddings", np.vstack([np.zeros((1, matrix.dim)), matrix.lookup_many(words)]))
        self.build(rng, data)

        state = AdamState(learning_rate=self.spec.learning_rate)
        train_labels, dev_labels = _labels(data.train), _labels(data.dev)
        epochs = self.spec.epochs if self.spec.epochs is not None else self.spec.max_epochs
        best_accuracy, best_epoch, best_snapshot, stale = -1.0, 0, None, 0
        sentibench_logger.info("Training neural model", kind=self.kind.value, dataset=data.name, seed=self.spec.seed, epochs=epochs, hidden=self.spec.hidden)

        for epoch in range(1, epochs + 1):
            order = rng.permutation(len(data.train))
            losses = []
            for start in range(0, len(order), self.spec.batch_size):
                rows = order[start : start + self.spec.batch_size]
                losses.append(self._train_step([data.train[row] for row in rows], train_labels[rows], state, rng))
            dev_accuracy = _accuracy(dev_labels, self.predict(data.dev))
            self.dev_curve.append(dev_accuracy)
            sentibench_logger.debug("Neural epoch finished", kind=self.kind.value, epoch=epoch, loss=float(np.mean(losses)), dev_accuracy=dev_accuracy)

            if self.spec.epochs is None:
                if dev_accuracy > best_accuracy:
                    best_accuracy, best_epoch, stale = dev_accuracy, epoch, 0
                    best_snapshot = {name: param.value.copy() for name, param in self.params.items()}
                else:
                    stale += 1
                    if stale >= self.spec.patience:
                        break

        if best_snapshot is not None:
            for name, value in best_snapshot.items():
                self.params[name].value[...] = value
        self.hyperparameters = {"hidden": self.spec.hidden, "epochs": best_epoch if self.spec.epochs is None else epochs}

    def _train_step(self, examples: Sequence[LabeledExample], labels: np.ndarray, state: AdamState, rng: np.random.Generator) -> float:
        ids, mask, _ = self.encode(examples)
        logits, cache = self.forward(self.value("embeddings")[ids], mask, True, rng)
        probabilities, loss = softmax_xent(logits, labels)
        if not np.isfinite(loss):
            raise TrainingDivergedException(f"{self.kind.value} training loss became {loss}")
        for param in self.params.values():
            param.zero_grad()
        grad_inputs = self.backward(cache, softmax_xent_backward(probabilities, labels))
        embedding_grad = self.params["embeddings"].grad
        np.add.at(embedding_grad, ids, grad_inputs)
        embedding_grad[0] = 0.0
        adam_step(state, list(self.params.values()))
        return loss

    def predict(self, examples: Sequence[Example]) -> np.ndarray:
        embeddings = self.value("embeddings")
        predictions = []
        for start in range(0, len(examples), PREDICTION_BATCH):
            ids, mask, unknown = self.encode(examples[start : start + PREDICTION_BATCH])
            table = np.vstack([embeddings, np.stack([oov_vector(word, embeddings.shape[1], self.oov_seed) for word in unknown])]) if unknown else embeddings
            logits, _ = self.forward(table[ids], mask, False, None)
            predictions.append(np.argmax(logits, axis=1))
        return np.concatenate(predictions) if predictions else np.zeros(0, dtype=np.int64)

    def state(self) -> Tuple[Dict[str, np.ndarray], Dict[str, Any]]:
        return {name: param.value for name, param in self.params.items()}, {"words": list(self.vocab.words), "oov_seed": self.oov_seed, "hyperparameters": self.hyperparameters}

    def restore(self, arrays: Mapping[str, np.ndarray], metadata: Mapping[str, Any]) -> None:
        self.vocab = Vocabulary.from_words(metadata["words"])
        self.oov_seed = metadata["oov_seed"]
        self.hyperparameters = dict(metadata["hyperparameters"])
        self.params = {name: Parameter(name=name, value=np.array(value)) for name, value in arrays.items()}


class RecurrentClassifier(_NeuralClassifier):
    """Dropout, (bidirectional) LSTM, dense tanh layer and softmax output"""

    kind = ModelKind.LSTM
    bidirectional = False

    @property
    def directions(self) -> Tuple[str, ...]:
        return ("forward", "backward") if self.bidirectional else ("lstm",)

    def build(self, rng: np.random.Generator, data: DatasetSplit) -> None:
        dim, units, hidden = self.spec.dim, self.spec.lstm_units, self.spec.hidden
        for direction in self.directions:
            for name, value in LSTMWeights.initialize(dim, units, rng).as_dict(direction).items():
                self._add(name, value)
        features = units * len(self.directions)
        self._add("dense.weights", glorot_uniform(rng, features, hidden, (hidden, features)))
        self._add("dense.bias", np.zeros(hidden))
        self._add("output.weights", glorot_uniform(rng, hidden, self.scheme.num_labels, (self.scheme.num_labels, hidden)))
        self._add("output.bias", np.zeros(self.scheme.num_labels))

    def _weights(self, direction: str) -> LSTMWeights:
        return LSTMWeights(self.value(f"{direction}.input_weights"), self.value(f"{direction}.recurrent_weights"), self.value(f"{direction}.bias"))

    def forward(self, inputs: np.ndarray, mask: np.ndarray, training: bool, rng: Optional[np.random.Generator]) -> Tuple[np.ndarray, tuple]:
        dropped, dropout_mask = dropout_apply(inputs, self.spec.dropout, training, rng)
        if self.bidirectional:
            final, recurrent_cache = bilstm_sequence(self._weights("forward"), self._weights("backward"), dropped, mask)
        else:
            _, final, recurrent_cache = lstm_sequence(self._weights("lstm"), dropped, mask)
        hidden, dense_cache = dense_apply(self.value("dense.weights"), self.value("dense.bias"), final, "tanh")
        logits, output_cache = dense_apply(self.value("output.weights"), self.value("output.bias"), hidden)
        return logits, (dropout_mask, recurrent_cache, dense_cache, output_cache)

    def backward(self, cache: tuple, grad_logits: np.ndarray) -> np.ndarray:
        dropout_mask, recurrent_cache, dense_cache, output_cache = cache
        grad_hidden, grad_weights, grad_bias = dense_backward(output_cache, grad_logits)
        self._accumulate("output", {"weights": grad_weights, "bias": grad_bias})
        grad_final, grad_weights, grad_bias = dense_backward(dense_cache, grad_hidden)
        self._accumulate("dense", {"weights": grad_weights, "bias": grad_bias})
        if self.bidirectional:
            grad_dropped, forward_grads, backward_grads = bilstm_backward(recurrent_cache, grad_final)
            direction_grads = {"forward": forward_grads, "backward": backward_grads}
        else:
            grad_dropped, lstm_grads = lstm_backward(recurrent_cache, grad_final=grad_final)
            direction_grads = {"lstm": lstm_grads}
        for direction, grads in direction_grads.items():
            for name, gradient in grads.as_dict(direction).items():
                self.params[name].grad += gradient
        return dropout_backward(grad_dropped, dropout_mask)


class BidirectionalClassifier(RecurrentClassifier):
    """RecurrentClassifier over the concatenated final states of both reading directions"""

    kind = ModelKind.BILSTM
    bidirectional = True


class ConvolutionalClassifier(_NeuralClassifier):
    """Dropout, convolutions of widths 2, 3 and 4 with max-pooling, dropout, dense ReLU layer and softmax output

    Notes:
        - Inputs are padded to max_length, the longest training text. Longer texts are cut to it at prediction time and a warning is logged.
    """

    kind = ModelKind.CNN
    widths = (2, 3, 4)

    def __init__(self, spec: ModelSpec, scheme: LabelScheme):
        super().__init__(spec, scheme)
        self.max_length = max(self.widths)

    def sequence_length(self, lengths: Sequence[int]) -> int:
        return self.max_length

    def _feature_size(self) -> int:
        return sum(-(-(self.max_length - width + 1) // 2) * self.spec.num_filters for width in self.widths)

    def predict(self, examples: Sequence[Example]) -> np.ndarray:
        truncated = sum(len(_tokens(example)) > self.max_length for example in examples)
        if truncated:
            sentibench_logger.warning("Truncating texts longer than the longest training text", kind=self.kind.value, max_length=self.max_length, truncated=truncated)
        return super().predict(examples)

    def build(self, rng: np.random.Generator, data: DatasetSplit) -> None:
        self.max_length = max([max(self.widths)] + [len(example.tokens) for example in data.train])
        dim, filters, hidden = self.spec.dim, self.spec.num_filters, self.spec.hidden
        for width in self.widths:
            self._add(f"conv{width}.weights", glorot_uniform(rng, width * dim, filters, (filters, width, dim)))
            self._add(f"conv{width}.bias", np.zeros(filters))
        features = self._feature_size()
        self._add("dense.weights", glorot_uniform(rng, features, hidden, (hidden, features)))
        self._add("dense.bias", np.zeros(hidden))
        self._add("output.weights", glorot_uniform(rng, hidden, self.scheme.num_labels, (self.scheme.num_labels, hidden)))
        self._add("output.bias", np.zeros(self.scheme.num_labels))

    def forward(self, inputs: np.ndarray, mask: np.ndarray, training: bool, rng: Optional[np.random.Generator]) -> Tuple[np.ndarray, tuple]:
        filters = {width: (self.value(f"conv{width}.weights"), self.value(f"conv{width}.bias")) for width in self.widths}
        dropped, input_mask = dropout_apply(inputs, self.spec.dropout, training, rng)
        pooled, conv_cache = conv_pool_apply(filters, dropped, mask)
        dropped_pooled, pooled_mask = dropout_apply(pooled, self.spec.dropout, training, rng)
        hidden, dense_cache = dense_apply(self.value("dense.weights"), self.value("dense.bias"), dropped_pooled, "relu")
        logits, output_cache = dense_apply(self.value("output.weights"), self.value("output.bias"), hidden)
        return logits, (input_mask, conv_cache, pooled_mask, dense_cache, output_cache)

    def backward(self, cache: tuple, grad_logits: np.ndarray) -> np.ndarray:
        input_mask, conv_cache, pooled_mask, dense_cache, output_cache = cache
        grad_hidden, grad_weights, grad_bias = dense_backward(output_cache, grad_logits)
        self._accumulate("output", {"weights": grad_weights, "bias": grad_bias})
        grad_pooled, grad_weights, grad_bias = dense_backward(dense_cache, grad_hidden)
        self._accumulate("dense", {"weights": grad_weights, "bias": grad_bias})
        grad_inputs, conv_grads = conv_pool_backward(conv_cache, dropout_backward(grad_pooled, pooled_mask))
        for width, (grad_weights, grad_bias) in conv_grads.items():
            self._accumulate(f"conv{width}", {"weights": grad_weights, "bias": grad_bias})
        return dropout_backward(grad_inputs, input_mask)

    def state(self) -> Tuple[Dict[str, np.ndarray], Dict[str, Any]]:
        arrays, metadata = super().state()
        metadata["max_length"] = self.max_length
        return arrays, metadata

    def restore(self, arrays: Mapping[str, np.ndarray], metadata: Mapping[str, Any]) -> None:
        super().restore(arrays, metadata)
        self.max_length = metadata["max_length"]


CLASSIFIERS: Dict[ModelKind, Type[SentimentClassifier]] = {
    ModelKind.BOW: BowClassifier,
    ModelKind.AVE: AverageClassifier,
    ModelKind.RETROFIT: RetrofitClassifier,
    ModelKind.JOINT: JointClassifier,
    ModelKind.LSTM: RecurrentClassifier,
    ModelKind.BILSTM: BidirectionalClassifier,
    ModelKind.CNN: ConvolutionalClassifier,
}


@dataclass(eq=False)
class TrainedModel:
    """A trained classifier bound to its spec and label scheme"""

    spec: ModelSpec
    scheme: LabelScheme
    classifier: SentimentClassifier
    dev_accuracy: float = 0.0
    metadata: Dict[str, Any] = field(default_factory=dict)

    @property
    def dev_curve(self) -> List[float]:
        return self.classifier.dev_curve

    @property
    def hyperparameters(self) -> Dict[str, Any]:
        return self.classifier.hyperparameters

    def predict(self, examples: Sequence[Example]) -> np.ndarray:
        return self.classifier.predict(examples)

    def save(self, path: Union[str, Path]) -> None:
        """Writes the model in the shared checkpoint format"""
        arrays, classifier_metadata = self.classifier.state()
        metadata = {"spec": self.spec.to_dict(), "num_labels": self.scheme.num_labels, "label_names": list(self.scheme.names), "dev_accuracy": self.dev_accuracy, "classifier": classifier_metadata}
        save_checkpoint(path, arrays, metadata)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "TrainedModel":
        """Reads a model written by save

        Raises:
            CheckpointFormatException: If the file is not a model checkpoint
        """
        arrays, metadata = load_checkpoint(path)
        try:
            spec = ModelSpec.from_dict(metadata["spec"])
            scheme = LabelScheme(num_labels=metadata["num_labels"], names=tuple(metadata["label_names"]))
            classifier = CLASSIFIERS[spec.kind](spec, scheme)
            classifier.restore(arrays, metadata["classifier"])
        except (KeyError, TypeError, ModelSpecException) as format_error:
            raise CheckpointFormatException(f"{path}: checkpoint does not describe a sentiment model") from format_error
        return cls(spec=spec, scheme=scheme, classifier=classifier, dev_accuracy=metadata.get("dev_accuracy", 0.0))


def train_sentiment_model(spec: ModelSpec, data: DatasetSplit, embeddings: Optional[EmbeddingMatrix] = None) -> TrainedModel:
    """Trains the system a spec describes on a dataset split

    Args:
        spec (ModelSpec): The system and its hyperparameters
        data (DatasetSplit): Train, dev and test partitions; dev drives model selection
        embeddings (Optional[EmbeddingMatrix]): Input vectors overriding the spec's embedding source

    Returns:
        TrainedModel: The trained model

    Raises:
        ModelSpecException: If the spec is inconsistent with its kind or the embeddings
        TrainingDivergedException: If an objective turns non-finite
    """
    if embeddings is not None and spec.kind.uses_embeddings:
        _check_dim(embeddings, spec, "Provided embeddings")
    sentibench_logger.info("Training sentiment model", kind=spec.kind.value, dim=spec.dim, dataset=data.name, seed=spec.seed)
    classifier = CLASSIFIERS[spec.kind](spec, data.scheme)
    classifier.fit(data, embeddings)
    dev_accuracy = _accuracy(_labels(data.dev), classifier.predict(data.dev))
    sentibench_logger.info("Training sentiment model succeeded", kind=spec.kind.value, dim=spec.dim, dataset=data.name, seed=spec.seed, dev_accuracy=dev_accuracy, **classifier.hyperparameters)
    return TrainedModel(spec=spec, scheme=data.scheme, classifier=classifier, dev_accuracy=dev_accuracy)


def predict_labels(model: TrainedModel, examples: Sequence[Example]) -> np.ndarray:
    """Predicts labels deterministically with inference-mode dropout"""
    return model.predict(examples)
