from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple, Union

import numpy as np
from scipy import sparse

from sentibench.exceptions import InvalidDatasetException, InvalidHyperparameterException, ShapeMismatchException, TrainingDivergedException
from sentibench.logger import sentibench_logger

LOGISTIC = "logistic"
HINGE = "hinge"

Features = Union[np.ndarray, sparse.spmatrix]


@dataclass(frozen=True)
class LinearConfig:
    """Schedule of the full-batch gradient descent shared by both linear models

    Notes:
        - A step is accepted when it does not increase the objective; the step size then grows
          by growth, otherwise it is halved and the step retried.
    """

    max_iterations: int = 1000
    initial_step: float = 1.0
    growth: float = 1.1
    tolerance: float = 1e-6
    min_step: float = 1e-12

    def __post_init__(self):
        if self.max_iterations < 0 or self.initial_step <= 0 or self.growth < 1.0:
            raise InvalidHyperparameterException("max_iterations must be >= 0, initial_step > 0 and growth >= 1")


@dataclass(eq=False)
class LinearModel:
    """Class-score model: scores = features @ weights.T + bias"""

    weights: np.ndarray
    bias: np.ndarray
    l2: float
    loss: str
    objective_history: List[float] = field(default_factory=list)

    def __post_init__(self):
        if self.l2 < 0:
            raise InvalidHyperparameterException(f"l2 must be >= 0, got {self.l2}")
        if self.loss not in (LOGISTIC, HINGE):
            raise InvalidHyperparameterException(f"Unknown loss '{self.loss}'")
        if self.weights.ndim != 2 or self.bias.shape != (self.weights.shape[0],):
            raise ShapeMismatchException(f"Weights {self.weights.shape} and bias {self.bias.shape} do not conform")
        if not np.all(np.isfinite(self.weights)):
            raise TrainingDivergedException("Linear model weights are not finite")

    @property
    def num_classes(self) -> int:
        return int(self.weights.shape[0])

    @property
    def num_features(self) -> int:
        return int(self.weights.shape[1])


def _validate(features: Features, labels: np.ndarray, num_classes: Optional[int]) -> Tuple[np.ndarray, int]:
    labels = np.asarray(labels, dtype=np.int64)
    if features.ndim != 2 or features.shape[0] < 1:
        raise ShapeMismatchException(f"Features must be a non-empty n x d matrix, got shape {features.shape}")
    if labels.shape != (features.shape[0],):
        raise ShapeMismatchException(f"{labels.shape[0]} labels for {features.shape[0]} feature rows")
    num_classes = int(labels.max()) + 1 if num_classes is None else num_classes
    if labels.min() < 0 or labels.max() >= num_classes:
        raise InvalidDatasetException(f"Labels must lie in [0, {num_classes})")
    return labels, num_classes


def _single_class_model(labels: np.ndarray, num_features: int, num_classes: int, l2: float, loss: str) -> Optional[LinearModel]:
    present = np.unique(labels)
    if len(present) > 1:
        return None
    sentibench_logger.warning("Training data has a single class, the model predicts it constantly", label=int(present[0]))
    bias = np.zeros(num_classes)
    bias[present[0]] = 1.0
    return LinearModel(weights=np.zeros((num_classes, num_features)), bias=bias, l2=l2, loss=loss)


def _descend(objective: Callable[[np.ndarray, np.ndarray], Tuple[float, np.ndarray, np.ndarray]], weights: np.ndarray, bias: np.ndarray, config: LinearConfig) -> Tuple[np.ndarray, np.ndarray, List[float]]:
    value, grad_weights, grad_bias = objective(weights, bias)
    history = [value]
    step = config.initial_step
    for _ in range(config.max_iterations):
        if not np.isfinite(value):
            raise TrainingDivergedException(f"Objective became {value}")
        if np.sqrt(np.sum(grad_weights**2) + np.sum(grad_bias**2)) < config.tolerance:
            break
        while step >= config.min_step:
            candidate_weights = weights - step * grad_weights
            candidate_bias = bias - step * grad_bias
            candidate_value, candidate_grad_weights, candidate_grad_bias = objective(candidate_weights, candidate_bias)
            if np.isfinite(candidate_value) and candidate_value <= value:
                break
            step *= 0.5
        else:
            break
        weights, bias, value = candidate_weights, candidate_bias, candidate_value
        grad_weights, grad_bias = candidate_grad_weights, candidate_grad_bias
        history.append(value)
        step *= config.growth
    return weights, bias, history


def train_logreg(features: Features, labels: np.ndarray, l2: float, config: Optional[LinearConfig] = None, num_classes: Optional[int] = None) -> LinearModel:
    """Trains multinomial logistic regression with an L2 penalty on the weights

    Args:
        features (Features): n x d dense or sparse feature matrix
        labels (np.ndarray): n class indices
        l2 (float): Penalty strength lambda; the objective is mean cross-entropy + lambda / 2 * |W|^2
        config (Optional[LinearConfig]): The descent schedule
        num_classes (Optional[int]): Number of classes. Defaults to the largest label + 1.

    Returns:
        LinearModel: The trained model; objective_history is non-increasing

    Raises:
        TrainingDivergedException: If the objective turns non-finite
    """
    config = config if config is not None else LinearConfig()
    if l2 < 0:
        raise InvalidHyperparameterException(f"l2 must be >= 0, got {l2}")
    labels, num_classes = _validate(features, labels, num_classes)
    single = _single_class_model(labels, features.shape[1], num_classes, l2, LOGISTIC)
    if single is not None:
        return single

    size = features.shape[0]
    onehot = np.zeros((size, num_classes))
    onehot[np.arange(size), labels] = 1.0

    def _objective(weights: np.ndarray, bias: np.ndarray) -> Tuple[float, np.ndarray, np.ndarray]:
        scores = np.asarray(features @ weights.T) + bias
        scores -= scores.max(axis=1, keepdims=True)
        log_probabilities = scores - np.log(np.exp(scores).sum(axis=1, keepdims=True))
        value = -float(np.sum(onehot * log_probabilities)) / size + 0.5 * l2 * float(np.sum(weights**2))
        residual = (np.exp(log_probabilities) - onehot) / size
        return value, np.asarray(features.T @ residual).T + l2 * weights, residual.sum(axis=0)

    weights, bias, history = _descend(_objective, np.zeros((num_classes, features.shape[1])), np.zeros(num_classes), config)
    sentibench_logger.debug("Training logistic regression succeeded", l2=l2, iterations=len(history) - 1, objective=history[-1])
    return LinearModel(weights=weights, bias=bias, l2=l2, loss=LOGISTIC, objective_history=history)


def train_binary_svm(features: Features, signs: np.ndarray, l2: float, config: Optional[LinearConfig] = None) -> Tuple[np.ndarray, float, List[float]]:
    """Minimizes mean hinge loss + lambda / 2 * |w|^2 for +1/-1 targets by subgradient descent

    Returns:
        Tuple[np.ndarray, float, List[float]]: The weight vector, the bias and the objective history
    """
    config = config if config is not None else LinearConfig()
    signs = np.asarray(signs, dtype=np.float64)
    size = features.shape[0]

    def _objective(weights: np.ndarray, bias: np.ndarray) -> Tuple[float, np.ndarray, np.ndarray]:
        margins = signs * (np.asarray(features @ weights[0]) + bias[0])
        violated = (margins < 1.0).astype(np.float64)
        value = float(np.sum(np.maximum(0.0, 1.0 - margins))) / size + 0.5 * l2 * float(np.sum(weights**2))
        coefficients = -(violated * signs) / size
        grad_weights = np.asarray(features.T @ coefficients).reshape(1, -1) + l2 * weights
        return value, grad_weights, np.array([coefficients.sum()])

    weights, bias, history = _descend(_objective, np.zeros((1, features.shape[1])), np.zeros(1), config)
    return weights[0], float(bias[0]), history


def train_svm(features: Features, labels: np.ndarray, l2: float, config: Optional[LinearConfig] = None, num_classes: Optional[int] = None) -> LinearModel:
    """Trains a one-vs-rest linear SVM with the standard hinge loss

    Args:
        features (Features): n x d dense or sparse feature matrix
        labels (np.ndarray): n class indices
        l2 (float): Penalty strength lambda of every binary problem
        config (Optional[LinearConfig]): The descent schedule
        num_classes (Optional[int]): Number of classes. Defaults to the largest label + 1.

    Returns:
        LinearModel: One weight row per class; objective_history sums the binary objectives

    Raises:
        TrainingDivergedException: If an objective turns non-finite
    """
    if l2 < 0:
        raise InvalidHyperparameterException(f"l2 must be >= 0, got {l2}")
    labels, num_classes = _validate(features, labels, num_classes)
    single = _single_class_model(labels, features.shape[1], num_classes, l2, HINGE)
    if single is not None:
        return single

    rows, biases, histories = [], [], []
    for label in range(num_classes):
        weights, bias, history = train_binary_svm(features, np.where(labels == label, 1.0, -1.0), l2, config)
        rows.append(weights)
        biases.append(bias)
        histories.append(history)
    length = max(len(history) for history in histories)
    combined = [sum(history[min(step, len(history) - 1)] for history in histories) for step in range(length)]
    sentibench_logger.debug("Training linear SVM succeeded", l2=l2, classes=num_classes, objective=combined[-1])
    return LinearModel(weights=np.stack(rows), bias=np.array(biases), l2=l2, loss=HINGE, objective_history=combined)


def decision_scores(model: LinearModel, features: Features) -> np.ndarray:
    """Returns the n x C class scores

    Raises:
        ShapeMismatchException: If the feature dimension does not match the model
    """
    if features.ndim != 2 or features.shape[1] != model.num_features:
        raise ShapeMismatchException(f"Model expects {model.num_features} features, got shape {features.shape}")
    return np.asarray(features @ model.weights.T) + model.bias


def predict_linear(model: LinearModel, features: Features) -> np.ndarray:
    """Predicts the argmax class per row; ties go to the lowest class index"""
    return np.argmax(decision_scores(model, features), axis=1)
