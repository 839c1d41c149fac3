"""Differentiable building blocks of the neural classifiers

Every forward function returns its output together with a cache; the matching backward function
consumes that cache and the upstream gradient. Arrays are 64-bit floats throughout. Batched
inputs are laid out batch-first (B x T x d).
"""
from dataclasses import dataclass, field
from typing import Callable, Dict, Mapping, Optional, Sequence, Tuple

import numpy as np

from sentibench.exceptions import InvalidHyperparameterException, MetricInputException, ShapeMismatchException

ACTIVATIONS = ("linear", "tanh", "relu")
CONV_WIDTHS = (2, 3, 4)
POOL_SIZE = 2


@dataclass(eq=False)
class Parameter:
    """A named trainable array together with its gradient"""

    name: str
    value: np.ndarray
    grad: Optional[np.ndarray] = None
    trainable: bool = True

    def __post_init__(self):
        self.value = np.asarray(self.value, dtype=np.float64)
        if self.grad is None:
            self.grad = np.zeros_like(self.value)
        if self.grad.shape != self.value.shape:
            raise ShapeMismatchException(f"Gradient of {self.name} has shape {self.grad.shape}, value has {self.value.shape}")

    def zero_grad(self) -> None:
        self.grad[...] = 0.0


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int, shape: Tuple[int, ...]) -> np.ndarray:
    """Uniform initialization in +-sqrt(6 / (fan_in + fan_out))"""
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def _sigmoid(values: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * values))


# Dense


def dense_apply(weights: np.ndarray, bias: np.ndarray, x: np.ndarray, activation: str = "linear") -> Tuple[np.ndarray, tuple]:
    """Computes activation(W x + b) for a single vector or a batch of row vectors

    Args:
        weights (np.ndarray): out x in matrix
        bias (np.ndarray): out vector
        x (np.ndarray): in vector or B x in batch
        activation (str): One of "linear", "tanh", "relu"

    Returns:
        Tuple[np.ndarray, tuple]: The output (shaped like x with out columns) and the backward cache

    Raises:
        ShapeMismatchException: If the shapes do not conform
    """
    if activation not in ACTIVATIONS:
        raise InvalidHyperparameterException(f"Unknown activation '{activation}', expected one of {ACTIVATIONS}")
    if weights.ndim != 2 or bias.shape != (weights.shape[0],) or np.shape(x)[-1] != weights.shape[1]:
        raise ShapeMismatchException(f"Dense layer {weights.shape} with bias {bias.shape} cannot be applied to input {np.shape(x)}")
    single = np.ndim(x) == 1
    inputs = np.atleast_2d(x)
    pre_activation = inputs @ weights.T + bias
    if activation == "tanh":
        output = np.tanh(pre_activation)
    elif activation == "relu":
        output = np.maximum(pre_activation, 0.0)
    else:
        output = pre_activation
    cache = (weights, inputs, pre_activation, output, activation, single)
    return (output[0] if single else output), cache


def dense_backward(cache: tuple, grad_output: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Returns the gradients with respect to x, W and b"""
    weights, inputs, pre_activation, output, activation, single = cache
    grad = np.atleast_2d(grad_output)
    if activation == "tanh":
        grad = grad * (1.0 - output**2)
    elif activation == "relu":
        grad = grad * (pre_activation > 0)
    grad_inputs = grad @ weights
    return (grad_inputs[0] if single else grad_inputs), grad.T @ inputs, grad.sum(axis=0)


# LSTM


@dataclass(eq=False)
class LSTMWeights:
    """Single-layer LSTM weights with gates stacked in the order input, forget, output, candidate"""

    input_weights: np.ndarray
    recurrent_weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        hidden = self.recurrent_weights.shape[0]
        if self.recurrent_weights.shape != (hidden, 4 * hidden) or self.input_weights.shape[1] != 4 * hidden or self.bias.shape != (4 * hidden,):
            raise ShapeMismatchException(f"Inconsistent LSTM weights {self.input_weights.shape}, {self.recurrent_weights.shape}, {self.bias.shape}")

    @property
    def hidden_size(self) -> int:
        return int(self.recurrent_weights.shape[0])

    @property
    def input_size(self) -> int:
        return int(self.input_weights.shape[0])

    @classmethod
    def initialize(cls, input_size: int, hidden_size: int, rng: np.random.Generator) -> "LSTMWeights":
        """Glorot-uniform weights, zero biases except a forget-gate bias of 1"""
        bias = np.zeros(4 * hidden_size)
        bias[hidden_size : 2 * hidden_size] = 1.0
        return cls(
            input_weights=glorot_uniform(rng, input_size, 4 * hidden_size, (input_size, 4 * hidden_size)),
            recurrent_weights=glorot_uniform(rng, hidden_size, 4 * hidden_size, (hidden_size, 4 * hidden_size)),
            bias=bias,
        )

    @classmethod
    def zeros(cls, input_size: int, hidden_size: int) -> "LSTMWeights":
        return cls(np.zeros((input_size, 4 * hidden_size)), np.zeros((hidden_size, 4 * hidden_size)), np.zeros(4 * hidden_size))

    def as_dict(self, prefix: str) -> Dict[str, np.ndarray]:
        return {f"{prefix}.input_weights": self.input_weights, f"{prefix}.recurrent_weights": self.recurrent_weights, f"{prefix}.bias": self.bias}


def _lstm_step(weights: LSTMWeights, x: np.ndarray, h_prev: np.ndarray, c_prev: np.ndarray) -> Tuple[np.ndarray, np.ndarray, tuple]:
    hidden = weights.hidden_size
    z = x @ weights.input_weights + h_prev @ weights.recurrent_weights + weights.bias
    input_gate = _sigmoid(z[:, :hidden])
    forget_gate = _sigmoid(z[:, hidden : 2 * hidden])
    output_gate = _sigmoid(z[:, 2 * hidden : 3 * hidden])
    candidate = np.tanh(z[:, 3 * hidden :])
    cell = forget_gate * c_prev + input_gate * candidate
    cell_tanh = np.tanh(cell)
    return output_gate * cell_tanh, cell, (x, h_prev, c_prev, input_gate, forget_gate, output_gate, candidate, cell_tanh)


def lstm_cell(weights: LSTMWeights, x: np.ndarray, h_prev: np.ndarray, c_prev: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Applies one LSTM step; x, h_prev and c_prev are vectors or batches of row vectors"""
    single = np.ndim(x) == 1
    h, c, _ = _lstm_step(weights, np.atleast_2d(x), np.atleast_2d(h_prev), np.atleast_2d(c_prev))
    return (h[0], c[0]) if single else (h, c)


def lstm_sequence(weights: LSTMWeights, inputs: np.ndarray, mask: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray, tuple]:
    """Runs the LSTM recurrence from a zero state over a sequence or a batch of sequences

    Args:
        weights (LSTMWeights): The LSTM weights
        inputs (np.ndarray): T x d sequence or B x T x d batch
        mask (Optional[np.ndarray]): B x T booleans; at masked steps the state is carried over unchanged

    Returns:
        Tuple[np.ndarray, np.ndarray, tuple]: All hidden states (T x h or B x T x h), the final hidden state and the backward cache

    Raises:
        ShapeMismatchException: If the sequence is empty or the input size does not match the weights
    """
    single = np.ndim(inputs) == 2
    batch = inputs[None] if single else inputs
    if batch.ndim != 3 or batch.shape[1] == 0:
        raise ShapeMismatchException(f"LSTM input must be non-empty T x d or B x T x d, got {np.shape(inputs)}")
    if batch.shape[2] != weights.input_size:
        raise ShapeMismatchException(f"LSTM expects inputs of size {weights.input_size}, got {batch.shape[2]}")
    size, steps, _ = batch.shape
    step_mask = np.ones((size, steps), dtype=bool) if mask is None else np.asarray(mask, dtype=bool).reshape(size, steps)

    h = np.zeros((size, weights.hidden_size))
    c = np.zeros((size, weights.hidden_size))
    hidden_states = np.zeros((size, steps, weights.hidden_size))
    step_caches = []
    for t in range(steps):
        h_new, c_new, step_cache = _lstm_step(weights, batch[:, t], h, c)
        keep = step_mask[:, t, None]
        h = np.where(keep, h_new, h)
        c = np.where(keep, c_new, c)
        hidden_states[:, t] = h
        step_caches.append(step_cache)

    cache = (weights, step_caches, step_mask, single)
    if single:
        return hidden_states[0], h[0], cache
    return hidden_states, h, cache


def lstm_backward(cache: tuple, grad_final: Optional[np.ndarray] = None, grad_hidden_states: Optional[np.ndarray] = None) -> Tuple[np.ndarray, LSTMWeights]:
    """Backpropagates through lstm_sequence

    Args:
        cache (tuple): Cache returned by lstm_sequence
        grad_final (Optional[np.ndarray]): Gradient with respect to the final hidden state
        grad_hidden_states (Optional[np.ndarray]): Gradient with respect to all hidden states

    Returns:
        Tuple[np.ndarray, LSTMWeights]: The input gradient and the weight gradients
    """
    weights, step_caches, step_mask, single = cache
    hidden = weights.hidden_size
    size, steps = step_mask.shape
    grads = LSTMWeights.zeros(weights.input_size, hidden)
    grad_inputs = np.zeros((size, steps, weights.input_size))
    per_step = np.zeros((size, steps, hidden)) if grad_hidden_states is None else np.asarray(grad_hidden_states).reshape(size, steps, hidden)

    dh = np.zeros((size, hidden)) if grad_final is None else np.array(grad_final, dtype=np.float64).reshape(size, hidden)
    dc = np.zeros((size, hidden))
    for t in reversed(range(steps)):
        x, h_prev, c_prev, input_gate, forget_gate, output_gate, candidate, cell_tanh = step_caches[t]
        keep = step_mask[:, t, None].astype(np.float64)
        dh = dh + per_step[:, t]
        dh_new, dc_new = dh * keep, dc * keep
        dh_carry, dc_carry = dh * (1.0 - keep), dc * (1.0 - keep)

        d_output = dh_new * cell_tanh
        dc_new = dc_new + dh_new * output_gate * (1.0 - cell_tanh**2)
        d_input = dc_new * candidate
        d_candidate = dc_new * input_gate
        d_forget = dc_new * c_prev
        dz = np.concatenate(
            [
                d_input * input_gate * (1.0 - input_gate),
                d_forget * forget_gate * (1.0 - forget_gate),
                d_output * output_gate * (1.0 - output_gate),
                d_candidate * (1.0 - candidate**2),
            ],
            axis=1,
        )
        grads.input_weights += x.T @ dz
        grads.recurrent_weights += h_prev.T @ dz
        grads.bias += dz.sum(axis=0)
        grad_inputs[:, t] = dz @ weights.input_weights.T
        dh = dz @ weights.recurrent_weights.T + dh_carry
        dc = dc_new * forget_gate + dc_carry

    return (grad_inputs[0] if single else grad_inputs), grads


def _reversal_index(step_mask: np.ndarray) -> np.ndarray:
    lengths = step_mask.sum(axis=1)
    positions = np.arange(step_mask.shape[1])[None, :]
    return np.where(positions < lengths[:, None], lengths[:, None] - 1 - positions, positions)


def bilstm_sequence(forward_weights: LSTMWeights, backward_weights: LSTMWeights, inputs: np.ndarray, mask: Optional[np.ndarray] = None) -> Tuple[np.ndarray, tuple]:
    """Concatenates the final states of a left-to-right and a right-to-left LSTM

    Args:
        forward_weights (LSTMWeights): Weights of the left-to-right direction
        backward_weights (LSTMWeights): Weights of the right-to-left direction
        inputs (np.ndarray): T x d sequence or B x T x d batch
        mask (Optional[np.ndarray]): B x T booleans marking a valid prefix of each sequence

    Returns:
        Tuple[np.ndarray, tuple]: [forward final; backward final] (2h or B x 2h) and the backward cache
    """
    single = np.ndim(inputs) == 2
    batch = inputs[None] if single else inputs
    if batch.ndim != 3 or batch.shape[1] == 0:
        raise ShapeMismatchException(f"BiLSTM input must be non-empty T x d or B x T x d, got {np.shape(inputs)}")
    step_mask = np.ones(batch.shape[:2], dtype=bool) if mask is None else np.asarray(mask, dtype=bool).reshape(batch.shape[:2])
    rows = np.arange(batch.shape[0])[:, None]
    reversal = _reversal_index(step_mask)

    _, forward_final, forward_cache = lstm_sequence(forward_weights, batch, step_mask)
    _, backward_final, backward_cache = lstm_sequence(backward_weights, batch[rows, reversal], step_mask)
    output = np.concatenate([forward_final, backward_final], axis=1)
    cache = (forward_cache, backward_cache, rows, reversal, forward_weights.hidden_size, single)
    return (output[0] if single else output), cache


def bilstm_backward(cache: tuple, grad_output: np.ndarray) -> Tuple[np.ndarray, LSTMWeights, LSTMWeights]:
    """Returns the input gradient and the weight gradients of both directions"""
    forward_cache, backward_cache, rows, reversal, hidden, single = cache
    grad = np.atleast_2d(grad_output)
    grad_forward_inputs, forward_grads = lstm_backward(forward_cache, grad_final=grad[:, :hidden])
    grad_reversed_inputs, backward_grads = lstm_backward(backward_cache, grad_final=grad[:, hidden:])
    grad_inputs = grad_forward_inputs.copy()
    grad_inputs[rows, reversal] += grad_reversed_inputs
    return (grad_inputs[0] if single else grad_inputs), forward_grads, backward_grads


# Convolution and pooling


def conv_pool_apply(filters: Mapping[int, Tuple[np.ndarray, np.ndarray]], x: np.ndarray, mask: Optional[np.ndarray] = None) -> Tuple[np.ndarray, tuple]:
    """Valid 1-D convolutions followed by max-pooling with window 2 and stride 2

    Args:
        filters (Mapping[int, Tuple[np.ndarray, np.ndarray]]): width -> (F x width x d weights, F bias)
        x (np.ndarray): n x d sequence or B x n x d batch
        mask (Optional[np.ndarray]): B x n booleans; convolution positions starting on a masked token output 0

    Returns:
        Tuple[np.ndarray, tuple]: Pooled features flattened position-major and concatenated in ascending width order, and the backward cache

    Raises:
        ShapeMismatchException: If the sequence is shorter than the widest filter

    Notes:
        - An odd number of convolution positions leaves a final singleton pooling window, whose
          maximum is the value itself.
    """
    single = np.ndim(x) == 2
    batch = x[None] if single else x
    widths = sorted(filters)
    if batch.ndim != 3 or batch.shape[1] < max(widths):
        raise ShapeMismatchException(f"Convolution input of shape {np.shape(x)} is shorter than the widest filter {max(widths)}")
    size, length, dim = batch.shape
    step_mask = np.ones((size, length), dtype=bool) if mask is None else np.asarray(mask, dtype=bool).reshape(size, length)

    outputs, width_caches = [], []
    for width in widths:
        weights, bias = filters[width]
        if weights.shape[1:] != (width, dim) or bias.shape != (weights.shape[0],):
            raise ShapeMismatchException(f"Filters of width {width} have shape {weights.shape} for inputs of size {dim}")
        windows = np.lib.stride_tricks.sliding_window_view(batch, width, axis=1)
        positions = windows.shape[1]
        valid = step_mask[:, :positions, None].astype(np.float64)
        conv = (np.einsum("bpdw,fwd->bpf", windows, weights) + bias) * valid
        padded = np.concatenate([conv, conv[:, -1:]], axis=1) if positions % 2 else conv
        pooled_windows = padded.reshape(size, -1, POOL_SIZE, weights.shape[0])
        winners = pooled_windows.argmax(axis=2)
        pooled = pooled_windows.max(axis=2)
        outputs.append(pooled.reshape(size, -1))
        width_caches.append((width, weights, windows, valid, winners, positions, pooled.shape))

    output = np.concatenate(outputs, axis=1)
    cache = (width_caches, batch.shape, single)
    return (output[0] if single else output), cache


def conv_pool_backward(cache: tuple, grad_output: np.ndarray) -> Tuple[np.ndarray, Dict[int, Tuple[np.ndarray, np.ndarray]]]:
    """Returns the input gradient and width -> (weight gradient, bias gradient)"""
    width_caches, shape, single = cache
    grad = np.atleast_2d(grad_output)
    grad_inputs = np.zeros(shape)
    grads: Dict[int, Tuple[np.ndarray, np.ndarray]] = {}
    offset = 0
    for width, weights, windows, valid, winners, positions, pooled_shape in width_caches:
        size, pools, num_filters = pooled_shape
        grad_pooled = grad[:, offset : offset + pools * num_filters].reshape(pooled_shape)
        offset += pools * num_filters
        grad_padded = np.zeros((size, pools, POOL_SIZE, num_filters))
        np.put_along_axis(grad_padded, winners[:, :, None, :], grad_pooled[:, :, None, :], axis=2)
        grad_conv = grad_padded.reshape(size, pools * POOL_SIZE, num_filters)[:, :positions] * valid
        grads[width] = (np.einsum("bpf,bpdw->fwd", grad_conv, windows), grad_conv.sum(axis=(0, 1)))
        for shift in range(width):
            grad_inputs[:, shift : shift + positions] += grad_conv @ weights[:, shift, :]
    return (grad_inputs[0] if single else grad_inputs), grads


# Output layer, dropout


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax, stabilized by subtracting the row maximum"""
    shifted = logits - np.max(logits, axis=-1, keepdims=True)
    exponentials = np.exp(shifted)
    return exponentials / exponentials.sum(axis=-1, keepdims=True)


def softmax_xent(logits: np.ndarray, gold) -> Tuple[np.ndarray, float]:
    """Softmax probabilities and the mean cross-entropy of the gold classes

    Args:
        logits (np.ndarray): C scores or B x C batch
        gold: A class index or B class indices

    Returns:
        Tuple[np.ndarray, float]: The probabilities (shaped like logits) and the mean of -log p[gold]

    Raises:
        MetricInputException: If a gold index is outside of [0, C)
    """
    single = np.ndim(logits) == 1
    scores = np.atleast_2d(np.asarray(logits, dtype=np.float64))
    labels = np.atleast_1d(np.asarray(gold, dtype=np.int64))
    if len(labels) != len(scores):
        raise ShapeMismatchException(f"{len(labels)} gold labels for {len(scores)} score rows")
    if np.any(labels < 0) or np.any(labels >= scores.shape[1]):
        raise MetricInputException(f"Gold labels must lie in [0, {scores.shape[1]})")
    shifted = scores - scores.max(axis=1, keepdims=True)
    log_probabilities = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    probabilities = np.exp(log_probabilities)
    loss = float(-log_probabilities[np.arange(len(labels)), labels].mean())
    return (probabilities[0] if single else probabilities), loss


def softmax_xent_backward(probabilities: np.ndarray, gold) -> np.ndarray:
    """Gradient of the mean cross-entropy with respect to the logits: (p - onehot(gold)) / B"""
    single = np.ndim(probabilities) == 1
    grad = np.array(np.atleast_2d(probabilities), dtype=np.float64, copy=True)
    labels = np.atleast_1d(np.asarray(gold, dtype=np.int64))
    grad[np.arange(len(labels)), labels] -= 1.0
    grad /= len(labels)
    return grad[0] if single else grad


def dropout_apply(x: np.ndarray, p: float = 0.5, training: bool = False, rng: Optional[np.random.Generator] = None) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    """Inverted dropout: zero with probability p and scale survivors by 1 / (1 - p) in training, identity otherwise

    Returns:
        Tuple[np.ndarray, Optional[np.ndarray]]: The output and the scaling mask (None in inference mode)
    """
    if not 0.0 <= p < 1.0:
        raise InvalidHyperparameterException(f"Dropout probability must be in [0, 1), got {p}")
    if not training or p == 0.0:
        return x, None
    rng = rng if rng is not None else np.random.default_rng()
    mask = (rng.random(np.shape(x)) >= p) / (1.0 - p)
    return x * mask, mask


def dropout_backward(grad_output: np.ndarray, mask: Optional[np.ndarray]) -> np.ndarray:
    return grad_output if mask is None else grad_output * mask


# Optimizer


@dataclass
class AdamState:
    """Moments and hyperparameters of the Adam optimizer"""

    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step: int = 0
    first_moments: Dict[str, np.ndarray] = field(default_factory=dict)
    second_moments: Dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(state: AdamState, params: Sequence[Parameter]) -> Sequence[Parameter]:
    """Applies one bias-corrected Adam update to every trainable parameter in place"""
    state.step += 1
    correction1 = 1.0 - state.beta1**state.step
    correction2 = 1.0 - state.beta2**state.step
    for param in params:
        if not param.trainable:
            continue
        first = state.first_moments.setdefault(param.name, np.zeros_like(param.value))
        second = state.second_moments.setdefault(param.name, np.zeros_like(param.value))
        first *= state.beta1
        first += (1.0 - state.beta1) * param.grad
        second *= state.beta2
        second += (1.0 - state.beta2) * param.grad**2
        param.value -= state.learning_rate * (first / correction1) / (np.sqrt(second / correction2) + state.epsilon)
    return params


# Gradient checking


def numerical_gradient(function: Callable[[], float], array: np.ndarray, step: float = 1e-5) -> np.ndarray:
    """Central finite differences of a scalar function with respect to every entry of an array

    Args:
        function (Callable[[], float]): Evaluates the scalar; reads the array it depends on
        array (np.ndarray): The array, perturbed in place and restored afterwards
        step (float): The perturbation size

    Returns:
        np.ndarray: The estimated gradient, shaped like the array
    """
    gradient = np.zeros_like(array, dtype=np.float64)
    for index in np.ndindex(array.shape):
        original = array[index]
        array[index] = original + step
        upper = function()
        array[index] = original - step
        lower = function()
        array[index] = original
        gradient[index] = (upper - lower) / (2.0 * step)
    return gradient


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Norm-based relative error |a - n| / max(|a| + |n|, 1e-12)"""
    difference = np.linalg.norm(np.asarray(analytic) - np.asarray(numeric))
    return float(difference / max(np.linalg.norm(analytic) + np.linalg.norm(numeric), 1e-12))


def gradient_check(function: Callable[[], float], arrays: Mapping[str, np.ndarray], analytic: Mapping[str, np.ndarray], step: float = 1e-5) -> Dict[str, float]:
    """Relative errors between analytic and numerical gradients, by array name"""
    return {name: relative_error(analytic[name], numerical_gradient(function, array, step)) for name, array in arrays.items()}

