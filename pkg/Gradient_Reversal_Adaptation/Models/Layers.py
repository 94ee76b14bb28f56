from dataclasses import dataclass, field
from typing import Callable, Final, Optional, Sequence

import logging
import numpy as np

import Gradient_Reversal_Adaptation.Models.Types as Types
import Gradient_Reversal_Adaptation.Models.Exceptions as Exceptions

logger = logging.getLogger(__name__)

EXPONENT_LIMIT: Final[float] = 500.0
"""Arguments of exp in the sigmoid and softmax are clamped to $[-500, 500]$."""
DEFAULT_SLOPE: Final[float] = 0.01
"""Negative slope of the leaky rectifier."""
PROBABILITY_FLOOR: Final[float] = np.finfo(np.float64).tiny
"""Smallest probability passed to the logarithm of the cross-entropy."""


def as_matrix(values, name: str = "matrix") -> np.ndarray:
    """
    Converts the values into a dense 2-D matrix of doubles and checks that all entries are finite.

    Parameters
    ----------
    values
        Anything numpy can turn into a 2-D array.
    name: str
        Name of the matrix used in the error messages.

    Returns
    -------
    numpy.ndarray
        Matrix with dtype float64 (row = sample, column = feature or unit).
    """
    matrix = np.asarray(values, dtype=np.float64)
    if matrix.ndim != 2:
        raise Exceptions.DimensionError(
            f"{name} has to be 2-D (got shape {matrix.shape})"
        )
    return check_finite(matrix, name)


def check_finite(matrix: np.ndarray, name: str = "matrix") -> np.ndarray:
    """
    Raises a Gradient_Reversal_Adaptation.Models.Exceptions.NumericError if the matrix holds NaN or Inf.
    """
    if not np.all(np.isfinite(matrix)):
        raise Exceptions.NumericError(f"{name} contains non-finite values")
    return matrix


def affine_forward(
    inputs: np.ndarray, weights: np.ndarray, bias: np.ndarray
) -> np.ndarray:
    """
    Computes $XW + b$ for a batch of row vectors.

    Parameters
    ----------
    inputs: numpy.ndarray
        Batch of shape (rows, weights.rows).
    weights: numpy.ndarray
        Weight matrix of shape (in, out).
    bias: numpy.ndarray
        Bias row of shape (1, out).

    Returns
    -------
    numpy.ndarray
        Matrix of shape (rows, out).
    """
    if inputs.ndim != 2 or weights.ndim != 2 or inputs.shape[1] != weights.shape[0]:
        raise Exceptions.DimensionError(
            f"Input of shape {inputs.shape} does not fit weights of shape {weights.shape}"
        )
    if bias.shape != (1, weights.shape[1]):
        raise Exceptions.DimensionError(
            f"Bias of shape {bias.shape} does not fit weights of shape {weights.shape}"
        )
    return check_finite(inputs @ weights + bias, "affine output")


def sigmoid(x: np.ndarray) -> np.ndarray:
    """
    Elementwise logistic function $1/(1+e^{-x})$ with the exponent clamped to avoid overflow.
    """
    return 1.0 / (1.0 + np.exp(-np.clip(x, -EXPONENT_LIMIT, EXPONENT_LIMIT)))


def leaky_relu(x: np.ndarray, slope: float = DEFAULT_SLOPE) -> np.ndarray:
    """
    Elementwise $\\max(x, \\alpha x)$ for a negative slope $\\alpha \\in (0, 1)$.
    """
    check_slope(slope)
    return np.where(x >= 0, x, slope * x)


def check_slope(slope: float) -> None:
    if not 0 < slope < 1:
        raise Exceptions.ConfigError(
            f"Slope of the leaky rectifier has to be in (0, 1) (got {slope})"
        )


def softmax_rows(x: np.ndarray) -> np.ndarray:
    """
    Row-wise softmax. The row maximum is subtracted before exponentiation, therefore rows like [1000, 0] do not
    overflow.
    """
    shifted = x - np.max(x, axis=1, keepdims=True) if x.shape[0] > 0 else x
    exponentials = np.exp(np.clip(shifted, -EXPONENT_LIMIT, EXPONENT_LIMIT))
    return exponentials / np.sum(exponentials, axis=1, keepdims=True)


def activate(
    x: np.ndarray, activation: Types.Activation, slope: float = DEFAULT_SLOPE
) -> np.ndarray:
    """
    Applies the given activation function.
    """
    if activation is Types.Activation.Sigmoid:
        return sigmoid(x)
    if activation is Types.Activation.LeakyReLU:
        return leaky_relu(x, slope)
    if activation is Types.Activation.Softmax:
        return softmax_rows(x)
    return x


def _check_labels(probs: np.ndarray, labels) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if labels.shape[0] != probs.shape[0]:
        raise Exceptions.DimensionError(
            f"{labels.shape[0]} labels for {probs.shape[0]} rows of probabilities"
        )
    if labels.size and (labels.min() < 0 or labels.max() >= probs.shape[1]):
        raise Exceptions.LabelError(
            f"Labels have to be in [0, {probs.shape[1]}) (got {labels.min()}..{labels.max()})"
        )
    return labels


def cross_entropy_loss(probs: np.ndarray, labels) -> float:
    """
    Mean negative log-probability of the true classes, $-\\frac{1}{N}\\sum_i \\log P(\\hat{y}_i = y_i)$.

    Parameters
    ----------
    probs: numpy.ndarray
        Row-stochastic matrix of shape (N, classes).
    labels
        Class index for every row.

    Returns
    -------
    float
        Non-negative loss.
    """
    labels = _check_labels(probs, labels)
    if labels.size == 0:
        raise Exceptions.DataError("Cross-entropy of an empty batch is undefined")
    true_class = probs[np.arange(labels.size), labels]
    return float(-np.mean(np.log(np.maximum(true_class, PROBABILITY_FLOOR))))


def cross_entropy_grad(probs: np.ndarray, labels, normalizer: Optional[int] = None):
    """
    Gradient of the cross-entropy with respect to the probabilities.

    Parameters
    ----------
    probs: numpy.ndarray
        Row-stochastic matrix of shape (N, classes).
    labels
        Class index for every row.
    normalizer: Optional[int]
        Count the loss is averaged over, defaults to the number of rows.

    Returns
    -------
    numpy.ndarray
        Matrix shaped like probs, non-zero only at the true classes.
    """
    labels = _check_labels(probs, labels)
    normalizer = labels.size if normalizer is None else normalizer
    grad = np.zeros_like(probs)
    if labels.size == 0:
        return grad
    rows = np.arange(labels.size)
    grad[rows, labels] = -1.0 / (
        normalizer * np.maximum(probs[rows, labels], PROBABILITY_FLOOR)
    )
    return grad


class DenseLayer:
    """
    Fully connected layer $a = \\sigma(XW + b)$.

    The weights are mutated in place by the optimizer; every mutation has to be followed by touch(), so that forward
    caches computed before the update are recognized as stale.
    """

    def __init__(self, spec: Types.LayerSpec, weights: np.ndarray, bias: np.ndarray):
        if weights.shape != (spec.input_dim, spec.output_dim):
            raise Exceptions.DimensionError(
                f"Weights of shape {weights.shape} do not match the layer {spec.input_dim}x{spec.output_dim}"
            )
        if bias.shape != (1, spec.output_dim):
            raise Exceptions.DimensionError(
                f"Bias of shape {bias.shape} does not match the layer output {spec.output_dim}"
            )
        self.spec = spec
        self.weights = weights
        self.bias = bias
        self.version = 0

    @staticmethod
    def initialize(spec: Types.LayerSpec, rng: np.random.Generator) -> "DenseLayer":
        """
        Draws the weights uniformly from $\\pm\\sqrt{6/(fan_{in}+fan_{out})}$, the bias starts at zero.
        """
        limit = np.sqrt(6.0 / (spec.input_dim + spec.output_dim))
        weights = rng.uniform(-limit, limit, size=(spec.input_dim, spec.output_dim))
        return DenseLayer(spec, weights, np.zeros((1, spec.output_dim)))

    def touch(self) -> None:
        """
        Marks the parameters as changed.
        """
        self.version += 1

    def copy(self) -> "DenseLayer":
        return DenseLayer(self.spec, self.weights.copy(), self.bias.copy())

    @property
    def parameters(self) -> list[np.ndarray]:
        return [self.weights, self.bias]

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, DenseLayer)
            and self.spec == other.spec
            and np.array_equal(self.weights, other.weights)
            and np.array_equal(self.bias, other.bias)
        )


@dataclass
class ForwardCache:
    """
    Activations of a forward pass needed by backward_pass.
    """

    inputs: list[np.ndarray] = field(default_factory=list)
    pre_activations: list[np.ndarray] = field(default_factory=list)
    outputs: list[np.ndarray] = field(default_factory=list)
    layer_ids: tuple = ()
    versions: tuple = ()


def forward_pass(
    layers: Sequence[DenseLayer], inputs: np.ndarray, slope: float = DEFAULT_SLOPE
) -> (np.ndarray, ForwardCache):
    """
    Propagates a batch through a stack of dense layers.

    Returns
    -------
    numpy.ndarray
        Output of the last layer (or the input itself for an empty stack).
    ForwardCache
        Activations for the backward pass.
    """
    cache = ForwardCache(
        layer_ids=tuple(id(layer) for layer in layers),
        versions=tuple(layer.version for layer in layers),
    )
    x = inputs
    for layer in layers:
        z = affine_forward(x, layer.weights, layer.bias)
        a = check_finite(activate(z, layer.spec.activation, slope), "activation")
        cache.inputs.append(x)
        cache.pre_activations.append(z)
        cache.outputs.append(a)
        x = a
    return x, cache


def _activation_backward(
    grad: np.ndarray,
    z: np.ndarray,
    a: np.ndarray,
    activation: Types.Activation,
    slope: float,
) -> np.ndarray:
    if activation is Types.Activation.Sigmoid:
        return grad * a * (1.0 - a)
    if activation is Types.Activation.LeakyReLU:
        # derivative at exactly 0 is taken from the positive side
        return grad * np.where(z >= 0, 1.0, slope)
    if activation is Types.Activation.Softmax:
        return a * (grad - np.sum(grad * a, axis=1, keepdims=True))
    return grad


def _check_cache(layers: Sequence[DenseLayer], upstream_grad, cache) -> None:
    if cache is None:
        raise Exceptions.StateError("No forward cache available for the backward pass")
    if cache.layer_ids != tuple(id(layer) for layer in layers):
        raise Exceptions.StateError("Forward cache belongs to a different layer stack")
    if cache.versions != tuple(layer.version for layer in layers):
        raise Exceptions.StateError(
            "Forward cache is stale (parameters changed after the forward pass)"
        )
    expected = cache.outputs[-1].shape if cache.outputs else None
    if expected is not None and upstream_grad.shape != expected:
        raise Exceptions.StateError(
            f"Upstream gradient of shape {upstream_grad.shape} does not match the cached output {expected}"
        )


def backward_pass(
    layers: Sequence[DenseLayer],
    upstream_grad: np.ndarray,
    cache: ForwardCache,
    slope: float = DEFAULT_SLOPE,
) -> list[Types.LayerGrads]:
    """
    Backpropagates the gradient of a scalar loss with respect to the stack output.

    Parameters
    ----------
    layers: Sequence[DenseLayer]
        Stack used for the forward pass.
    upstream_grad: numpy.ndarray
        Gradient of the loss with respect to the output of the last layer.
    cache: ForwardCache
        Cache returned by forward_pass for exactly this minibatch and these parameters.
    slope: float
        Negative slope of leaky rectifier layers.

    Returns
    -------
    list[Gradient_Reversal_Adaptation.Models.Types.LayerGrads]
        Gradients for every layer in the order of the stack. The input gradient of the first entry is the gradient with
        respect to the stack input.
    """
    _check_cache(layers, upstream_grad, cache)
    grads: list[Types.LayerGrads] = []
    grad = upstream_grad
    for index in reversed(range(len(layers))):
        layer = layers[index]
        grad_z = _activation_backward(
            grad,
            cache.pre_activations[index],
            cache.outputs[index],
            layer.spec.activation,
            slope,
        )
        input_grad = grad_z @ layer.weights.T
        grads.append(
            Types.LayerGrads(
                weight_grad=cache.inputs[index].T @ grad_z,
                bias_grad=np.sum(grad_z, axis=0, keepdims=True),
                input_grad=input_grad,
            )
        )
        grad = input_grad
    grads.reverse()
    return grads


def finite_diff_grad(
    loss: Callable[[], float], params: Sequence[np.ndarray], h: float = 1e-5
) -> list[np.ndarray]:
    """
    Central finite difference estimate $\\frac{L(\\theta+h)-L(\\theta-h)}{2h}$ for every entry of the parameters.

    The parameters are perturbed in place and restored afterwards; the closure has to read them on every call.

    Parameters
    ----------
    loss: Callable[[], float]
        Deterministic closure evaluating the scalar loss for the current parameter values.
    params: Sequence[numpy.ndarray]
        Parameter arrays to differentiate.
    h: float
        Step size.

    Returns
    -------
    list[numpy.ndarray]
        Gradient estimate for every parameter array.
    """
    if h <= 0:
        raise Exceptions.ConfigError(f"Step size has to be positive (got {h})")
    if loss() != loss():
        raise Exceptions.OracleInvalidError("Loss closure is not deterministic")
    estimates = []
    for param in params:
        estimate = np.zeros_like(param, dtype=np.float64)
        for index in np.ndindex(param.shape):
            original = param[index]
            param[index] = original + h
            upper = loss()
            param[index] = original - h
            lower = loss()
            param[index] = original
            estimate[index] = (upper - lower) / (2 * h)
        estimates.append(estimate)
    return estimates


def relative_error(analytic: Sequence[np.ndarray], numeric: Sequence[np.ndarray]) -> float:
    """
    Largest relative deviation $\\frac{\\|a-n\\|}{\\max(\\|a\\|+\\|n\\|, 10^{-12})}$ over pairs of gradient arrays.
    """
    worst = 0.0
    for a, n in zip(analytic, numeric):
        scale = max(np.linalg.norm(a) + np.linalg.norm(n), 1e-12)
        worst = max(worst, float(np.linalg.norm(a - n) / scale))
    return worst
