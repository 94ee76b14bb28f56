from dataclasses import dataclass
from typing import Optional, Sequence

import logging
import numpy as np

import Gradient_Reversal_Adaptation.Models.Types as Types
import Gradient_Reversal_Adaptation.Models.Layers as Layers
import Gradient_Reversal_Adaptation.Models.Exceptions as Exceptions

logger = logging.getLogger(__name__)


def grl_forward(x: np.ndarray) -> np.ndarray:
    """
    Forward pass of the gradient reversal layer: the input is passed intact to the output.
    """
    return x


def grl_backward(g: np.ndarray, lambda_effective: float) -> np.ndarray:
    """
    Backward pass of the gradient reversal layer: the incoming gradient is negated and scaled, $-\\lambda_e g$.
    """
    if lambda_effective < 0:
        raise Exceptions.ConfigError(
            f"Gradient reversal coefficient has to be non-negative (got {lambda_effective})"
        )
    return -lambda_effective * g


@dataclass
class GrlNode:
    """
    Gradient reversal layer between the feature layer and the domain classifier.

    The coefficient is set to the value of the current epoch by the adaptation stage.
    """

    lambda_effective: float = 0.0

    def forward(self, x: np.ndarray) -> np.ndarray:
        return grl_forward(x)

    def backward(self, g: np.ndarray) -> np.ndarray:
        return grl_backward(g, self.lambda_effective)


class NetworkParams:
    """
    Acoustic model split into three parameter groups.

    | Group         | Symbol       | Layers                                          |
    |---------------|--------------|-------------------------------------------------|
    | shared        | $\\theta_f$  | hidden layers 1..f (feature extractor)          |
    | senone_head   | $\\theta_y$  | hidden layers f+1..L and the softmax output      |
    | domain_head   | $\\theta_d$  | leaky rectifier layers and the 2-way softmax     |

    As long as no feature layer is set (training stage), every layer belongs to the senone head.
    """

    def __init__(
        self,
        main_layers: Sequence[Layers.DenseLayer],
        domain_layers: Optional[Sequence[Layers.DenseLayer]] = None,
        feature_layer_index: Optional[int] = None,
        slope: float = Layers.DEFAULT_SLOPE,
    ):
        self.main_layers: list[Layers.DenseLayer] = list(main_layers)
        self.domain_layers: Optional[list[Layers.DenseLayer]] = (
            None if domain_layers is None else list(domain_layers)
        )
        self.feature_layer_index = feature_layer_index
        self.slope = slope
        self.grl = GrlNode()
        self._check_partition()

    def _check_partition(self) -> None:
        assert len(self.main_layers) >= 2, "Main network needs hidden and output layers"
        for previous, current in zip(self.main_layers, self.main_layers[1:]):
            if previous.spec.output_dim != current.spec.input_dim:
                raise Exceptions.DimensionError(
                    f"Layer output {previous.spec.output_dim} does not feed layer input {current.spec.input_dim}"
                )
        if self.main_layers[-1].spec.activation is not Types.Activation.Softmax:
            raise Exceptions.ConfigError("Senone classifier has to end with a softmax")
        for layer in self.main_layers[:-1]:
            if layer.spec.activation is Types.Activation.Softmax:
                raise Exceptions.ConfigError("Softmax is only allowed as last activation")
        if self.feature_layer_index is not None and not (
            1 <= self.feature_layer_index <= self.hidden_layer_count
        ):
            raise Exceptions.ConfigError(
                f"Feature layer index has to be in [1, {self.hidden_layer_count}] (got {self.feature_layer_index})"
            )
        if self.domain_layers is not None:
            if self.feature_layer_index is None:
                raise Exceptions.StateError("Domain classifier needs a feature layer")
            if self.domain_layers[0].spec.input_dim != self.feature_dim:
                raise Exceptions.DimensionError(
                    f"Domain classifier input {self.domain_layers[0].spec.input_dim} does not match the feature "
                    f"layer output {self.feature_dim}"
                )
            if self.domain_layers[-1].spec.output_dim != 2:
                raise Exceptions.ConfigError("Domain classifier needs exactly 2 outputs")

    @property
    def hidden_layer_count(self) -> int:
        return len(self.main_layers) - 1

    @property
    def n_input(self) -> int:
        return self.main_layers[0].spec.input_dim

    @property
    def n_classes(self) -> int:
        return self.main_layers[-1].spec.output_dim

    @property
    def shared(self) -> list[Layers.DenseLayer]:
        """
        ($\\theta_f$) Hidden layers 1..f.
        """
        return self.main_layers[: self.feature_layer_index or 0]

    @property
    def senone_head(self) -> list[Layers.DenseLayer]:
        """
        ($\\theta_y$) Hidden layers f+1..L and the output layer.
        """
        return self.main_layers[self.feature_layer_index or 0 :]

    @property
    def domain_head(self) -> Optional[list[Layers.DenseLayer]]:
        """
        ($\\theta_d$) Layers of the domain classifier or None, if no domain classifier is attached.
        """
        return self.domain_layers

    @property
    def has_domain_head(self) -> bool:
        return self.domain_layers is not None

    @property
    def feature_dim(self) -> int:
        """
        Output dimension of the feature layer.
        """
        if self.feature_layer_index is None:
            raise Exceptions.StateError("No feature layer set")
        return self.main_layers[self.feature_layer_index - 1].spec.output_dim

    @property
    def parameter_count(self) -> int:
        """
        Number of weights and biases of the main network (without the domain classifier).
        """
        return sum(layer.spec.parameter_count for layer in self.main_layers)

    def parameter_groups(self) -> dict[str, np.ndarray]:
        """
        Returns every parameter array keyed by a stable name, e.g. "shared.0.weights" or "domain.1.bias".
        """
        groups = {}
        for prefix, layers in [
            ("shared", self.shared),
            ("senone", self.senone_head),
            ("domain", self.domain_layers or []),
        ]:
            for index, layer in enumerate(layers):
                groups[f"{prefix}.{index}.weights"] = layer.weights
                groups[f"{prefix}.{index}.bias"] = layer.bias
        return groups

    def touch(self) -> None:
        for layer in self.main_layers + (self.domain_layers or []):
            layer.touch()

    def copy(self) -> "NetworkParams":
        """
        Deep copy of all parameters.
        """
        return NetworkParams(
            main_layers=[layer.copy() for layer in self.main_layers],
            domain_layers=None
            if self.domain_layers is None
            else [layer.copy() for layer in self.domain_layers],
            feature_layer_index=self.feature_layer_index,
            slope=self.slope,
        )

    def forward(self, x: np.ndarray) -> np.ndarray:
        """
        Senone posteriors for a batch of frames.
        """
        probs, _ = Layers.forward_pass(self.main_layers, x, self.slope)
        return probs

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, NetworkParams)
            and self.main_layers == other.main_layers
            and self.domain_layers == other.domain_layers
            and self.feature_layer_index == other.feature_layer_index
            and self.slope == other.slope
        )


def count_parameters(n_input: int, hidden: Sequence[int], n_classes: int) -> int:
    """
    Number of weights and biases of a fully connected network with the given widths.
    """
    widths = [n_input] + list(hidden) + [n_classes]
    return sum(w_in * w_out + w_out for w_in, w_out in zip(widths, widths[1:]))


def build_main_network(
    n_input: int, n_classes: int, hidden: Sequence[int], seed: int = 0
) -> NetworkParams:
    """
    Builds the senone classifier: sigmoid hidden layers of the given widths and a softmax output layer.

    Parameters
    ----------
    n_input: int
        Dimension of the spliced input features.
    n_classes: int
        Number of senone classes.
    hidden: Sequence[int]
        Widths of the hidden layers.
    seed: int
        Seed of the weight initialization.

    Returns
    -------
    NetworkParams
        Network without domain classifier and without feature layer.
    """
    if len(hidden) == 0:
        raise Exceptions.ConfigError("At least one hidden layer is required")
    if n_input < 1 or n_classes < 1:
        raise Exceptions.ConfigError("Input and output dimensions have to be at least 1")
    rng = np.random.default_rng(seed)
    widths = [n_input] + list(hidden)
    layers = [
        Layers.DenseLayer.initialize(
            Types.LayerSpec(w_in, w_out, Types.Activation.Sigmoid), rng
        )
        for w_in, w_out in zip(widths, widths[1:])
    ]
    layers.append(
        Layers.DenseLayer.initialize(
            Types.LayerSpec(widths[-1], n_classes, Types.Activation.Softmax), rng
        )
    )
    logger.debug(
        "Built main network %s -> %s -> %d", n_input, list(hidden), n_classes
    )
    return NetworkParams(layers)


def attach_domain_head(
    net: NetworkParams,
    f: int,
    widths: Sequence[int],
    slope: float = Layers.DEFAULT_SLOPE,
    seed: int = 0,
) -> NetworkParams:
    """
    Attaches a freshly initialized domain classifier behind hidden layer f through a gradient reversal layer.

    Parameters
    ----------
    net: NetworkParams
        Trained network without domain classifier.
    f: int
        Index of the feature layer (1-based).
    widths: Sequence[int]
        Widths of the leaky rectifier hidden layers of the domain classifier.
    slope: float
        Negative slope of the leaky rectifier.
    seed: int
        Seed of the weight initialization.

    Returns
    -------
    NetworkParams
        Copy of the network with the partition $\\theta_f$, $\\theta_y$, $\\theta_d$.
    """
    if net.has_domain_head:
        raise Exceptions.StateError("Network already has a domain classifier")
    if not 1 <= f <= net.hidden_layer_count:
        raise Exceptions.ConfigError(
            f"Feature layer index has to be in [1, {net.hidden_layer_count}] (got {f})"
        )
    Layers.check_slope(slope)
    rng = np.random.default_rng(seed)
    adapted = net.copy()
    adapted.feature_layer_index = f
    adapted.slope = slope
    dims = [adapted.feature_dim] + list(widths)
    domain_layers = [
        Layers.DenseLayer.initialize(
            Types.LayerSpec(w_in, w_out, Types.Activation.LeakyReLU), rng
        )
        for w_in, w_out in zip(dims, dims[1:])
    ]
    domain_layers.append(
        Layers.DenseLayer.initialize(
            Types.LayerSpec(dims[-1], 2, Types.Activation.Softmax), rng
        )
    )
    adapted.domain_layers = domain_layers
    adapted._check_partition()
    return adapted


def detach_domain_head(net: NetworkParams) -> NetworkParams:
    """
    Removes the domain classifier; the senone path is left untouched.
    """
    if not net.has_domain_head:
        raise Exceptions.StateError("Network has no domain classifier")
    detached = net.copy()
    detached.domain_layers = None
    return detached
