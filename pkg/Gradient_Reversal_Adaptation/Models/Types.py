from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

import Gradient_Reversal_Adaptation.Models.Exceptions as Exceptions


class Activation(Enum):
    """
    Defines the available activation functions of a dense layer.
    """

    Sigmoid = "sigmoid"
    """Logistic function, used for the hidden layers of the senone classifier."""
    LeakyReLU = "leaky_relu"
    """Rectifier with a small negative slope, used for the hidden layers of the domain classifier."""
    Softmax = "softmax"
    """Row-wise normalized exponential, only allowed as the last activation of a head."""
    Identity = "identity"
    """No activation."""

    def __str__(self) -> str:
        return self.value


class Domain(Enum):
    """
    Defines the recording domains of a dataset.

    Domains are numbered 1 (source) and 2 (target) in reports; the domain classifier uses the class indices 0 and 1.
    """

    Source = "source"
    """Labeled clean close-talk recordings."""
    Target = "target"
    """Unlabeled far-field recordings."""
    Mixed = "mixed"
    """Rows from both domains (e.g. the validation set of the adaptation stage)."""

    @property
    def index(self) -> int:
        """
        Class index of the domain for the domain classifier.
        """
        if self is Domain.Source:
            return 0
        if self is Domain.Target:
            return 1
        raise Exceptions.DataError("A mixed dataset has no single domain index")

    @staticmethod
    def from_index(index: int) -> "Domain":
        """
        Returns the domain for a class index of the domain classifier.
        """
        return Domain.Source if index == 0 else Domain.Target

    def __str__(self) -> str:
        return self.value


class MixingPolicy(Enum):
    """
    Defines how the minibatches of the adaptation stage are drawn.
    """

    GlobalShuffle = "global_shuffle"
    """Source and target frames are shuffled together, every batch holds them in the global proportion on average."""
    SourceOnly = "source_only"
    """Only source frames are visited (control run without target data)."""

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class LayerSpec:
    """
    Shape and activation of one dense layer.
    """

    input_dim: int
    output_dim: int
    activation: Activation

    def __post_init__(self):
        if self.input_dim < 1 or self.output_dim < 1:
            raise Exceptions.ConfigError(
                f"Layer dimensions have to be at least 1 (got {self.input_dim}x{self.output_dim})"
            )

    @property
    def parameter_count(self) -> int:
        return self.input_dim * self.output_dim + self.output_dim


@dataclass(frozen=True)
class LayerGrads:
    """
    Gradients of a scalar loss with respect to the weights, the bias and the input of one dense layer.
    """

    weight_grad: np.ndarray
    bias_grad: np.ndarray
    input_grad: Optional[np.ndarray]
    """None if the gradients of different row sets were summed."""

    def __add__(self, other: "LayerGrads") -> "LayerGrads":
        return LayerGrads(
            weight_grad=self.weight_grad + other.weight_grad,
            bias_grad=self.bias_grad + other.bias_grad,
            input_grad=None,
        )


@dataclass(frozen=True)
class AdaptConfig:
    """
    Settings of the adaptation stage.
    """

    lambda_base: float = 2.0
    """($\\lambda$) Base coefficient of the gradient reversal layer."""
    feature_layer_index: int = 2
    """($f$) Index of the last shared hidden layer."""
    epochs: int = 13
    learning_rate: float = 1e-4
    """($\\epsilon$) Learning rate of the optimizer."""
    batch_size: int = 256
    mixing: MixingPolicy = MixingPolicy.GlobalShuffle
    seed: int = 0
    newbob: bool = False
    """If true, the new-bob scheduler also controls the learning rate during adaptation."""

    def __post_init__(self):
        if self.lambda_base < 0:
            raise Exceptions.ConfigError("Gradient reversal coefficient has to be non-negative")
        if self.epochs < 1:
            raise Exceptions.ConfigError("Adaptation needs at least one epoch")
        if self.batch_size < 2:
            raise Exceptions.ConfigError("Batch size has to admit both domains (>= 2)")
        if self.feature_layer_index < 1:
            raise Exceptions.ConfigError("Feature layer index has to be at least 1")
        if self.learning_rate <= 0:
            raise Exceptions.ConfigError("Learning rate has to be positive")


@dataclass(frozen=True)
class MetricsRecord:
    """
    Accuracies and losses of one epoch of training or adaptation.

    The domain fields are None for the training stage (no domain classifier attached).
    """

    epoch: int
    senone_acc_train: float
    senone_acc_valid: float
    senone_loss: float
    senone_loss_valid: float
    domain_acc_train: Optional[float] = None
    domain_acc_valid: Optional[float] = None
    domain_loss: Optional[float] = None
    domain_loss_valid: Optional[float] = None
    lambda_effective: float = 0.0
    learning_rate: float = 0.0

    def __post_init__(self):
        for name in [
            "senone_acc_train",
            "senone_acc_valid",
            "domain_acc_train",
            "domain_acc_valid",
        ]:
            value = getattr(self, name)
            assert value is None or 0 <= value <= 1, f"{name} has to be in [0, 1]"
        for name in [
            "senone_loss",
            "senone_loss_valid",
            "domain_loss",
            "domain_loss_valid",
        ]:
            value = getattr(self, name)
            assert value is None or np.isfinite(value), f"{name} has to be finite"

    @property
    def has_domain_metrics(self) -> bool:
        return self.domain_acc_train is not None


@dataclass(frozen=True)
class EquivalenceReport:
    """
    Result of the comparison between the gradient of the shared layers obtained through the gradient reversal layer
    and the gradient assembled from two independent backward passes.
    """

    max_deviation: float
    """Largest relative deviation over all shared parameters."""
    lambda_effective: float
    n_source: int
    n_target: int

    def holds(self, tolerance: float = 1e-10) -> bool:
        return self.max_deviation < tolerance
