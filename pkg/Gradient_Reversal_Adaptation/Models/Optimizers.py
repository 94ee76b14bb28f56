from typing import Optional

import logging
import numpy as np

import Gradient_Reversal_Adaptation.Models.Exceptions as Exceptions

logger = logging.getLogger(__name__)


class AdamState:
    """
    Adam optimizer with bias correction.

    Moments are kept per named parameter array, therefore parameter groups never influence each other.
    """

    def __init__(
        self,
        learning_rate: float = 1e-4,
        beta1: float = 0.9,
        beta2: float = 0.999,
        epsilon_hat: float = 1e-8,
    ):
        """
        Parameters
        ----------
        learning_rate: float
            ($\\epsilon$) Step size.
        beta1: float
            Decay of the first moment, in (0, 1).
        beta2: float
            Decay of the second moment, in (0, 1).
        epsilon_hat: float
            Small constant added to the root of the second moment.
        """
        if learning_rate <= 0:
            raise Exceptions.ConfigError("Learning rate has to be positive")
        if not (0 < beta1 < 1 and 0 < beta2 < 1):
            raise Exceptions.ConfigError("Moment decays have to be in (0, 1)")
        if epsilon_hat <= 0:
            raise Exceptions.ConfigError("epsilon_hat has to be positive")
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon_hat = epsilon_hat
        self.step_count = 0
        self.first_moment: dict[str, np.ndarray] = {}
        self.second_moment: dict[str, np.ndarray] = {}

    def apply(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        """
        Updates the parameters in place with one Adam step.

        Parameters
        ----------
        params: dict[str, numpy.ndarray]
            Parameter arrays keyed by name.
        grads: dict[str, numpy.ndarray]
            Gradients keyed like the parameters.
        """
        for name, grad in grads.items():
            if name not in params:
                raise Exceptions.StateError(f"Gradient for unknown parameter {name}")
            if grad.shape != params[name].shape:
                raise Exceptions.DimensionError(
                    f"Gradient of {name} has shape {grad.shape}, parameter has {params[name].shape}"
                )
            if not np.all(np.isfinite(grad)):
                raise Exceptions.NumericError(f"Non-finite gradient for {name}")
        self.step_count += 1
        correction1 = 1 - self.beta1**self.step_count
        correction2 = 1 - self.beta2**self.step_count
        for name, grad in grads.items():
            m = self.first_moment.setdefault(name, np.zeros_like(grad))
            v = self.second_moment.setdefault(name, np.zeros_like(grad))
            m *= self.beta1
            m += (1 - self.beta1) * grad
            v *= self.beta2
            v += (1 - self.beta2) * grad * grad
            params[name] -= (
                self.learning_rate
                * (m / correction1)
                / (np.sqrt(v / correction2) + self.epsilon_hat)
            )

    def state_dict(self) -> (dict, dict[str, np.ndarray]):
        """
        Returns the scalar settings and the moment arrays (keys prefixed with "m." and "v.").
        """
        scalars = {
            "learning_rate": self.learning_rate,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "epsilon_hat": self.epsilon_hat,
            "step_count": self.step_count,
        }
        arrays = {f"m.{k}": v for k, v in self.first_moment.items()}
        arrays.update({f"v.{k}": v for k, v in self.second_moment.items()})
        return scalars, arrays

    @staticmethod
    def from_state_dict(scalars: dict, arrays: dict[str, np.ndarray]) -> "AdamState":
        state = AdamState(
            learning_rate=scalars["learning_rate"],
            beta1=scalars["beta1"],
            beta2=scalars["beta2"],
            epsilon_hat=scalars["epsilon_hat"],
        )
        state.step_count = int(scalars["step_count"])
        for key, value in arrays.items():
            moment, name = key.split(".", 1)
            target = state.first_moment if moment == "m" else state.second_moment
            target[name] = np.array(value, dtype=np.float64)
        return state


def adam_apply(
    state: AdamState, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]
) -> (dict[str, np.ndarray], AdamState):
    """
    Applies one Adam step and returns the updated parameters together with the state.
    """
    state.apply(params, grads)
    return params, state


class NewBobState:
    """
    Validation driven learning rate schedule.

    As long as the relative improvement of the validation accuracy stays above the threshold, the learning rate is
    kept. The first time it falls below, the rate is halved in every following epoch (ramping). If the improvement
    falls below the threshold again while ramping, the training stops.
    """

    def __init__(
        self,
        initial_lr: float = 1e-4,
        halving_factor: float = 0.5,
        improvement_threshold: float = 0.005,
    ):
        if initial_lr <= 0:
            raise Exceptions.ConfigError("Learning rate has to be positive")
        if not 0 < halving_factor < 1:
            raise Exceptions.ConfigError("Halving factor has to be in (0, 1)")
        if improvement_threshold < 0:
            raise Exceptions.ConfigError("Improvement threshold has to be non-negative")
        self.current_lr = initial_lr
        self.halving_factor = halving_factor
        self.improvement_threshold = improvement_threshold
        self.ramping = False
        self.best_valid_metric: Optional[float] = None
        self.stopped = False

    def relative_improvement(self, valid_metric: float) -> float:
        if self.best_valid_metric is None:
            return float("inf")
        if self.best_valid_metric == 0:
            return float("inf") if valid_metric > 0 else 0.0
        return (valid_metric - self.best_valid_metric) / abs(self.best_valid_metric)

    def step(self, valid_metric: float) -> (float, bool):
        """
        Reports the validation accuracy of the finished epoch.

        Parameters
        ----------
        valid_metric: float
            Validation frame accuracy (higher is better).

        Returns
        -------
        float
            Learning rate for the next epoch.
        bool
            True, if the training has to stop.
        """
        if self.stopped:
            raise Exceptions.StateError("Scheduler already signalled the end of training")
        if not np.isfinite(valid_metric):
            raise Exceptions.NumericError("Validation metric has to be finite")
        improvement = self.relative_improvement(valid_metric)
        if self.best_valid_metric is None or valid_metric > self.best_valid_metric:
            self.best_valid_metric = valid_metric
        if improvement < self.improvement_threshold:
            if self.ramping:
                self.stopped = True
                logger.info(
                    "New-bob stop: relative improvement %.4f below %.4f",
                    improvement,
                    self.improvement_threshold,
                )
                return self.current_lr, True
            self.ramping = True
            self.current_lr *= self.halving_factor
        elif self.ramping:
            self.current_lr *= self.halving_factor
        return self.current_lr, False


def newbob_step(state: NewBobState, valid_metric: float) -> (float, bool):
    """
    Advances the new-bob schedule by one epoch, see NewBobState.step.
    """
    return state.step(valid_metric)
