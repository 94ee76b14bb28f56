from dataclasses import dataclass
from typing import Optional

import logging
import numpy as np

import Gradient_Reversal_Adaptation.Models.Types as Types
import Gradient_Reversal_Adaptation.Models.Layers as Layers
import Gradient_Reversal_Adaptation.Models.Network as Network
import Gradient_Reversal_Adaptation.Models.Optimizers as Optimizers
import Gradient_Reversal_Adaptation.Models.Exceptions as Exceptions
import Gradient_Reversal_Adaptation.Corpus.Dataset as Dataset
import Gradient_Reversal_Adaptation.Corpus.Batches as Batches

logger = logging.getLogger(__name__)

RAMP_EPOCHS: int = 10
"""Number of epochs until the gradient reversal coefficient reaches its base value."""
EVALUATION_CHUNK: int = 4096
"""Rows per forward pass during evaluation."""


def lambda_schedule(epoch: int, lambda_base: float) -> float:
    """
    Gradient reversal coefficient of an epoch, $\\lambda_e = \\min(e/10, 1)\\lambda$.

    Epochs are counted from 0, therefore the coefficient starts at 0.

    Parameters
    ----------
    epoch: int
        0-based epoch index.
    lambda_base: float
        ($\\lambda$) Base coefficient.

    Returns
    -------
    float
        Coefficient used during the epoch.
    """
    if epoch < 0:
        raise Exceptions.ConfigError("Epoch index has to be non-negative")
    return min(epoch / RAMP_EPOCHS, 1.0) * lambda_base


def predict(layers: list[Layers.DenseLayer], features: np.ndarray, slope: float) -> np.ndarray:
    """
    Posteriors of a layer stack for all rows, computed in chunks.
    """
    outputs = [
        Layers.forward_pass(layers, features[start : start + EVALUATION_CHUNK], slope)[0]
        for start in range(0, features.shape[0], EVALUATION_CHUNK)
    ]
    return np.concatenate(outputs) if outputs else np.zeros((0, layers[-1].spec.output_dim))


def _accuracy_and_loss(probs: np.ndarray, labels: np.ndarray) -> (float, float):
    accuracy = float(np.mean(np.argmax(probs, axis=1) == labels))
    return accuracy, Layers.cross_entropy_loss(probs, labels)


def evaluate(net: Network.NetworkParams, data: Dataset.FrameDataset) -> (float, float):
    """
    Frame accuracy (correctly classified frames / all frames) and mean cross-entropy of the senone classifier.

    Parameters
    ----------
    net: NetworkParams
        Network to evaluate (an attached domain classifier is ignored).
    data: Gradient_Reversal_Adaptation.Corpus.Dataset.FrameDataset
        Labeled, non-empty dataset.

    Returns
    -------
    float
        Accuracy in [0, 1].
    float
        Mean cross-entropy.
    """
    labels = data.require_labels()
    return _accuracy_and_loss(predict(net.main_layers, data.features, net.slope), labels)


def domain_accuracy(net: Network.NetworkParams, data: Dataset.FrameDataset) -> (float, float):
    """
    Accuracy and mean cross-entropy of the domain classifier on the per-row domains of the dataset.
    """
    if not net.has_domain_head:
        raise Exceptions.StateError("Network has no domain classifier")
    if data.n_frames == 0:
        raise Exceptions.DataError("Dataset is empty")
    features = predict(net.shared, data.features, net.slope)
    probs = predict(net.domain_head, Network.grl_forward(features), net.slope)
    return _accuracy_and_loss(probs, data.row_domains)


def _named_grads(prefix: str, grads: list[Types.LayerGrads]) -> dict[str, np.ndarray]:
    named = {}
    for index, grad in enumerate(grads):
        named[f"{prefix}.{index}.weights"] = grad.weight_grad
        named[f"{prefix}.{index}.bias"] = grad.bias_grad
    return named


def supervised_step(
    net: Network.NetworkParams,
    optimizer: Optimizers.AdamState,
    features: np.ndarray,
    labels: np.ndarray,
) -> (float, int):
    """
    One update $\\theta \\gets \\theta - \\epsilon \\partial L_y / \\partial \\theta$ (through the optimizer) on a
    labeled minibatch. The network is updated in place.

    An empty minibatch contributes zero gradients, the optimizer still advances by one step.

    Returns
    -------
    float
        Cross-entropy of the batch before the update (0 for an empty batch).
    int
        Number of correctly classified rows.
    """
    if net.has_domain_head:
        raise Exceptions.StateError("Supervised training expects no domain classifier")
    probs, cache = Layers.forward_pass(net.main_layers, features, net.slope)
    loss, correct = 0.0, 0
    if labels.size:
        loss = Layers.cross_entropy_loss(probs, labels)
        correct = int(np.sum(np.argmax(probs, axis=1) == labels))
    grads = Layers.backward_pass(
        net.main_layers, Layers.cross_entropy_grad(probs, labels), cache, net.slope
    )
    params = net.parameter_groups()
    optimizer.apply(params, _named_grads("senone", grads))
    net.touch()
    return loss, correct


@dataclass(frozen=True)
class AdversarialGradients:
    """
    Gradients and statistics of one minibatch of the adaptation stage.
    """

    shared: list[Types.LayerGrads]
    senone: list[Types.LayerGrads]
    domain: list[Types.LayerGrads]
    senone_loss: float
    domain_loss: float
    senone_correct: int
    domain_correct: int
    n_source: int
    n_target: int

    def named(self) -> dict[str, np.ndarray]:
        named = _named_grads("shared", self.shared)
        named.update(_named_grads("senone", self.senone))
        named.update(_named_grads("domain", self.domain))
        return named


def _domain_loss_and_grad(probs_d: np.ndarray, batch: Batches.Batch) -> (float, np.ndarray):
    """
    Domain cross-entropy as the sum of the source term and the target term, each averaged over its own rows.
    """
    grad = np.zeros_like(probs_d)
    loss = 0.0
    for mask, domain in [
        (batch.source_mask, Types.Domain.Source),
        (batch.target_mask, Types.Domain.Target),
    ]:
        count = int(np.sum(mask))
        if count:
            domain_labels = np.full(count, domain.index)
            grad[mask] = Layers.cross_entropy_grad(probs_d[mask], domain_labels)
            loss += Layers.cross_entropy_loss(probs_d[mask], domain_labels)
    return loss, grad


def adversarial_gradients(
    net: Network.NetworkParams, batch: Batches.Batch, lambda_effective: float
) -> AdversarialGradients:
    """
    Gradients of the adaptation stage for one minibatch.

    The senone path only sees the source rows, the domain path sees every row. The heads receive
    $\\partial L_y/\\partial \\theta_y$ and $\\partial L_d/\\partial \\theta_d$; the shared layers receive the senone
    gradient plus the domain gradient passed through the gradient reversal layer, i.e.
    $\\partial L_y/\\partial \\theta_f - \\lambda_e \\partial L_d/\\partial \\theta_f$. For $\\lambda_e = 0$ the
    shared layers are updated exactly as by supervised_step on the source rows.
    """
    if not net.has_domain_head:
        raise Exceptions.StateError("Adaptation needs an attached domain classifier")
    slope = net.slope
    source = batch.source_mask
    source_labels = batch.labels[source]
    source_features, cache_source = Layers.forward_pass(
        net.shared, batch.features[source], slope
    )
    probs_y, cache_y = Layers.forward_pass(net.senone_head, source_features, slope)
    features, cache_all = Layers.forward_pass(net.shared, batch.features, slope)
    probs_d, cache_d = Layers.forward_pass(
        net.domain_head, net.grl.forward(features), slope
    )
    senone_loss, senone_correct = 0.0, 0
    if source_labels.size:
        senone_loss = Layers.cross_entropy_loss(probs_y, source_labels)
        senone_correct = int(np.sum(np.argmax(probs_y, axis=1) == source_labels))
    domain_loss, grad_d = _domain_loss_and_grad(probs_d, batch)
    grads_y = Layers.backward_pass(
        net.senone_head, Layers.cross_entropy_grad(probs_y, source_labels), cache_y, slope
    )
    grads_d = Layers.backward_pass(net.domain_head, grad_d, cache_d, slope)
    grads_f = Layers.backward_pass(
        net.shared, grads_y[0].input_grad, cache_source, slope
    )
    net.grl.lambda_effective = lambda_effective
    if lambda_effective != 0:
        reversed_f = Layers.backward_pass(
            net.shared, net.grl.backward(grads_d[0].input_grad), cache_all, slope
        )
        grads_f = [a + b for a, b in zip(grads_f, reversed_f)]
    return AdversarialGradients(
        shared=grads_f,
        senone=grads_y,
        domain=grads_d,
        senone_loss=senone_loss,
        domain_loss=domain_loss,
        senone_correct=senone_correct,
        domain_correct=int(np.sum(np.argmax(probs_d, axis=1) == batch.domains)),
        n_source=int(source_labels.size),
        n_target=batch.n_target,
    )


def adversarial_step(
    net: Network.NetworkParams,
    optimizer: Optimizers.AdamState,
    batch: Batches.Batch,
    lambda_effective: float,
) -> AdversarialGradients:
    """
    One simultaneous update of $\\theta_y$, $\\theta_d$ and $\\theta_f$ on a mixed minibatch (in place).
    """
    grads = adversarial_gradients(net, batch, lambda_effective)
    optimizer.apply(net.parameter_groups(), grads.named())
    net.touch()
    return grads


def _check_training_inputs(net, labeled, valid) -> None:
    if net.has_domain_head:
        raise Exceptions.StateError("Training stage expects no domain classifier")
    labeled.require_labels()
    valid.require_labels()


def train_supervised(
    net: Network.NetworkParams,
    labeled: Dataset.FrameDataset,
    valid: Dataset.FrameDataset,
    optimizer: Optimizers.AdamState,
    scheduler: Optional[Optimizers.NewBobState] = None,
    epochs: int = 10,
    batch_size: int = 256,
    seed: int = 0,
    rng: Optional[np.random.Generator] = None,
) -> (Network.NetworkParams, list[Types.MetricsRecord]):
    """
    Training stage: minimizes the senone cross-entropy on labeled source data.

    Parameters
    ----------
    net: NetworkParams
        Network without domain classifier; it is copied, the argument is left untouched.
    labeled: Gradient_Reversal_Adaptation.Corpus.Dataset.FrameDataset
        Labeled training data.
    valid: Gradient_Reversal_Adaptation.Corpus.Dataset.FrameDataset
        Labeled validation data.
    optimizer: Gradient_Reversal_Adaptation.Models.Optimizers.AdamState
        Optimizer updating all parameters.
    scheduler: Optional[Gradient_Reversal_Adaptation.Models.Optimizers.NewBobState]
        If set, controls the learning rate and may stop the training early.
    epochs: int
        Maximal number of passes over the training data.
    batch_size: int
        Rows per minibatch.
    seed: int
        Seed of the data order.
    rng: Optional[numpy.random.Generator]
        Generator of the data order, replaces the seed if set; its state advances with every epoch.

    Returns
    -------
    NetworkParams
        Trained copy of the network.
    list[Gradient_Reversal_Adaptation.Models.Types.MetricsRecord]
        One record per finished epoch.
    """
    _check_training_inputs(net, labeled, valid)
    trained = net.copy()
    records: list[Types.MetricsRecord] = []
    if epochs <= 0:
        return trained, records
    iterator = Batches.MixedBatchIterator(labeled, None, batch_size, seed=seed, rng=rng)
    for epoch in range(epochs):
        if epoch > 0:
            iterator.new_epoch()
        loss_sum, correct = 0.0, 0
        for batch in iterator:
            loss, batch_correct = supervised_step(
                trained, optimizer, batch.features, batch.labels
            )
            loss_sum += loss * batch.size
            correct += batch_correct
        valid_accuracy, valid_loss = evaluate(trained, valid)
        record = Types.MetricsRecord(
            epoch=epoch + 1,
            senone_acc_train=correct / labeled.n_frames,
            senone_acc_valid=valid_accuracy,
            senone_loss=loss_sum / labeled.n_frames,
            senone_loss_valid=valid_loss,
            learning_rate=optimizer.learning_rate,
        )
        records.append(record)
        logger.info(
            "train epoch %d: acc %.4f/%.4f loss %.4f/%.4f lr %.2e",
            record.epoch,
            record.senone_acc_train,
            record.senone_acc_valid,
            record.senone_loss,
            record.senone_loss_valid,
            record.learning_rate,
        )
        if scheduler is not None and _schedule(scheduler, optimizer, valid_accuracy):
            break
    return trained, records


def _schedule(
    scheduler: Optimizers.NewBobState, optimizer: Optimizers.AdamState, metric: float
) -> bool:
    learning_rate, stop = Optimizers.newbob_step(scheduler, metric)
    optimizer.learning_rate = learning_rate
    if stop:
        logger.warning("New-bob scheduler stopped the run")
    return stop


def _check_adaptation_inputs(net, source_labeled, target_unlabeled, valid, cfg) -> None:
    source_labeled.require_labels()
    if target_unlabeled.is_labeled:
        raise Exceptions.DataError(
            "Target data of the adaptation stage must not carry senone labels"
        )
    if not net.has_domain_head:
        raise Exceptions.StateError("Adaptation needs an attached domain classifier")
    if net.feature_layer_index != cfg.feature_layer_index:
        raise Exceptions.ConfigError(
            f"Domain classifier is attached at layer {net.feature_layer_index}, "
            f"configuration expects {cfg.feature_layer_index}"
        )
    valid.require_labels()


def adapt_adversarial(
    net: Network.NetworkParams,
    source_labeled: Dataset.FrameDataset,
    target_unlabeled: Dataset.FrameDataset,
    valid: Dataset.FrameDataset,
    cfg: Types.AdaptConfig,
    optimizer: Optional[Optimizers.AdamState] = None,
    scheduler: Optional[Optimizers.NewBobState] = None,
    rng: Optional[np.random.Generator] = None,
) -> (Network.NetworkParams, list[Types.MetricsRecord]):
    """
    Adaptation stage: joint training of the senone classifier on labeled source data and of the domain classifier on
    source and unlabeled target data, with the domain gradient reversed before it reaches the shared layers.

    The coefficient of the gradient reversal layer follows lambda_schedule. After the last epoch the domain classifier
    is removed.

    Parameters
    ----------
    net: NetworkParams
        Trained network with a domain classifier attached at cfg.feature_layer_index (left untouched).
    source_labeled: Gradient_Reversal_Adaptation.Corpus.Dataset.FrameDataset
        Labeled source data.
    target_unlabeled: Gradient_Reversal_Adaptation.Corpus.Dataset.FrameDataset
        Target data without labels.
    valid: Gradient_Reversal_Adaptation.Corpus.Dataset.FrameDataset
        Labeled validation data with per-row domains (usually source and target in equal proportions).
    cfg: Gradient_Reversal_Adaptation.Models.Types.AdaptConfig
        Settings of the adaptation.
    optimizer: Optional[Gradient_Reversal_Adaptation.Models.Optimizers.AdamState]
        Optimizer for all three parameter groups, a new one with cfg.learning_rate if None.
    scheduler: Optional[Gradient_Reversal_Adaptation.Models.Optimizers.NewBobState]
        Scheduler, only used if cfg.newbob is set (a new one is created if None).
    rng: Optional[numpy.random.Generator]
        Generator of the data order, replaces cfg.seed if set.

    Returns
    -------
    NetworkParams
        Adapted network without domain classifier.
    list[Gradient_Reversal_Adaptation.Models.Types.MetricsRecord]
        One record per finished epoch.
    """
    _check_adaptation_inputs(net, source_labeled, target_unlabeled, valid, cfg)
    adapted = net.copy()
    optimizer = optimizer or Optimizers.AdamState(learning_rate=cfg.learning_rate)
    if cfg.newbob and scheduler is None:
        scheduler = Optimizers.NewBobState(initial_lr=optimizer.learning_rate)
    target = (
        None if cfg.mixing is Types.MixingPolicy.SourceOnly else target_unlabeled
    )
    iterator = Batches.MixedBatchIterator(
        source_labeled, target, cfg.batch_size, seed=cfg.seed, rng=rng
    )
    records: list[Types.MetricsRecord] = []
    for epoch in range(cfg.epochs):
        if epoch > 0:
            iterator.new_epoch()
        lambda_effective = lambda_schedule(epoch, cfg.lambda_base)
        sums = np.zeros(4)
        for batch in iterator:
            grads = adversarial_step(adapted, optimizer, batch, lambda_effective)
            sums += [
                grads.senone_loss * grads.n_source,
                grads.domain_loss * batch.size,
                grads.senone_correct,
                grads.domain_correct,
            ]
        senone_valid = evaluate(adapted, valid)
        domain_valid = domain_accuracy(adapted, valid)
        record = Types.MetricsRecord(
            epoch=epoch + 1,
            senone_acc_train=sums[2] / source_labeled.n_frames,
            senone_acc_valid=senone_valid[0],
            senone_loss=sums[0] / source_labeled.n_frames,
            senone_loss_valid=senone_valid[1],
            domain_acc_train=sums[3] / iterator.n_frames,
            domain_acc_valid=domain_valid[0],
            domain_loss=sums[1] / iterator.n_frames,
            domain_loss_valid=domain_valid[1],
            lambda_effective=lambda_effective,
            learning_rate=optimizer.learning_rate,
        )
        records.append(record)
        logger.info(
            "adapt epoch %d (lambda %.3f): senone acc %.4f/%.4f domain acc %.4f/%.4f",
            record.epoch,
            lambda_effective,
            record.senone_acc_train,
            record.senone_acc_valid,
            record.domain_acc_train,
            record.domain_acc_valid,
        )
        if cfg.newbob and _schedule(scheduler, optimizer, senone_valid[0]):
            break
    return Network.detach_domain_head(adapted), records


def grl_equivalence_check(
    net: Network.NetworkParams, minibatch: Batches.Batch, lambda_effective: float
) -> Types.EquivalenceReport:
    """
    Compares the gradient of the shared layers used by adversarial_step with
    $\\partial L_y/\\partial \\theta_f - \\lambda_e \\partial L_d/\\partial \\theta_f$ assembled from two independent
    plain backward passes over the whole minibatch (no gradient reversal involved). The network is not modified.

    Returns
    -------
    Gradient_Reversal_Adaptation.Models.Types.EquivalenceReport
        Largest relative deviation over all shared parameter arrays.
    """
    combined = adversarial_gradients(net, minibatch, lambda_effective)
    slope = net.slope
    source = minibatch.source_mask
    features, cache_f = Layers.forward_pass(net.shared, minibatch.features, slope)
    probs_y, cache_y = Layers.forward_pass(net.senone_head, features, slope)
    probs_d, cache_d = Layers.forward_pass(net.domain_head, features, slope)
    grad_y = np.zeros_like(probs_y)
    if np.any(source):
        grad_y[source] = Layers.cross_entropy_grad(
            probs_y[source], minibatch.labels[source]
        )
    grad_d = _domain_loss_and_grad(probs_d, minibatch)[1]
    senone_shared = Layers.backward_pass(
        net.shared,
        Layers.backward_pass(net.senone_head, grad_y, cache_y, slope)[0].input_grad,
        cache_f,
        slope,
    )
    domain_shared = Layers.backward_pass(
        net.shared,
        Layers.backward_pass(net.domain_head, grad_d, cache_d, slope)[0].input_grad,
        cache_f,
        slope,
    )
    deviation = 0.0
    for grl, senone, domain in zip(combined.shared, senone_shared, domain_shared):
        for grl_part, senone_part, domain_part in [
            (grl.weight_grad, senone.weight_grad, domain.weight_grad),
            (grl.bias_grad, senone.bias_grad, domain.bias_grad),
        ]:
            explicit = senone_part - lambda_effective * domain_part
            difference = np.linalg.norm(grl_part - explicit)
            if difference > 0:
                scale = max(np.linalg.norm(explicit), np.finfo(np.float64).tiny)
                deviation = max(deviation, float(difference / scale))
    return Types.EquivalenceReport(
        max_deviation=deviation,
        lambda_effective=lambda_effective,
        n_source=combined.n_source,
        n_target=combined.n_target,
    )
