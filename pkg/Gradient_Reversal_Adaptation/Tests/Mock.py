from typing import Optional, Sequence

import numpy as np
from mockito import when

import Gradient_Reversal_Adaptation as GRA
import Gradient_Reversal_Adaptation.Models.Adaptation as Adaptation

CLUSTER_SEED: int = 1234
"""Seed of the class centers, shared by every mock dataset so that source and target agree on the classes."""


def mock_dataset(
    frames_per_class: int = 20,
    n_classes: int = 3,
    dims: int = 6,
    domain: GRA.Domain = GRA.Domain.Source,
    shift: float = 0.0,
    seed: int = 0,
    utterance_frames: int = 10,
    spread: float = 0.3,
    labeled: Optional[bool] = None,
) -> GRA.FrameDataset:
    """
    Creates a dataset of Gaussian clusters (one per class) with contiguous utterances of utterance_frames rows.

    Every row is shifted by the given offset in every dimension. Target datasets carry their classes only as
    reference labels, unless labeled is set.
    """
    centers = np.random.default_rng(CLUSTER_SEED).normal(0.0, 1.0, (n_classes, dims))
    rng = np.random.default_rng(seed)
    labels = rng.permutation(np.repeat(np.arange(n_classes), frames_per_class))
    features = centers[labels] + rng.normal(0.0, spread, (labels.size, dims)) + shift
    utterance_index = np.arange(labels.size) // utterance_frames
    data = GRA.FrameDataset(
        features,
        labels,
        domain=domain,
        n_classes=n_classes,
        utterance_index=utterance_index,
        channels=["channel1" if domain is GRA.Domain.Source else "channel4"]
        * (int(utterance_index.max()) + 1),
    )
    labeled = domain is GRA.Domain.Source if labeled is None else labeled
    return data if labeled else data.strip_labels()


def mock_validation(n_classes: int = 3, dims: int = 6, shift: float = 1.0) -> GRA.FrameDataset:
    """
    Mixed validation set: labeled source rows followed by labeled target rows.
    """
    source = mock_dataset(10, n_classes, dims, seed=11)
    target = mock_dataset(10, n_classes, dims, GRA.Domain.Target, shift, seed=12, labeled=True)
    return GRA.concatenate([source, target])


def mock_network(
    n_input: int = 6,
    hidden: Sequence[int] = (8, 8, 8),
    n_classes: int = 3,
    seed: int = 0,
    f: Optional[int] = None,
    adversary: Sequence[int] = (5,),
    slope: float = GRA.DEFAULT_SLOPE,
) -> GRA.NetworkParams:
    """
    Creates a senone classifier, with a domain classifier behind hidden layer f if f is given.
    """
    net = GRA.build_main_network(n_input, n_classes, hidden, seed)
    if f is None:
        return net
    return GRA.attach_domain_head(net, f, adversary, slope=slope, seed=seed + 1)


def mock_batch(
    n_input: int, n_source: int, n_target: int, n_classes: int = 3, seed: int = 0
) -> GRA.Batch:
    """
    Random minibatch with source and target rows in random order.
    """
    rng = np.random.default_rng(seed)
    order = rng.permutation(n_source + n_target)
    labels = np.concatenate(
        [rng.integers(0, n_classes, n_source), np.full(n_target, GRA.UNLABELED)]
    )
    domains = np.concatenate([np.zeros(n_source), np.ones(n_target)]).astype(np.int64)
    return GRA.Batch(
        features=rng.normal(0.0, 1.0, (n_source + n_target, n_input))[order],
        labels=labels[order].astype(np.int64),
        domains=domains[order],
    )


def mock_records(n_epochs: int = 3, domain: bool = True) -> list[GRA.MetricsRecord]:
    """
    Metrics of a short run with a falling domain accuracy.
    """
    return [
        GRA.MetricsRecord(
            epoch=epoch,
            senone_acc_train=0.5 + 0.1 * epoch,
            senone_acc_valid=0.45 + 0.1 * epoch,
            senone_loss=1.0 / epoch,
            senone_loss_valid=1.2 / epoch,
            domain_acc_train=0.95 - 0.1 * epoch if domain else None,
            domain_acc_valid=0.9 - 0.1 * epoch if domain else None,
            domain_loss=0.1 * epoch if domain else None,
            domain_loss_valid=0.15 * epoch if domain else None,
            lambda_effective=GRA.lambda_schedule(epoch - 1, 2.0) if domain else 0.0,
            learning_rate=1e-4,
        )
        for epoch in range(1, n_epochs + 1)
    ]


def mock_grid_table() -> GRA.ResultTable:
    """
    Grid over two coefficients and two feature layers with two seeds; (2.0, 2) is the best row.
    """
    errors = {(1.0, 1): (40.0, 42.0), (1.0, 2): (35.0, 37.0), (2.0, 1): (38.0, 36.0), (2.0, 2): (30.0, 31.0)}
    return GRA.ResultTable(
        ("lambda", "f"),
        [
            GRA.ResultCell(key_1=l, key_2=f, seed=seed, error=error, baseline_error=50.0)
            for (l, f), values in errors.items()
            for seed, error in enumerate(values)
        ],
        title="Grid",
    )


def mock_sweep_table(language: str = "it", offset: float = 0.0) -> GRA.ResultTable:
    return GRA.ResultTable(
        ("hours", "language"),
        [
            GRA.ResultCell(key_1=hours, key_2=language, seed=seed, error=error + offset + seed, baseline_error=50.0)
            for hours, error in [(0.25, 45.0), (0.5, 40.0), (1.0, 35.0)]
            for seed in range(2)
        ],
    )


def mock_config(**overrides) -> GRA.ExperimentConfig:
    """
    Smoke test configuration (preset 3) with the given fields replaced.
    """
    loader = GRA.LoadParameters(config_id=3)
    loader.adjust_parameters(**overrides)
    return loader.params


def mock_fixed_evaluation(accuracy: float = 0.5, loss: float = 1.0) -> None:
    """
    Replaces the evaluation of a network by a constant result.
    """
    when(Adaptation).evaluate(...).thenReturn((accuracy, loss))
