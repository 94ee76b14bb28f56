from dataclasses import dataclass
from typing import Optional, Sequence

import logging
import numpy as np

import Gradient_Reversal_Adaptation.Models.Types as Types
import Gradient_Reversal_Adaptation.Models.Layers as Layers
import Gradient_Reversal_Adaptation.Models.Exceptions as Exceptions

logger = logging.getLogger(__name__)


def frames_to_hours(frames: int, frame_shift_ms: float) -> float:
    """
    Converts a frame count into hours of audio ($frames \\cdot shift / 3600$).
    """
    return frames * frame_shift_ms / 1000.0 / 3600.0


class FrameDataset:
    """
    Spliced feature frames of a set of utterances with optional senone labels.

    Rows of the same utterance are stored contiguously. A dataset used as target data of the adaptation stage must not
    carry labels; the true classes of synthetic target data may be kept in reference_labels, which no update ever
    reads.
    """

    def __init__(
        self,
        features: np.ndarray,
        labels: Optional[np.ndarray] = None,
        domain: Types.Domain = Types.Domain.Source,
        language: str = "it",
        frame_shift_ms: float = 10.0,
        n_classes: Optional[int] = None,
        utterance_index: Optional[np.ndarray] = None,
        utterance_ids: Optional[Sequence[str]] = None,
        row_domains: Optional[np.ndarray] = None,
        reference_labels: Optional[np.ndarray] = None,
        channels: Optional[Sequence[str]] = None,
    ):
        """
        Parameters
        ----------
        features: numpy.ndarray
            Matrix of shape (frames, dims).
        labels: Optional[numpy.ndarray]
            Senone class per frame or None for unlabeled data.
        domain: Gradient_Reversal_Adaptation.Models.Types.Domain
            Recording domain of all rows (Mixed, if row_domains differ).
        language: str
            Language tag of the utterances.
        frame_shift_ms: float
            Frame shift used to express the size in hours.
        n_classes: Optional[int]
            Number of senone classes (defaults to the largest label + 1).
        utterance_index: Optional[numpy.ndarray]
            Utterance number per row, defaults to a single utterance.
        utterance_ids: Optional[Sequence[str]]
            Name per utterance.
        row_domains: Optional[numpy.ndarray]
            Domain class index per row (0 = source, 1 = target), required for mixed datasets.
        reference_labels: Optional[numpy.ndarray]
            True classes of unlabeled rows, only used for reporting.
        channels: Optional[Sequence[str]]
            Name of the channel profile per utterance.
        """
        self.features = Layers.as_matrix(features, "features")
        n = self.features.shape[0]
        self.labels = self._check_labels(labels, n, "labels")
        self.reference_labels = self._check_labels(
            reference_labels, n, "reference labels"
        )
        self.domain = domain
        self.language = language
        self.frame_shift_ms = frame_shift_ms
        known = [l for l in [self.labels, self.reference_labels] if l is not None]
        if n_classes is None:
            n_classes = max([int(l.max()) + 1 for l in known if l.size] or [0])
        self.n_classes = n_classes
        for l in known:
            if l.size and (l.min() < 0 or l.max() >= self.n_classes):
                raise Exceptions.LabelError(
                    f"Labels have to be in [0, {self.n_classes})"
                )
        self.utterance_index = (
            np.zeros(n, dtype=np.int64)
            if utterance_index is None
            else np.asarray(utterance_index, dtype=np.int64)
        )
        if self.utterance_index.shape != (n,):
            raise Exceptions.IntegrityError("One utterance index per row is required")
        if n and np.any(np.diff(self.utterance_index) < 0):
            raise Exceptions.IntegrityError("Rows of an utterance have to be contiguous")
        n_utterances = int(self.utterance_index.max()) + 1 if n else 0
        self.utterance_ids = (
            [f"utt{i:05d}" for i in range(n_utterances)]
            if utterance_ids is None
            else list(utterance_ids)
        )
        if len(self.utterance_ids) != n_utterances:
            raise Exceptions.IntegrityError("One id per utterance is required")
        self.channels = (
            ["unknown"] * n_utterances if channels is None else list(channels)
        )
        if row_domains is None:
            row_domains = np.full(n, domain.index, dtype=np.int64)
        self.row_domains = np.asarray(row_domains, dtype=np.int64)
        if self.row_domains.shape != (n,):
            raise Exceptions.IntegrityError("One domain per row is required")

    @staticmethod
    def _check_labels(labels, n: int, name: str) -> Optional[np.ndarray]:
        if labels is None:
            return None
        labels = np.asarray(labels, dtype=np.int64).reshape(-1)
        if labels.shape[0] != n:
            raise Exceptions.IntegrityError(
                f"{labels.shape[0]} {name} for {n} feature rows"
            )
        return labels

    @property
    def n_frames(self) -> int:
        return self.features.shape[0]

    @property
    def dims(self) -> int:
        return self.features.shape[1]

    @property
    def is_labeled(self) -> bool:
        return self.labels is not None

    @property
    def n_utterances(self) -> int:
        return len(self.utterance_ids)

    @property
    def hours_equivalent(self) -> float:
        """
        Size of the dataset in hours ($frames \\cdot shift / 3600$).
        """
        return frames_to_hours(self.n_frames, self.frame_shift_ms)

    def utterance_frames(self) -> np.ndarray:
        """
        Number of frames per utterance.
        """
        return np.bincount(self.utterance_index, minlength=self.n_utterances)

    def utterance_bounds(self) -> list[tuple[int, int]]:
        """
        Row range [start, end) of every utterance.
        """
        ends = np.cumsum(self.utterance_frames())
        starts = np.concatenate([[0], ends[:-1]])
        return [(int(s), int(e)) for s, e in zip(starts, ends)]

    def require_labels(self) -> np.ndarray:
        if self.labels is None:
            raise Exceptions.DataError("Dataset has no labels")
        if self.n_frames == 0:
            raise Exceptions.DataError("Dataset is empty")
        return self.labels

    def strip_labels(self) -> "FrameDataset":
        """
        Returns an unlabeled copy; the labels are moved to reference_labels.
        """
        return self._replace(
            labels=None,
            reference_labels=self.labels
            if self.labels is not None
            else self.reference_labels,
        )

    def with_features(self, features: np.ndarray) -> "FrameDataset":
        return self._replace(features=features)

    def _replace(self, **kwargs) -> "FrameDataset":
        values = dict(
            features=self.features,
            labels=self.labels,
            domain=self.domain,
            language=self.language,
            frame_shift_ms=self.frame_shift_ms,
            n_classes=self.n_classes,
            utterance_index=self.utterance_index,
            utterance_ids=self.utterance_ids,
            row_domains=self.row_domains,
            reference_labels=self.reference_labels,
            channels=self.channels,
        )
        values.update(kwargs)
        return FrameDataset(**values)

    def select_utterances(self, indices: Sequence[int]) -> "FrameDataset":
        """
        Returns the given utterances (in the given order) as a new dataset.
        """
        bounds = self.utterance_bounds()
        rows = [np.arange(*bounds[i]) for i in indices]
        rows = np.concatenate(rows) if rows else np.zeros(0, dtype=np.int64)
        counts = np.array([bounds[i][1] - bounds[i][0] for i in indices], dtype=np.int64)
        return self._replace(
            features=self.features[rows],
            labels=None if self.labels is None else self.labels[rows],
            reference_labels=None
            if self.reference_labels is None
            else self.reference_labels[rows],
            utterance_index=np.repeat(np.arange(len(indices)), counts),
            utterance_ids=[self.utterance_ids[i] for i in indices],
            row_domains=self.row_domains[rows],
            channels=[self.channels[i] for i in indices],
        )

    def __eq__(self, other) -> bool:
        def same(a, b):
            if a is None or b is None:
                return a is None and b is None
            return np.array_equal(a, b)

        return (
            isinstance(other, FrameDataset)
            and self.features.shape == other.features.shape
            and self.features.tobytes() == other.features.tobytes()
            and same(self.labels, other.labels)
            and same(self.reference_labels, other.reference_labels)
            and self.domain is other.domain
            and self.language == other.language
            and self.frame_shift_ms == other.frame_shift_ms
            and self.n_classes == other.n_classes
            and np.array_equal(self.utterance_index, other.utterance_index)
            and self.utterance_ids == other.utterance_ids
            and np.array_equal(self.row_domains, other.row_domains)
            and self.channels == other.channels
        )

    def __repr__(self) -> str:
        return (
            f"FrameDataset({self.domain}, {self.language}, {self.n_frames} frames x {self.dims}, "
            f"{self.n_utterances} utterances, labeled={self.is_labeled})"
        )


def concatenate(datasets: Sequence[FrameDataset]) -> FrameDataset:
    """
    Stacks datasets row-wise (e.g. source and target validation data into one mixed validation set).

    Labels are kept only if every dataset is labeled.
    """
    assert len(datasets) > 0, "Nothing to concatenate"
    first = datasets[0]
    domains = {d.domain for d in datasets}
    offsets = np.cumsum([0] + [d.n_utterances for d in datasets])
    labeled = all(d.is_labeled for d in datasets)
    has_reference = all(
        d.is_labeled or d.reference_labels is not None for d in datasets
    )
    return FrameDataset(
        features=np.concatenate([d.features for d in datasets]),
        labels=np.concatenate([d.labels for d in datasets]) if labeled else None,
        reference_labels=None
        if labeled or not has_reference
        else np.concatenate(
            [d.labels if d.is_labeled else d.reference_labels for d in datasets]
        ),
        domain=domains.pop() if len(domains) == 1 else Types.Domain.Mixed,
        language=first.language,
        frame_shift_ms=first.frame_shift_ms,
        n_classes=max(d.n_classes for d in datasets),
        utterance_index=np.concatenate(
            [d.utterance_index + o for d, o in zip(datasets, offsets)]
        ),
        utterance_ids=[u for d in datasets for u in d.utterance_ids],
        row_domains=np.concatenate([d.row_domains for d in datasets]),
        channels=[c for d in datasets for c in d.channels],
    )


def subset_hours(
    data: FrameDataset, hours: float, rng: np.random.Generator
) -> FrameDataset:
    """
    Draws a random subset of whole utterances with (at least) the requested size.

    The utterances are visited in a random order and added until the requested size is reached, therefore the result
    exceeds the request by less than one utterance. Two calls with identically seeded generators visit the utterances in
    the same order, so that smaller requests are subsets of larger ones.

    Parameters
    ----------
    data: FrameDataset
        Dataset to draw from.
    hours: float
        Requested size in hours.
    rng: numpy.random.Generator
        Source of the utterance order.

    Returns
    -------
    FrameDataset
        Subset in the drawn utterance order.
    """
    if hours < 0:
        raise Exceptions.DataError("Requested size has to be non-negative")
    if hours > data.hours_equivalent * (1 + 1e-12):
        raise Exceptions.DataError(
            f"Requested {hours:.4f} h but only {data.hours_equivalent:.4f} h are available"
        )
    order = rng.permutation(data.n_utterances)
    cumulative = np.cumsum(
        [frames_to_hours(n, data.frame_shift_ms) for n in data.utterance_frames()[order]]
    )
    count = int(np.searchsorted(cumulative, hours - 1e-12)) + 1
    count = min(count, data.n_utterances)
    if hours == 0:
        count = 0
    logger.debug("Subset of %d/%d utterances for %.4f h", count, data.n_utterances, hours)
    return data.select_utterances(order[:count])


@dataclass(frozen=True)
class FeatureStats:
    """
    Global mean and standard deviation per feature dimension.

    Fitted on the source training data and applied to every split, so that the shift between the domains is kept.
    """

    mean: np.ndarray
    scale: np.ndarray

    @staticmethod
    def fit(data: FrameDataset, minimum_scale: float = 1e-8) -> "FeatureStats":
        if data.n_frames == 0:
            raise Exceptions.DataError("Cannot fit feature statistics on an empty dataset")
        return FeatureStats(
            mean=data.features.mean(axis=0),
            scale=np.maximum(data.features.std(axis=0), minimum_scale),
        )

    def apply(self, data: FrameDataset) -> FrameDataset:
        if data.dims != self.mean.shape[0]:
            raise Exceptions.DimensionError(
                f"Statistics for {self.mean.shape[0]} dims applied to {data.dims} dims"
            )
        return data.with_features((data.features - self.mean) / self.scale)
