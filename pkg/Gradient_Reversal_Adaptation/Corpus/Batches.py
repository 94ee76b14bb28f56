from dataclasses import dataclass
from typing import Optional

import logging
import numpy as np

import Gradient_Reversal_Adaptation.Corpus.Dataset as Dataset
import Gradient_Reversal_Adaptation.Models.Exceptions as Exceptions

logger = logging.getLogger(__name__)

UNLABELED: int = -1
"""Label stored for rows without senone label (target rows)."""


@dataclass(frozen=True)
class Batch:
    """
    Minibatch of the adaptation stage.
    """

    features: np.ndarray
    labels: np.ndarray
    """Senone class per row, UNLABELED for target rows."""
    domains: np.ndarray
    """Domain class index per row (0 = source, 1 = target)."""

    @property
    def size(self) -> int:
        return self.features.shape[0]

    @property
    def source_mask(self) -> np.ndarray:
        return self.domains == 0

    @property
    def target_mask(self) -> np.ndarray:
        return self.domains == 1

    @property
    def n_source(self) -> int:
        return int(np.sum(self.source_mask))

    @property
    def n_target(self) -> int:
        return int(np.sum(self.target_mask))


class MixedBatchIterator:
    """
    Iterates over the union of a labeled source dataset and an unlabeled target dataset in randomized order.

    Every epoch draws a new global permutation of all frames of both datasets; the batches of an epoch partition the
    union exactly. The labels of target frames are never read.

    Example
    -------
    ```
    iterator = MixedBatchIterator(source, target, batch_size=256, seed=0)
    for batch in iterator:
        ...
    iterator.new_epoch()
    ```
    """

    def __init__(
        self,
        source: Dataset.FrameDataset,
        target: Optional[Dataset.FrameDataset],
        batch_size: int,
        seed: int = 0,
        rng: Optional[np.random.Generator] = None,
    ):
        if batch_size < 1:
            raise Exceptions.ConfigError("Batch size has to be positive")
        source.require_labels()
        if target is not None and target.dims != source.dims:
            raise Exceptions.DimensionError(
                f"Source ({source.dims}) and target ({target.dims}) feature dimensions differ"
            )
        self.source = source
        self.target = target
        self.batch_size = batch_size
        # a passed generator takes precedence over the seed
        self.rng = rng if rng is not None else np.random.default_rng(seed)
        n_target = 0 if target is None else target.n_frames
        self._features = (
            source.features
            if target is None
            else np.concatenate([source.features, target.features])
        )
        self._labels = np.concatenate(
            [source.labels, np.full(n_target, UNLABELED, dtype=np.int64)]
        )
        self._domains = np.concatenate(
            [np.zeros(source.n_frames, dtype=np.int64), np.ones(n_target, dtype=np.int64)]
        )
        self.epoch = -1
        self._order = np.zeros(0, dtype=np.int64)
        self._position = 0
        self.new_epoch()

    @property
    def n_frames(self) -> int:
        return self._features.shape[0]

    @property
    def batches_per_epoch(self) -> int:
        return -(-self.n_frames // self.batch_size)

    def new_epoch(self) -> None:
        """
        Draws the permutation of the next epoch.
        """
        self.epoch += 1
        self._order = self.rng.permutation(self.n_frames)
        self._position = 0

    def next_batch(self) -> Batch:
        """
        Returns the next batch of at most batch_size rows.

        Raises
        ------
        Gradient_Reversal_Adaptation.Models.Exceptions.EndOfEpoch
            If every frame of the epoch was visited.
        """
        if self._position >= self.n_frames:
            raise Exceptions.EndOfEpoch(f"Epoch {self.epoch} exhausted")
        rows = self._order[self._position : self._position + self.batch_size]
        self._position += rows.size
        return Batch(
            features=self._features[rows],
            labels=self._labels[rows],
            domains=self._domains[rows],
        )

    def __iter__(self):
        return self

    def __next__(self) -> Batch:
        return self.next_batch()


def next_batch(it: MixedBatchIterator) -> Batch:
    """
    Returns the next batch of the iterator, see MixedBatchIterator.next_batch.
    """
    return it.next_batch()
