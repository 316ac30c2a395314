"""Sample pool with a labeled/unlabeled split and a counted label oracle.

Hygiene contract: labels of currently-unlabeled samples are only
reachable through hidden_labels(), which counts every such read in
oracle_reads. Acquisition strategies must not touch it (the balanced
variant is the sanctioned exception: it reads labels to enforce
per-class counts). Dataset construction (generators, initial labeling,
CSV export) happens before any strategy runs and goes through the
module-private _raw_labels path, so the counter stays exactly zero on a
fresh experiment until a strategy actually peeks.
"""

from __future__ import annotations

import numpy as np


class Pool:
    def __init__(self, features, labels, labeled_idx=(), num_classes=None):
        self.features = np.asarray(features, dtype=np.float64)
        if self.features.ndim != 2:
            raise ValueError("features must be a 2-D array")
        labels = np.asarray(labels, dtype=np.int64)
        if labels.shape != (self.features.shape[0],):
            raise ValueError(
                f"labels shape {labels.shape} does not match {self.features.shape[0]} samples"
            )
        self._labels = labels
        n = self.features.shape[0]
        labeled = np.array(sorted(set(int(i) for i in labeled_idx)), dtype=np.int64)
        if labeled.size and (labeled.min() < 0 or labeled.max() >= n):
            raise ValueError("labeled indices out of range")
        self.labeled_idx = labeled
        mask = np.ones(n, dtype=bool)
        mask[labeled] = False
        self.unlabeled_idx = np.flatnonzero(mask).astype(np.int64)
        if num_classes is None:
            num_classes = int(labels.max()) + 1 if n else 0
        self.num_classes = int(num_classes)
        self.oracle_reads = 0

    @property
    def size(self):
        return self.features.shape[0]

    @property
    def input_dim(self):
        return self.features.shape[1]

    def labeled_features(self):
        return self.features[self.labeled_idx]

    def labeled_labels(self):
        """Labels of already-annotated samples; free to read."""
        return self._labels[self.labeled_idx].copy()

    def hidden_labels(self, indices):
        """Oracle peek at labels; counts reads of unlabeled indices."""
        indices = np.atleast_1d(np.asarray(indices, dtype=np.int64))
        unlabeled = np.isin(indices, self.unlabeled_idx, assume_unique=False)
        self.oracle_reads += int(unlabeled.sum())
        return self._labels[indices].copy()

    def acquire(self, indices):
        """Annotate: move indices from unlabeled to labeled. Not counted."""
        indices = np.atleast_1d(np.asarray(indices, dtype=np.int64))
        if indices.size != np.unique(indices).size:
            raise ValueError("acquired indices must be distinct")
        if not np.all(np.isin(indices, self.unlabeled_idx)):
            raise ValueError("can only acquire currently-unlabeled indices")
        self.labeled_idx = np.sort(np.concatenate([self.labeled_idx, indices]))
        keep = ~np.isin(self.unlabeled_idx, indices)
        self.unlabeled_idx = self.unlabeled_idx[keep]

    def copy(self):
        clone = Pool(
            self.features.copy(),
            self._labels.copy(),
            labeled_idx=self.labeled_idx.tolist(),
            num_classes=self.num_classes,
        )
        clone.oracle_reads = self.oracle_reads
        return clone


def _raw_labels(pool: Pool) -> np.ndarray:
    """Construction-time label access; bypasses the oracle counter.

    Only dataset setup and evaluation on fully-held-out pools may use
    this. Strategies go through pool.hidden_labels so their reads are
    counted.
    """
    return pool._labels.copy()
