"""Fixed-size bagging and batching of bags."""

from __future__ import annotations

from typing import Iterator, Sequence

import numpy as np

from .data import Bag, Dataset, Mode, make_rng
from .errors import BagSizeExceedsData, BatchSmallerThanBag


class BaggedSample(Sequence):
    """``m`` bags of size ``k`` stored as an ``(m, k, d)`` feature array plus alphas.

    Indexing returns :class:`Bag` objects; slicing and :meth:`subset` return
    new samples sharing nothing mutable with this one.
    """

    def __init__(self, features, alphas, mode: Mode = Mode.CLASSIFICATION):
        F = np.array(features, dtype=float)
        if F.ndim == 2:
            F = F[:, :, None]
        a = np.array(alphas, dtype=float).reshape(-1)
        if F.ndim != 3 or F.shape[0] != a.shape[0]:
            raise ValueError(f"features {F.shape} do not match {a.shape[0]} alphas")
        mode = Mode(mode)
        if mode is Mode.CLASSIFICATION and F.shape[0]:
            k = F.shape[1]
            counts = a * k
            if np.any((a < 0) | (a > 1)) or np.any(np.abs(counts - np.round(counts)) > 1e-9):
                raise ValueError("classification alphas must be multiples of 1/k in [0, 1]")
        F.setflags(write=False)
        a.setflags(write=False)
        self.features = F
        self.alphas = a
        self.mode = mode

    @property
    def k(self) -> int:
        return self.features.shape[1]

    @property
    def dim(self) -> int:
        return self.features.shape[2]

    @property
    def m(self) -> int:
        return self.features.shape[0]

    @property
    def n_examples(self) -> int:
        return self.m * self.k

    @property
    def bags(self) -> list[Bag]:
        return list(self)

    def __len__(self) -> int:
        return self.m

    def __getitem__(self, j):
        if isinstance(j, slice):
            return BaggedSample(self.features[j], self.alphas[j], self.mode)
        return Bag(self.features[j], self.alphas[j], self.mode)

    def __iter__(self) -> Iterator[Bag]:
        for j in range(self.m):
            yield self[j]

    def subset(self, indices) -> "BaggedSample":
        idx = np.asarray(indices, dtype=int)
        return BaggedSample(self.features[idx], self.alphas[idx], self.mode)

    def hypothesis_values(self, h) -> np.ndarray:
        """``h`` evaluated on every example, shape ``(m, k)``."""
        flat = self.features.reshape(-1, self.dim)
        return np.asarray(h.evaluate(flat), dtype=float).reshape(self.m, self.k)

    @classmethod
    def from_bags(cls, bags: Sequence[Bag]) -> "BaggedSample":
        bags = list(bags)
        if not bags:
            raise ValueError("need at least one bag")
        if len({b.k for b in bags}) != 1:
            raise ValueError("all bags must have the same size")
        return cls(np.stack([b.features for b in bags]), [b.alpha for b in bags], bags[0].mode)

    def __repr__(self) -> str:
        return f"BaggedSample(m={self.m}, k={self.k}, d={self.dim}, mode={self.mode.value})"


def partition_into_bags(data, k: int, seed) -> BaggedSample:
    """Shuffle ``data`` and cut it into ``n // k`` consecutive bags of size ``k``.

    The last ``n % k`` shuffled examples are dropped.
    """
    if k < 1:
        raise ValueError("bag size must be at least 1")
    ds = data if isinstance(data, Dataset) else Dataset.from_examples(list(data))
    n = len(ds)
    if n < k:
        raise BagSizeExceedsData(f"bag size {k} exceeds the {n} available examples")
    perm = make_rng(seed).permutation(n)
    m = n // k
    keep = perm[: m * k]
    X = ds.X[keep].reshape(m, k, ds.dim)
    alphas = ds.y[keep].reshape(m, k).mean(axis=1)
    if ds.mode is Mode.CLASSIFICATION:
        # snap to exact multiples of 1/k so alpha*k reconstructs the count
        alphas = np.round(alphas * k) / k
    return BaggedSample(X, alphas, ds.mode)


def batch_bags(sample: BaggedSample, examples_per_batch: int, seed=None) -> list[np.ndarray]:
    """Group bag indices into batches of ``examples_per_batch // k`` bags.

    When ``seed`` is given the bag order is permuted first (one call per
    epoch); otherwise bags keep their sample order. A final short batch is
    kept.
    """
    k = sample.k
    if examples_per_batch < k:
        raise BatchSmallerThanBag(f"batch of {examples_per_batch} examples cannot hold a bag of size {k}")
    per_batch = examples_per_batch // k
    order = np.arange(sample.m) if seed is None else make_rng(seed).permutation(sample.m)
    return [order[i: i + per_batch] for i in range(0, sample.m, per_batch)]
