"""Sampling-free ground truth: exact population losses and bag-law moments."""

from __future__ import annotations

import itertools
from typing import Iterable

import numpy as np

from .data import FiniteDistribution, MarginalInfo
from .errors import EnumerationTooLarge, InsufficientData
from .losses import DEFAULT_CLAMP_EPS, LossKind, bag_losses, cross_entropy

ENUMERATION_LIMIT = 10**6


def population_square_loss(dist: FiniteDistribution, h) -> float:
    hv = h.evaluate(dist.features)
    return float(dist.masses @ (dist.etas * (1.0 - hv) ** 2 + (1.0 - dist.etas) * hv * hv))


def population_cross_entropy(dist: FiniteDistribution, h, clamp_eps: float = DEFAULT_CLAMP_EPS) -> float:
    hv = h.evaluate(dist.features)
    per_atom = dist.etas * cross_entropy(hv, 1.0, clamp_eps) + (1.0 - dist.etas) * cross_entropy(hv, 0.0, clamp_eps)
    return float(dist.masses @ per_atom)


def bag_law(dist: FiniteDistribution, k: int):
    """Every (feature tuple, label vector) pair of a size-``k`` bag with its probability.

    Returns ``(atom_idx, labels, prob)`` with shapes ``(T, k)``, ``(T, k)``
    and ``(T,)``, where ``T = s**k * 2**k``.
    """
    s = dist.size
    total = s**k * 2**k
    if total > ENUMERATION_LIMIT:
        raise EnumerationTooLarge(f"{s}^{k} * 2^{k} = {total} terms exceeds {ENUMERATION_LIMIT}")
    tuples = np.array(list(itertools.product(range(s), repeat=k)), dtype=int).reshape(-1, k)
    labels = np.array(list(itertools.product((0.0, 1.0), repeat=k))).reshape(-1, k)
    feat_prob = dist.masses[tuples].prod(axis=1)
    eta = dist.etas[tuples]  # (s^k, k)
    # P(labels | tuple) as exact products of eta / (1 - eta)
    lab_prob = np.where(labels[None, :, :] == 1.0, eta[:, None, :], 1.0 - eta[:, None, :]).prod(axis=2)
    prob = (feat_prob[:, None] * lab_prob).reshape(-1)
    atom_idx = np.repeat(tuples, labels.shape[0], axis=0)
    all_labels = np.tile(labels, (tuples.shape[0], 1))
    return atom_idx, all_labels, prob


def _bag_values(dist, k, h, kind: LossKind, info: MarginalInfo, clamp_eps):
    atom_idx, labels, prob = bag_law(dist, k)
    hv = h.evaluate(dist.features)[atom_idx]
    mean = info.mean_for(h) if kind.needs_mean_prediction else None
    values, _ = bag_losses(kind, hv, labels.mean(axis=1), info.p, mean, clamp_eps)
    return values, prob


def enumerate_bag_expectation(dist, k: int, h, kind: LossKind, info: MarginalInfo,
                              clamp_eps: float = DEFAULT_CLAMP_EPS) -> float:
    values, prob = _bag_values(dist, k, h, kind, info, clamp_eps)
    return float(prob @ values)


def enumerate_bag_variance(dist, k: int, h, kind: LossKind, info: MarginalInfo,
                           clamp_eps: float = DEFAULT_CLAMP_EPS) -> float:
    values, prob = _bag_values(dist, k, h, kind, info, clamp_eps)
    mean = prob @ values
    return float(prob @ (values - mean) ** 2)


def enumerate_clip_probability(dist, k: int, h, kind: LossKind, info: MarginalInfo) -> float:
    """Exact probability that the clipped loss fires on a random bag."""
    atom_idx, labels, prob = bag_law(dist, k)
    hv = h.evaluate(dist.features)[atom_idx]
    _, clipped = bag_losses(kind, hv, labels.mean(axis=1), info.p, info.mean_for(h))
    return float(prob @ clipped)


class RunningStats:
    """Single-pass mean / M2 accumulator (Welford, with Chan's merge for chunks)."""

    def __init__(self):
        self.count = 0
        self.mean = 0.0
        self.m2 = 0.0

    def push(self, x: float) -> None:
        self.count += 1
        delta = x - self.mean
        self.mean += delta / self.count
        self.m2 += delta * (x - self.mean)

    def push_many(self, xs) -> None:
        xs = np.asarray(xs, dtype=float).reshape(-1)
        if xs.size == 0:
            return
        n_b = xs.size
        mean_b = float(xs.mean())
        m2_b = float(((xs - mean_b) ** 2).sum())
        n = self.count + n_b
        delta = mean_b - self.mean
        self.mean += delta * n_b / n
        self.m2 += m2_b + delta * delta * self.count * n_b / n
        self.count = n

    @property
    def variance(self) -> float:
        if self.count < 2:
            raise InsufficientData("sample variance needs at least two values")
        return self.m2 / (self.count - 1)


def streaming_variance(values: Iterable[float], chunk: int = 4096) -> tuple[float, float, int]:
    """Return ``(mean, unbiased variance, count)`` in one pass over ``values``."""
    stats = RunningStats()
    if isinstance(values, np.ndarray):
        for start in range(0, values.size, chunk):
            stats.push_many(values.reshape(-1)[start: start + chunk])
    else:
        buf = []
        for v in values:
            buf.append(v)
            if len(buf) == chunk:
                stats.push_many(buf)
                buf.clear()
        stats.push_many(buf)
    return stats.mean, stats.variance, stats.count
