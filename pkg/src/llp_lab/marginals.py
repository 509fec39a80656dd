"""Exact and estimated label marginals ``p`` and prediction means ``E[h(x)]``."""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .bagging import BaggedSample
from .data import Bag, FiniteDistribution, MarginalInfo, Provenance
from .errors import EmptySample, InvalidSplit, SingleBagBatch


def exact_label_marginal(dist: FiniteDistribution) -> float:
    return float(dist.masses @ dist.etas)


def exact_prediction_mean(dist, h) -> float:
    """``sum_x mass(x) h(x)``; raises if ``h`` is undefined somewhere on the support."""
    return float(dist.masses @ h.evaluate(dist.features))


def exact_marginals(dist: FiniteDistribution, hypotheses) -> MarginalInfo:
    return MarginalInfo(
        exact_label_marginal(dist),
        {h.id: exact_prediction_mean(dist, h) for h in hypotheses},
        Provenance.EXACT,
    )


def estimate_p_from_bags(sample: BaggedSample) -> float:
    if len(sample) == 0:
        raise EmptySample("cannot estimate p from zero bags")
    return float(np.mean(sample.alphas))


def loo_prediction_mean(batch: Sequence[Bag], target: int, h) -> float:
    """Mean of ``h`` over every example of the batch outside bag ``target``."""
    batch = list(batch)
    if len(batch) < 2:
        raise SingleBagBatch("leave-one-bag-out needs at least two bags in the batch")
    total, count = 0.0, 0
    for j, bag in enumerate(batch):
        if j == target:
            continue
        vals = h.evaluate(bag.features)
        total += float(vals.sum())
        count += vals.shape[0]
    return total / count


def loo_prediction_means(hvals: np.ndarray, batches) -> np.ndarray:
    """Vectorised leave-one-bag-out means for a whole sample.

    ``hvals`` has shape ``(m, k)``; ``batches`` is a list of bag-index
    arrays as produced by :func:`llp_lab.bagging.batch_bags`. Bags in a
    single-bag batch get ``nan``; callers substitute another marginal.
    """
    bag_sums = hvals.sum(axis=1)
    k = hvals.shape[1]
    out = np.full(hvals.shape[0], np.nan)
    for idx in batches:
        if len(idx) < 2:
            continue
        total = bag_sums[idx].sum()
        out[idx] = (total - bag_sums[idx]) / ((len(idx) - 1) * k)
    return out


def split_sample_estimates(sample: BaggedSample, m2: int | None, hypotheses) -> tuple[MarginalInfo, BaggedSample]:
    """Estimate marginals on the last ``m2`` bags, return them and the first ``m1`` bags.

    ``m2=None`` uses ``ceil(m/2)``.
    """
    m = len(sample)
    if m2 is None:
        m2 = math.ceil(m / 2)
    if not 1 <= m2 < m:
        raise InvalidSplit(f"need 1 <= m2 < m, got m2={m2}, m={m}")
    m1 = m - m2
    held_out = sample[m1:]
    # exactly rounded sums keep the estimates independent of bag order
    p_hat = math.fsum(held_out.alphas.tolist()) / m2
    means = {h.id: math.fsum(held_out.hypothesis_values(h).ravel().tolist()) / (m2 * sample.k) for h in hypotheses}
    return MarginalInfo(p_hat, means, Provenance.SPLIT_SAMPLE, sample.mode), sample[:m1]
