"""Empirical risk minimisation over a finite class with the clipped bag loss."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

from .bagging import BaggedSample
from .data import MarginalInfo
from .errors import EmptyHypothesisClass, EmptySample, ThetaOutOfRange
from .losses import ThresholdMode, bag_losses, ours_clipped_kind
from .marginals import split_sample_estimates
from .oracles import population_square_loss


@dataclass(frozen=True)
class ExactMarginals:
    info: MarginalInfo


@dataclass(frozen=True)
class SplitSample:
    m2: int | None = None  # None -> ceil(m / 2)


MarginalMode = Union[ExactMarginals, SplitSample]


@dataclass(frozen=True)
class ErmConfig:
    """``theta`` wins when given; otherwise it is derived as ``beta / (16 k^2)``."""

    marginal_mode: MarginalMode
    theta: float | None = None
    beta: float | None = None

    def __post_init__(self):
        if self.theta is None and self.beta is None:
            raise ValueError("give theta or beta")
        if self.theta is not None and not 0.0 < self.theta < 1.0:
            raise ThetaOutOfRange(f"theta must lie in (0, 1), got {self.theta}")
        if self.beta is not None and self.beta <= 0:
            raise ValueError("beta must be positive")

    def resolve_theta(self, k: int) -> float:
        if self.theta is not None:
            return self.theta
        theta = self.beta / (16.0 * k * k)
        if not 0.0 < theta < 1.0:
            raise ThetaOutOfRange(f"derived theta={theta} outside (0, 1)")
        return theta


@dataclass
class ErmResult:
    chosen: int
    empirical_losses: dict[int, float]
    clip_counts: dict[int, int]
    theta: float
    info: MarginalInfo
    n_train_bags: int = field(default=0)


def erm_fit(sample: BaggedSample, hypotheses: Sequence, config: ErmConfig) -> ErmResult:
    hypotheses = sorted(hypotheses, key=lambda h: h.id)
    if not hypotheses:
        raise EmptyHypothesisClass("the hypothesis class is empty")
    if len({h.id for h in hypotheses}) != len(hypotheses):
        raise ValueError("hypothesis ids must be unique")
    mode = config.marginal_mode
    if isinstance(mode, SplitSample):
        info, train = split_sample_estimates(sample, mode.m2, hypotheses)
        threshold_mode = ThresholdMode.ESTIMATED
    else:
        info, train = mode.info, sample
        threshold_mode = ThresholdMode.KNOWN
    if len(train) == 0:
        raise EmptySample("no training bags")
    theta = config.resolve_theta(train.k)
    kind = ours_clipped_kind(theta, threshold_mode)

    losses, clips = {}, {}
    for h in hypotheses:
        values, clipped = bag_losses(kind, train.hypothesis_values(h), train.alphas, info.p, info.mean_for(h))
        # fsum is exactly rounded, so the objective does not depend on bag order
        losses[h.id] = math.fsum(values.tolist()) / len(train)
        clips[h.id] = int(clipped.sum())

    chosen = hypotheses[0].id
    for h in hypotheses[1:]:
        if losses[h.id] < losses[chosen]:
            chosen = h.id
    return ErmResult(chosen, losses, clips, theta, info, len(train))


def population_regret(dist, hypotheses: Sequence, chosen: int) -> float:
    risks = {h.id: population_square_loss(dist, h) for h in hypotheses}
    if chosen not in risks:
        raise KeyError(f"hypothesis {chosen} is not in the class")
    return risks[chosen] - min(risks.values())
