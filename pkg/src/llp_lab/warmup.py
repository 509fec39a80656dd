"""Two-hypothesis discriminator for the realizable case.

With ``E_s = sum_i h_s(x_i)`` per bag, the decision uses

* ``A_s = sum_j (k alpha_j - E_s)`` when the mean gap ``|delta|`` is at
  least ``sqrt(beta / 2k)``: pick the hypothesis with smaller ``|A_s|``;
* otherwise the pairwise ``Q = sum_j sign-adjusted (k alpha_j - mu_j)``
  with ``mu_j = (E_1 + E_2) / 2``: ``Q >= 0`` picks ``h2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bagging import BaggedSample
from .errors import EmptySample, PreconditionViolated

PHI_MINUS_ONE = 0.5 * math.erfc(1.0 / math.sqrt(2.0))  # standard normal cdf at -1


def min_bag_size(beta: float) -> float:
    """Smallest bag size covered by the recovery guarantee: ``2 / (Phi(-1)^2 beta)``."""
    return 2.0 / (PHI_MINUS_ONE**2 * beta)


def check_bag_size(k: int, beta: float) -> None:
    bound = min_bag_size(beta)
    if k < bound:
        raise PreconditionViolated(f"bag size k={k} is below 2/(Phi(-1)^2 beta) = {bound:.1f} for beta={beta}")


@dataclass(frozen=True)
class WarmupInput:
    bags: BaggedSample
    h1: object
    h2: object
    delta: float
    beta: float

    def __post_init__(self):
        if not 0.0 < self.beta <= 1.0:
            raise ValueError(f"beta must lie in (0, 1], got {self.beta}")
        if abs(self.delta) > 1.0:
            raise ValueError(f"|delta| must be at most 1, got {self.delta}")
        if self.delta**2 > self.beta * (1 + 1e-12):
            raise ValueError(f"delta^2={self.delta**2} exceeds beta={self.beta}")


def _require_bags(bags: BaggedSample) -> None:
    if len(bags) == 0:
        raise EmptySample("the discriminator needs at least one bag")


def stat_A(h, bags: BaggedSample) -> float:
    _require_bags(bags)
    return float(np.sum(bags.k * bags.alphas - bags.hypothesis_values(h).sum(axis=1)))


def _q_terms(e1, e2, k_alpha):
    mu = 0.5 * (e1 + e2)
    return np.where(e1 <= e2, k_alpha - mu, mu - k_alpha)


def stat_Q(h1, h2, bags: BaggedSample) -> float:
    _require_bags(bags)
    e1 = bags.hypothesis_values(h1).sum(axis=1)
    e2 = bags.hypothesis_values(h2).sum(axis=1)
    return float(np.sum(_q_terms(e1, e2, bags.k * bags.alphas)))


def select_two(inp: WarmupInput):
    """Return the id of the hypothesis judged to be the Bayes predictor."""
    bags = inp.bags
    _require_bags(bags)
    if abs(inp.delta) >= math.sqrt(inp.beta / (2 * bags.k)):
        a1, a2 = stat_A(inp.h1, bags), stat_A(inp.h2, bags)
        return inp.h1.id if abs(a1) < abs(a2) else inp.h2.id
    return inp.h2.id if stat_Q(inp.h1, inp.h2, bags) >= 0 else inp.h1.id


def estimate_delta_beta(bags: BaggedSample, h1, h2) -> tuple[float, float]:
    """Plug-in ``(delta, beta)`` from the unlabeled bag features (no labels used)."""
    _require_bags(bags)
    diff = bags.hypothesis_values(h1) - bags.hypothesis_values(h2)
    return float(diff.mean()), float((diff * diff).mean())
