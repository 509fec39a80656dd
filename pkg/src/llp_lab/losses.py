"""Bag-level aggregate losses.

Every loss exists in two forms: a per-bag function taking ``(h, bag, info)``
and returning a :class:`BagLossValue`, and the vectorised :func:`bag_losses`
that works on precomputed hypothesis values of shape ``(m, k)``. The per-bag
functions are thin wrappers over the vectorised kernels, so both paths
share one set of formulas.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .data import Bag, MarginalInfo
from .errors import DimensionMismatch, ThetaOutOfRange

DEFAULT_CLAMP_EPS = 1e-7


class ThresholdMode(str, enum.Enum):
    KNOWN = "known"  # exact marginals: sqrt(8 k ln(2/theta))
    ESTIMATED = "estimated"  # split-sample marginals: sqrt(18 k ln(6/theta))


class LossName(str, enum.Enum):
    OURS_CLIPPED = "ours_clipped"
    OURS_UNCLIPPED = "ours_unclipped"
    LI_ET_AL = "li_et_al"
    EASYLLP = "easyllp"
    EASYLLP_SQ = "easyllp_sq"
    VANILLA_SQ = "vanilla_sq"
    VANILLA_CE = "vanilla_ce"


@dataclass(frozen=True)
class LossKind:
    name: LossName
    theta: float | None = None
    threshold_mode: ThresholdMode = ThresholdMode.KNOWN

    def __post_init__(self):
        object.__setattr__(self, "name", LossName(self.name))
        object.__setattr__(self, "threshold_mode", ThresholdMode(self.threshold_mode))
        if self.name is LossName.OURS_CLIPPED:
            if self.theta is None:
                raise ThetaOutOfRange("the clipped loss needs theta")
            _check_theta(self.theta)

    @classmethod
    def parse(cls, label: str) -> "LossKind":
        """Inverse of :attr:`label`, e.g. ``"ours_clipped(theta=0.1)"``."""
        if "(" in label:
            name, rest = label.rstrip(")").split("(", 1)
            args = dict(part.split("=", 1) for part in rest.split(";") if part)
            return cls(LossName(name), float(args["theta"]), ThresholdMode(args.get("mode", "known")))
        return cls(LossName(label))

    @property
    def label(self) -> str:
        if self.name is LossName.OURS_CLIPPED:
            suffix = "" if self.threshold_mode is ThresholdMode.KNOWN else f";mode={self.threshold_mode.value}"
            return f"{self.name.value}(theta={self.theta!r}{suffix})"
        return self.name.value

    @property
    def needs_mean_prediction(self) -> bool:
        return self.name in (LossName.OURS_CLIPPED, LossName.OURS_UNCLIPPED, LossName.LI_ET_AL)


OURS_UNCLIPPED = LossKind(LossName.OURS_UNCLIPPED)
LI_ET_AL = LossKind(LossName.LI_ET_AL)
EASYLLP = LossKind(LossName.EASYLLP)
EASYLLP_SQ = LossKind(LossName.EASYLLP_SQ)
VANILLA_SQ = LossKind(LossName.VANILLA_SQ)
VANILLA_CE = LossKind(LossName.VANILLA_CE)


def ours_clipped_kind(theta: float, threshold_mode=ThresholdMode.KNOWN) -> LossKind:
    return LossKind(LossName.OURS_CLIPPED, theta, threshold_mode)


@dataclass(frozen=True)
class BagLossValue:
    value: float
    clipped: bool = False


def _check_theta(theta: float) -> None:
    if not (0.0 < theta < 1.0):
        raise ThetaOutOfRange(f"theta must lie in (0, 1), got {theta}")


def clipping_threshold(k: int, theta: float, mode: ThresholdMode = ThresholdMode.KNOWN) -> float:
    _check_theta(theta)
    if ThresholdMode(mode) is ThresholdMode.KNOWN:
        return math.sqrt(8.0 * k * math.log(2.0 / theta))
    return math.sqrt(18.0 * k * math.log(6.0 / theta))


def cross_entropy(q, y, clamp_eps: float = DEFAULT_CLAMP_EPS):
    q = np.clip(q, clamp_eps, 1.0 - clamp_eps)
    return -y * np.log(q) - (1.0 - y) * np.log1p(-q)


# ---------------------------------------------------------------------------
# vectorised kernels over (m, k) hypothesis values
# ---------------------------------------------------------------------------


def centered_stats(hvals, alphas, p, mean_pred):
    """``(k*(alpha - p), sum_i h(x_i) - k*E[h])`` for every bag."""
    hvals = np.asarray(hvals, dtype=float)
    k = hvals.shape[-1]
    return k * (np.asarray(alphas) - p), hvals.sum(axis=-1) - k * np.asarray(mean_pred)


def bag_losses(kind: LossKind, hvals, alphas, p: float, mean_pred=None, clamp_eps: float = DEFAULT_CLAMP_EPS):
    """Loss of every bag; returns ``(values, clipped)`` arrays of shape ``(m,)``.

    ``mean_pred`` may be a scalar or a per-bag array (leave-one-bag-out).
    """
    hvals = np.atleast_2d(np.asarray(hvals, dtype=float))
    alphas = np.asarray(alphas, dtype=float).reshape(-1)
    k = hvals.shape[1]
    clipped = np.zeros(hvals.shape[0], dtype=bool)
    name = kind.name

    if name in (LossName.OURS_CLIPPED, LossName.OURS_UNCLIPPED):
        ka, e = centered_stats(hvals, alphas, p, mean_pred)
        gap = ka - e
        quad = gap * gap / k
        extra = (np.asarray(mean_pred, dtype=float) - p) ** 2
        if name is LossName.OURS_CLIPPED:
            keep = np.abs(gap) <= clipping_threshold(k, kind.theta, kind.threshold_mode)
            clipped = ~keep
            quad = np.where(keep, quad, 0.0)
        return quad + extra, clipped

    if name is LossName.LI_ET_AL:
        resid = k * alphas - hvals.sum(axis=1)
        extra = (np.asarray(mean_pred, dtype=float) - p) ** 2
        return resid * resid / k - (k - 1) * extra, clipped

    if name in (LossName.EASYLLP, LossName.EASYLLP_SQ):
        w1 = k * alphas - (k - 1) * p
        w0 = k * (1.0 - alphas) - (k - 1) * (1.0 - p)
        if name is LossName.EASYLLP:
            pos, neg = cross_entropy(hvals, 1.0, clamp_eps), cross_entropy(hvals, 0.0, clamp_eps)
        else:
            pos, neg = (1.0 - hvals) ** 2, hvals * hvals
        return (w1[:, None] * pos + w0[:, None] * neg).mean(axis=1), clipped

    if name is LossName.VANILLA_SQ:
        return (hvals.mean(axis=1) - alphas) ** 2, clipped

    if name is LossName.VANILLA_CE:
        return cross_entropy(hvals.mean(axis=1), alphas, clamp_eps), clipped

    raise ValueError(f"unknown loss {kind!r}")


def easyllp_example_terms(hvals, alphas, p: float, squared: bool = True, clamp_eps: float = DEFAULT_CLAMP_EPS):
    """Per-example EasyLLP terms, shape ``(m, k)``; their bag mean is the bag loss."""
    hvals = np.atleast_2d(np.asarray(hvals, dtype=float))
    k = hvals.shape[1]
    alphas = np.asarray(alphas, dtype=float).reshape(-1, 1)
    w1 = k * alphas - (k - 1) * p
    w0 = k * (1.0 - alphas) - (k - 1) * (1.0 - p)
    if squared:
        return w1 * (1.0 - hvals) ** 2 + w0 * hvals * hvals
    return w1 * cross_entropy(hvals, 1.0, clamp_eps) + w0 * cross_entropy(hvals, 0.0, clamp_eps)


# ---------------------------------------------------------------------------
# per-bag API
# ---------------------------------------------------------------------------


def _single(kind, h, bag: Bag, info: MarginalInfo | None, clamp_eps=DEFAULT_CLAMP_EPS) -> BagLossValue:
    hv = h.evaluate(bag.features)[None, :]
    mean = info.mean_for(h) if kind.needs_mean_prediction else None
    p = info.p if info is not None else 0.0
    values, clipped = bag_losses(kind, hv, [bag.alpha], p, mean, clamp_eps)
    return BagLossValue(float(values[0]), bool(clipped[0]))


def bag_stat(h, bag: Bag, info: MarginalInfo) -> tuple[float, float]:
    ka, e = centered_stats(h.evaluate(bag.features), bag.alpha, info.p, info.mean_for(h))
    return float(ka), float(e)


def ours_unclipped(h, bag: Bag, info: MarginalInfo) -> BagLossValue:
    return _single(OURS_UNCLIPPED, h, bag, info)


def ours_clipped(h, bag: Bag, info: MarginalInfo, theta: float,
                 threshold_mode: ThresholdMode = ThresholdMode.KNOWN) -> BagLossValue:
    """Debiased bag loss whose quadratic term is zeroed when the centred gap
    exceeds :func:`clipping_threshold`; the ``(E[h]-p)^2`` term always stays."""
    return _single(ours_clipped_kind(theta, threshold_mode), h, bag, info)


def li_loss(h, bag: Bag, info: MarginalInfo) -> BagLossValue:
    return _single(LI_ET_AL, h, bag, info)


def easyllp_loss(h, bag: Bag, info: MarginalInfo, clamp_eps: float = DEFAULT_CLAMP_EPS,
                 squared: bool = False) -> BagLossValue:
    return _single(EASYLLP_SQ if squared else EASYLLP, h, bag, info, clamp_eps)


def vanilla_sq(h, bag: Bag) -> BagLossValue:
    return _single(VANILLA_SQ, h, bag, None)


def vanilla_ce(h, bag: Bag, clamp_eps: float = DEFAULT_CLAMP_EPS) -> BagLossValue:
    return _single(VANILLA_CE, h, bag, None, clamp_eps)


def evaluate(kind: LossKind, h, bag: Bag, info: MarginalInfo | None = None,
             clamp_eps: float = DEFAULT_CLAMP_EPS) -> BagLossValue:
    return _single(kind, h, bag, info, clamp_eps)


# ---------------------------------------------------------------------------
# linear models
# ---------------------------------------------------------------------------


def linear_bag_loss_and_grad(w, bag: Bag, mu_x, mu_y: float) -> tuple[float, np.ndarray]:
    """Unclipped bag loss of ``x -> w.x`` and its gradient in ``w``.

    value = k (w.(xbar - mu_x) - (alpha - mu_y))^2 + (w.mu_x - mu_y)^2
    """
    w = np.asarray(w, dtype=float).reshape(-1)
    mu_x = np.asarray(mu_x, dtype=float).reshape(-1)
    if bag.features.shape[1] != w.shape[0] or mu_x.shape[0] != w.shape[0]:
        raise DimensionMismatch(
            f"w has dimension {w.shape[0]}, features {bag.features.shape[1]}, mu_x {mu_x.shape[0]}"
        )
    return linear_loss_and_grad(w, bag.centroid, bag.alpha, bag.k, mu_x, mu_y)


def linear_loss_and_grad(w, centroid, alpha, k, mu_x, mu_y):
    d = centroid - mu_x
    r = w @ d - (alpha - mu_y)
    s = w @ mu_x - mu_y
    return float(k * r * r + s * s), 2.0 * k * r * d + 2.0 * s * mu_x
