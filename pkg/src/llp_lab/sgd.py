"""Projected SGD on the truncated bag-level square loss for linear predictors."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .bagging import BaggedSample
from .data import RegressionDistribution
from .errors import DimensionMismatch, NonPositiveBound
from .losses import linear_loss_and_grad


@dataclass(frozen=True)
class SgdParams:
    rho_w: float
    rho_x: float
    rho_y: float
    mu_x: np.ndarray
    mu_y: float
    m: int
    k: int
    L_star: float = 0.0
    eta: float | None = None  # step size override
    theta: float | None = None  # truncation override

    def __post_init__(self):
        mu_x = np.atleast_1d(np.asarray(self.mu_x, dtype=float)).copy()
        mu_x.setflags(write=False)
        object.__setattr__(self, "mu_x", mu_x)
        for name in ("rho_w", "rho_x", "rho_y"):
            if not getattr(self, name) > 0:
                raise NonPositiveBound(f"{name} must be positive, got {getattr(self, name)}")
        if self.m < 1 or self.k < 1:
            raise NonPositiveBound("m and k must be at least 1")
        if self.L_star < 0:
            raise ValueError("L_star must be nonnegative")
        if np.linalg.norm(mu_x) > self.rho_x * (1 + 1e-12):
            raise ValueError(f"|mu_x| = {np.linalg.norm(mu_x)} exceeds rho_x = {self.rho_x}")
        if abs(self.mu_y) > self.rho_y * (1 + 1e-12):
            raise ValueError(f"|mu_y| = {abs(self.mu_y)} exceeds rho_y = {self.rho_y}")
        if self.eta is not None and self.eta < 0:
            raise ValueError("step size must be nonnegative")
        if self.theta is not None and self.theta < 0:
            raise ValueError("truncation threshold must be nonnegative")


def derive_constants(params: SgdParams) -> tuple[float, float, float]:
    """Return ``(theta, zeta, eta)`` from the norm bounds, ``m``, ``k`` and ``L*``.

    theta = sqrt((8/k) ln(9 k m (rho_w rho_x + rho_y)^2 / (rho_w rho_x)^2))
    zeta  = (k theta^2 + 1) rho_x^2
    eta   = min(rho_w / sqrt(2 zeta m L*), 1 / (2 zeta))

    Overrides in ``params`` are ignored here; :func:`sgd_train` applies them.
    """
    k, m = params.k, params.m
    rw, rx, ry = params.rho_w, params.rho_x, params.rho_y
    inner = 9.0 * k * m * (rw * rx + ry) ** 2 / (rw * rw * rx * rx)
    theta = math.sqrt(8.0 / k * math.log(inner))
    zeta = (k * theta * theta + 1.0) * rx * rx
    eta = 1.0 / (2.0 * zeta)
    if params.L_star > 0:
        eta = min(rw / math.sqrt(2.0 * zeta * m * params.L_star), eta)
    return theta, zeta, eta


def truncation_probability_bound(params: SgdParams) -> float:
    """``delta = (rho_w rho_x)^2 / (9 k m (rho_w rho_x + rho_y)^2)``, the skip-probability bound."""
    rw, rx, ry = params.rho_w, params.rho_x, params.rho_y
    return (rw * rx) ** 2 / (9.0 * params.k * params.m * (rw * rx + ry) ** 2)


def project_ball(w, rho: float) -> np.ndarray:
    if rho <= 0:
        raise NonPositiveBound("radius must be positive")
    w = np.asarray(w, dtype=float)
    norm = float(np.linalg.norm(w))
    if norm <= rho:
        return w.copy()
    return w * (rho / norm)


@dataclass
class SgdTrace:
    final_average: np.ndarray
    skipped_bags: int
    n_bags: int
    theta: float
    eta: float
    per_step_norms: list[float] | None = field(default=None)

    @property
    def skip_rate(self) -> float:
        return self.skipped_bags / self.n_bags


def sgd_train(bags: BaggedSample, params: SgdParams, record_norms: bool = False) -> SgdTrace:
    """One pass of truncated projected SGD; returns the average of w_1..w_m.

    Bags whose centroid is farther than ``theta * rho_x`` from ``mu_x`` are
    skipped; the unchanged iterate still enters the average.
    """
    if bags.k != params.k:
        raise ValueError(f"bag size {bags.k} differs from params.k={params.k}")
    if len(bags) != params.m:
        raise ValueError(f"{len(bags)} bags given but params.m={params.m}")
    d = bags.dim
    if params.mu_x.shape[0] != d:
        raise DimensionMismatch(f"mu_x has dimension {params.mu_x.shape[0]}, features {d}")
    norms = np.linalg.norm(bags.features, axis=2)
    if np.any(norms > params.rho_x * (1 + 1e-12)):
        warnings.warn(f"{int((norms > params.rho_x).sum())} feature vectors exceed rho_x={params.rho_x}",
                      RuntimeWarning, stacklevel=2)

    theta, _, eta = derive_constants(params)
    if params.theta is not None:
        theta = params.theta
    if params.eta is not None:
        eta = params.eta

    centroids = bags.features.mean(axis=1)
    keep = np.linalg.norm(centroids - params.mu_x, axis=1) <= theta * params.rho_x
    w = np.zeros(d)
    total = np.zeros(d)
    step_norms = [] if record_norms else None
    k, mu_x, mu_y = bags.k, params.mu_x, params.mu_y
    for j in range(len(bags)):
        total += w
        if record_norms:
            step_norms.append(float(np.linalg.norm(w)))
        if keep[j]:
            _, grad = linear_loss_and_grad(w, centroids[j], bags.alphas[j], k, mu_x, mu_y)
            w = project_ball(w - eta * grad, params.rho_w)
    return SgdTrace(total / len(bags), int((~keep).sum()), len(bags), theta, eta, step_norms)


def population_linear_loss(dist: RegressionDistribution, w) -> float:
    w = np.asarray(w, dtype=float).reshape(-1)
    pred = dist.features @ w
    return float(dist.masses @ (dist.cond_second_moment - 2.0 * pred * dist.cond_mean + pred * pred))


def optimal_linear_weights(dist: RegressionDistribution, rho_w: float | None = None) -> np.ndarray:
    """Minimiser of the population square loss, over the ``rho_w`` ball if given."""
    A = (dist.features * dist.masses[:, None]).T @ dist.features
    b = dist.features.T @ (dist.masses * dist.cond_mean)
    w = np.linalg.lstsq(A, b, rcond=None)[0]
    if rho_w is None or np.linalg.norm(w) <= rho_w:
        return w
    # constrained: w(lam) = (A + lam I)^-1 b with |w(lam)| = rho_w, found by bisection
    eye = np.eye(A.shape[0])
    lo, hi = 0.0, 1.0
    while np.linalg.norm(np.linalg.solve(A + hi * eye, b)) > rho_w:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if np.linalg.norm(np.linalg.solve(A + mid * eye, b)) > rho_w:
            lo = mid
        else:
            hi = mid
    return np.linalg.solve(A + hi * eye, b)


def estimate_means(unlabeled_features, bags: BaggedSample) -> tuple[np.ndarray, float]:
    """Plug-in ``(mu_x, mu_y)``: feature mean of a held-out unlabeled set and the mean alpha.

    Not part of the analysed algorithm, which assumes exact means.
    """
    X = np.atleast_2d(np.asarray(unlabeled_features, dtype=float))
    return X.mean(axis=0), float(np.mean(bags.alphas))
