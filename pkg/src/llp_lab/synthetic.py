"""Synthetic distributions and hypothesis classes used by tests and sweeps."""

from __future__ import annotations

import itertools
import math

import numpy as np

from .data import FiniteDistribution, FunctionHypothesis, RegressionDistribution, TabularHypothesis


def two_atom_construction(beta: float, delta: float = 0.0, truth: int = 1):
    """Two-function realizable instance on X = {0, 1} with x ~ Bernoulli(1/2).

    Returns ``(dist, h1, h2)`` with ``E[(h1-h2)^2] = beta`` and
    ``E[h1-h2] = delta``; ``eta`` equals ``h1`` when ``truth == 1`` and ``h2``
    otherwise. With ``delta == 0`` this is the classic lower-bound pair
    ``1/2 +- sqrt(beta)/2``.
    """
    if not 0 < beta <= 1:
        raise ValueError("beta must lie in (0, 1]")
    if delta * delta > beta + 1e-15:
        raise ValueError("need delta^2 <= beta")
    if truth not in (1, 2):
        raise ValueError("truth must be 1 or 2")
    spread = math.sqrt(max(beta - delta * delta, 0.0))
    # per-atom differences h1(x) - h2(x), x = 0 then x = 1
    diffs = np.array([delta - spread, delta + spread])
    if np.any(np.abs(diffs) > 1):
        raise ValueError("construction needs |h1 - h2| <= 1 on both atoms")
    support = np.array([[0.0], [1.0]])
    h1 = TabularHypothesis(support, 0.5 + diffs / 2, id=1)
    h2 = TabularHypothesis(support, 0.5 - diffs / 2, id=2)
    eta = (h1 if truth == 1 else h2).values
    return FiniteDistribution(support, [0.5, 0.5], eta), h1, h2


def grid_distribution(points: int, eta=lambda x: x * x, closed: bool = False) -> FiniteDistribution:
    """x uniform on a grid of [0, 1] and ``P(y=1|x) = eta(x)``.

    ``closed=True`` uses ``i/(points-1)`` (endpoints included); the default
    uses cell midpoints ``(i + 1/2)/points``.
    """
    if points < 2 and closed:
        raise ValueError("a closed grid needs at least two points")
    i = np.arange(points)
    x = i / (points - 1) if closed else (i + 0.5) / points
    return FiniteDistribution(x.reshape(-1, 1), np.full(points, 1.0 / points), eta(x))


def cube_class(levels=(0.05, 0.95), atoms: int = 3, truth: int = 5):
    """All ``len(levels)**atoms`` tabular hypotheses over a uniform support.

    With the default levels every pair differs by at least ``0.9**2/3 = 0.27``
    in mean squared difference. The distribution's ``eta`` is hypothesis
    ``truth``, so the class is realizable.
    """
    support = np.arange(atoms, dtype=float).reshape(-1, 1)
    hyps = [TabularHypothesis(support, vals, id=i) for i, vals in enumerate(itertools.product(levels, repeat=atoms))]
    dist = FiniteDistribution(support, np.full(atoms, 1.0 / atoms), hyps[truth].values)
    return dist, hyps


def identity_and_square():
    """The pair used by the variance study: ``h*(x) = x^2`` and ``h(x) = x``."""
    h_star = FunctionHypothesis(lambda X: X[:, 0] ** 2, id=0, name="x^2")
    h_hat = FunctionHypothesis(lambda X: X[:, 0], id=1, name="x")
    return h_star, h_hat


def linear_regression_fixture(slope: float = 0.5, points: int = 64) -> RegressionDistribution:
    """Noiseless ``y = slope * x`` with x uniform on a midpoint grid of [0, 1]."""
    x = ((np.arange(points) + 0.5) / points).reshape(-1, 1)
    return RegressionDistribution.noiseless(x, np.full(points, 1.0 / points), lambda v: slope * float(v[0]))
