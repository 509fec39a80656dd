"""Core domain types: examples, bags, finite distributions, hypotheses, marginals.

Randomness
----------
Every sampling routine takes a ``seed`` that is turned into a
:class:`numpy.random.Generator` (PCG64) by :func:`make_rng`. Sub-streams are
derived with counter offsets, ``make_rng(seed, c1, c2, ...)``, which seeds
PCG64 from ``SeedSequence([seed, c1, c2, ...])``. The same tuple always gives
the same stream, independently of thread scheduling.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Iterator, Mapping, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    EtaOutOfRange,
    HypothesisUndefinedOnSupport,
    MassNotOne,
    MissingMarginal,
    NegativeMass,
)

MASS_RENORMALIZE_TOL = 1e-9
ALPHA_INTEGRALITY_TOL = 1e-9


class Mode(str, enum.Enum):
    CLASSIFICATION = "classification"
    REGRESSION = "regression"


class Provenance(str, enum.Enum):
    EXACT = "exact"
    SPLIT_SAMPLE = "split_sample"
    LEAVE_ONE_BAG_OUT = "leave_one_bag_out"


def make_rng(seed, *counters: int) -> np.random.Generator:
    """Build the package's generator from a seed plus optional counter offsets.

    ``seed`` may already be a Generator, in which case it is returned as is
    (counters are then not allowed).
    """
    if isinstance(seed, (np.random.Generator, np.random.SeedSequence)):
        if counters:
            raise TypeError("counter offsets need an integer seed")
        return seed if isinstance(seed, np.random.Generator) else np.random.Generator(np.random.PCG64(seed))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), *map(int, counters)])))


def _as_matrix(features) -> np.ndarray:
    arr = np.asarray(features, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(-1, 1) if arr.size else arr.reshape(0, 1)
    return arr


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=float, copy=True)
    arr.setflags(write=False)
    return arr


# ---------------------------------------------------------------------------
# examples, datasets, bags
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Example:
    features: tuple
    label: float


class Dataset(Sequence):
    """An immutable array-backed list of :class:`Example`.

    Features are stored as an ``(n, d)`` float matrix and labels as an ``(n,)``
    float vector (classification labels are 0.0/1.0).
    """

    def __init__(self, features, labels, mode: Mode = Mode.CLASSIFICATION, rho_y: float | None = None):
        X = np.asarray(features, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        y = np.asarray(labels, dtype=float).reshape(-1)
        if X.ndim != 2 or X.shape[0] != y.shape[0]:
            raise DimensionMismatch(f"features {X.shape} do not match labels {y.shape}")
        if X.shape[1] < 1:
            raise DimensionMismatch("feature dimension must be at least 1")
        mode = Mode(mode)
        if mode is Mode.CLASSIFICATION and not np.all((y == 0.0) | (y == 1.0)):
            raise ValueError("classification labels must be 0 or 1")
        if mode is Mode.REGRESSION and rho_y is not None and np.any(np.abs(y) > rho_y):
            raise ValueError(f"regression labels exceed rho_y={rho_y}")
        self.X = _freeze(X)
        self.y = _freeze(y)
        self.mode = mode

    @classmethod
    def from_examples(cls, examples: Sequence[Example], mode: Mode = Mode.CLASSIFICATION) -> "Dataset":
        if isinstance(examples, Dataset):
            return examples
        if not examples:
            return cls(np.zeros((0, 1)), np.zeros(0), mode)
        dims = {len(np.atleast_1d(e.features)) for e in examples}
        if len(dims) != 1:
            raise DimensionMismatch(f"inconsistent feature dimensions {sorted(dims)}")
        X = np.array([np.atleast_1d(e.features) for e in examples], dtype=float)
        y = np.array([e.label for e in examples], dtype=float)
        return cls(X, y, mode)

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def __len__(self) -> int:
        return self.X.shape[0]

    def __getitem__(self, i):
        if isinstance(i, slice):
            return Dataset(self.X[i], self.y[i], self.mode)
        return Example(tuple(self.X[i].tolist()), float(self.y[i]))

    def __iter__(self) -> Iterator[Example]:
        for i in range(len(self)):
            yield self[i]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return self.mode == other.mode and np.array_equal(self.X, other.X) and np.array_equal(self.y, other.y)

    def __repr__(self) -> str:
        return f"Dataset(n={len(self)}, d={self.dim}, mode={self.mode.value})"


@dataclass(frozen=True, eq=False)
class Bag:
    """k feature vectors and their label proportion ``alpha``."""

    features: np.ndarray
    alpha: float
    mode: Mode = Mode.CLASSIFICATION

    def __post_init__(self):
        X = _as_matrix(self.features)
        if X.shape[0] < 1:
            raise ValueError("a bag needs at least one example")
        object.__setattr__(self, "features", _freeze(X))
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "mode", Mode(self.mode))
        if self.mode is Mode.CLASSIFICATION:
            if not 0.0 <= self.alpha <= 1.0:
                raise ValueError(f"alpha={self.alpha} outside [0, 1]")
            count = self.alpha * self.k
            if abs(count - round(count)) > ALPHA_INTEGRALITY_TOL:
                raise ValueError(f"alpha*k={count} is not an integer count")

    @property
    def k(self) -> int:
        return self.features.shape[0]

    @property
    def positive_count(self) -> int:
        return int(round(self.alpha * self.k))

    @property
    def centroid(self) -> np.ndarray:
        return self.features.mean(axis=0)


# ---------------------------------------------------------------------------
# finite distributions
# ---------------------------------------------------------------------------


def _check_masses(masses: np.ndarray) -> np.ndarray:
    if np.any(masses < 0):
        raise NegativeMass(f"negative mass in {masses.tolist()}")
    total = float(masses.sum())
    drift = abs(total - 1.0)
    if drift > MASS_RENORMALIZE_TOL:
        raise MassNotOne(f"masses sum to {total!r} (drift {drift:.3g} > {MASS_RENORMALIZE_TOL})")
    return masses / total if drift > 0 else masses


class FiniteDistribution:
    """Exactly enumerable joint law of (x, y) with binary y.

    ``features[i]`` is drawn with probability ``masses[i]`` and then
    ``y ~ Bernoulli(etas[i])``.
    """

    def __init__(self, features, masses, etas):
        X = _as_matrix(features)
        masses = np.asarray(masses, dtype=float).reshape(-1)
        etas = np.asarray(etas, dtype=float).reshape(-1)
        if not (X.shape[0] == masses.shape[0] == etas.shape[0]) or X.shape[0] == 0:
            raise DimensionMismatch("features, masses and etas must be nonempty and aligned")
        masses = _check_masses(masses)
        if np.any((etas < 0) | (etas > 1)) or not np.all(np.isfinite(etas)):
            raise EtaOutOfRange(f"eta values must lie in [0, 1], got {etas.tolist()}")
        self.features = _freeze(X)
        self.masses = _freeze(masses)
        self.etas = _freeze(etas)

    mode = Mode.CLASSIFICATION

    @property
    def size(self) -> int:
        return self.masses.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def triples(self):
        return [(tuple(x), float(m), float(e)) for x, m, e in zip(self.features.tolist(), self.masses, self.etas)]

    def permuted(self, order) -> "FiniteDistribution":
        order = np.asarray(order)
        return FiniteDistribution(self.features[order], self.masses[order], self.etas[order])

    def as_regression(self) -> "RegressionDistribution":
        values = [np.array([0.0, 1.0])] * self.size
        probs = [np.array([1.0 - e, e]) for e in self.etas]
        return RegressionDistribution(self.features, self.masses, values, probs)

    def __repr__(self) -> str:
        return f"FiniteDistribution(size={self.size}, d={self.dim})"


def make_finite_distribution(triples) -> FiniteDistribution:
    """Validate ``(feature, mass, eta)`` triples into a :class:`FiniteDistribution`.

    Masses are renormalized only when they miss 1 by at most 1e-9; larger
    drift raises :class:`MassNotOne`.
    """
    triples = list(triples)
    if not triples:
        raise ValueError("a distribution needs at least one support point")
    feats = [np.atleast_1d(np.asarray(f, dtype=float)) for f, _, _ in triples]
    if len({f.shape for f in feats}) != 1:
        raise DimensionMismatch("support points have different dimensions")
    return FiniteDistribution(np.stack(feats), [m for _, m, _ in triples], [e for _, _, e in triples])


class RegressionDistribution:
    """Finite support with a finite conditional label law at every atom."""

    mode = Mode.REGRESSION

    def __init__(self, features, masses, label_values, label_probs):
        X = _as_matrix(features)
        masses = np.asarray(masses, dtype=float).reshape(-1)
        if X.shape[0] != masses.shape[0] or X.shape[0] == 0:
            raise DimensionMismatch("features and masses must be nonempty and aligned")
        if len(label_values) != X.shape[0] or len(label_probs) != X.shape[0]:
            raise DimensionMismatch("one label law per support point")
        self.features = _freeze(X)
        self.masses = _freeze(_check_masses(masses))
        vals, probs = [], []
        for v, p in zip(label_values, label_probs):
            v = np.atleast_1d(np.asarray(v, dtype=float))
            p = np.atleast_1d(np.asarray(p, dtype=float))
            if v.shape != p.shape:
                raise DimensionMismatch("label values and probabilities must align")
            vals.append(_freeze(v))
            probs.append(_freeze(_check_masses(p)))
        self.label_values = tuple(vals)
        self.label_probs = tuple(probs)
        self.cond_mean = _freeze([float(v @ p) for v, p in zip(vals, probs)])
        self.cond_second_moment = _freeze([float((v * v) @ p) for v, p in zip(vals, probs)])

    @property
    def size(self) -> int:
        return self.masses.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @property
    def rho_y(self) -> float:
        return max(float(np.abs(v).max()) for v in self.label_values)

    @property
    def mean_features(self) -> np.ndarray:
        return self.masses @ self.features

    @property
    def mean_label(self) -> float:
        return float(self.masses @ self.cond_mean)

    @classmethod
    def noiseless(cls, features, masses, target: Callable[[np.ndarray], float]) -> "RegressionDistribution":
        X = _as_matrix(features)
        return cls(X, masses, [[float(target(x))] for x in X], [[1.0]] * X.shape[0])


def sample_dataset(dist, n: int, seed) -> Dataset:
    """Draw ``n`` i.i.d. examples; features by mass, labels from the atom's law."""
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = make_rng(seed)
    idx = rng.choice(dist.size, size=n, p=dist.masses)
    X = dist.features[idx]
    if isinstance(dist, FiniteDistribution):
        y = (rng.random(n) < dist.etas[idx]).astype(float)
        return Dataset(X, y, Mode.CLASSIFICATION)
    u = rng.random(n)
    y = np.empty(n)
    for atom in range(dist.size):
        sel = idx == atom
        if not sel.any():
            continue
        cum = np.cumsum(dist.label_probs[atom])
        pos = np.minimum(np.searchsorted(cum, u[sel], side="right"), cum.size - 1)
        y[sel] = dist.label_values[atom][pos]
    return Dataset(X, y, Mode.REGRESSION)


# ---------------------------------------------------------------------------
# hypotheses
# ---------------------------------------------------------------------------


class Hypothesis:
    """A map from feature vectors to predictions, with a stable integer id.

    Calling a hypothesis on an ``(n, d)`` matrix returns an ``(n,)`` vector;
    calling it on a single ``(d,)`` vector returns a float.
    """

    def __init__(self, id: int = 0):
        self.id = int(id)

    def evaluate(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, x):
        arr = np.asarray(x, dtype=float)
        if arr.ndim <= 1:
            return float(self.evaluate(arr.reshape(1, -1))[0])
        flat = arr.reshape(-1, arr.shape[-1])
        return self.evaluate(flat).reshape(arr.shape[:-1])


class FunctionHypothesis(Hypothesis):
    """Wraps a vectorised callable ``fn(X: (n, d)) -> (n,)``."""

    def __init__(self, fn: Callable[[np.ndarray], np.ndarray], id: int = 0, name: str | None = None):
        super().__init__(id)
        self.fn = fn
        self.name = name or getattr(fn, "__name__", "h")

    def evaluate(self, X):
        X = _as_matrix(X)
        return np.asarray(self.fn(X), dtype=float).reshape(X.shape[0])

    def __repr__(self) -> str:
        return f"FunctionHypothesis(id={self.id}, name={self.name!r})"


class ConstantHypothesis(Hypothesis):
    def __init__(self, value: float, id: int = 0):
        super().__init__(id)
        self.value = float(value)

    def evaluate(self, X):
        return np.full(_as_matrix(X).shape[0], self.value)

    def __repr__(self) -> str:
        return f"ConstantHypothesis(id={self.id}, value={self.value})"


class TabularHypothesis(Hypothesis):
    """Lookup table over a finite set of feature vectors."""

    def __init__(self, support, values, id: int = 0):
        super().__init__(id)
        self.support = _freeze(_as_matrix(support))
        self.values = _freeze(np.asarray(values, dtype=float).reshape(-1))
        if self.values.shape[0] != self.support.shape[0]:
            raise DimensionMismatch("one value per support point")

    def evaluate(self, X):
        X = _as_matrix(X)
        if X.shape[1] != self.support.shape[1]:
            raise DimensionMismatch(f"expected dimension {self.support.shape[1]}, got {X.shape[1]}")
        match = np.all(X[:, None, :] == self.support[None, :, :], axis=2)
        found = match.any(axis=1)
        if not found.all():
            bad = X[~found][0].tolist()
            raise HypothesisUndefinedOnSupport(f"hypothesis {self.id} undefined at {bad}")
        return self.values[match.argmax(axis=1)]

    @classmethod
    def from_function(cls, dist, fn: Callable[[np.ndarray], float], id: int = 0) -> "TabularHypothesis":
        return cls(dist.features, [fn(x) for x in dist.features], id)

    def __repr__(self) -> str:
        return f"TabularHypothesis(id={self.id}, values={self.values.tolist()})"


class LinearHypothesis(Hypothesis):
    """``x -> w.x``, optionally clamped to [0, 1] for use as a classifier."""

    def __init__(self, w, clamp: bool = True, id: int = 0):
        super().__init__(id)
        self.w = _freeze(np.asarray(w, dtype=float).reshape(-1))
        self.clamp = clamp

    def evaluate(self, X):
        X = _as_matrix(X)
        if X.shape[1] != self.w.shape[0]:
            raise DimensionMismatch(f"weights have dimension {self.w.shape[0]}, features {X.shape[1]}")
        out = X @ self.w
        return np.clip(out, 0.0, 1.0) if self.clamp else out


# ---------------------------------------------------------------------------
# marginals
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MarginalInfo:
    """Label marginal ``p`` and per-hypothesis prediction means ``E[h(x)]``."""

    p: float
    mean_prediction: Mapping[int, float] = field(default_factory=dict)
    provenance: Provenance = Provenance.EXACT
    mode: Mode = Mode.CLASSIFICATION

    def __post_init__(self):
        object.__setattr__(self, "p", float(self.p))
        object.__setattr__(self, "mean_prediction", {int(k): float(v) for k, v in dict(self.mean_prediction).items()})
        object.__setattr__(self, "provenance", Provenance(self.provenance))
        if Mode(self.mode) is Mode.CLASSIFICATION:
            vals = [self.p, *self.mean_prediction.values()]
            if any(not (0.0 <= v <= 1.0) for v in vals):
                raise ValueError(f"marginals must lie in [0, 1], got {vals}")

    def mean_for(self, h) -> float:
        key = h if isinstance(h, int) else h.id
        try:
            return self.mean_prediction[key]
        except KeyError:
            raise MissingMarginal(f"no E[h(x)] recorded for hypothesis {key}") from None

    def with_mean(self, h, value: float) -> "MarginalInfo":
        key = h if isinstance(h, int) else h.id
        return MarginalInfo(self.p, {**self.mean_prediction, key: value}, self.provenance, self.mode)
