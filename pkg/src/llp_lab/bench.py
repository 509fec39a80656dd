"""Experiment harness: the bag-size variance study and the warmup / ERM / SGD sweeps.

Every sweep is split into independent cells, each seeded from
``make_rng(seed, <experiment counter>, <cell coordinates>...)``, so results
do not depend on the number of worker threads. Rows are sorted before they
are returned.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from . import __version__
from .bagging import batch_bags, partition_into_bags
from .data import make_rng, sample_dataset
from .erm import ErmConfig, ExactMarginals, SplitSample, erm_fit, population_regret
from .losses import EASYLLP_SQ, LI_ET_AL, OURS_UNCLIPPED, LossKind, LossName, bag_losses, easyllp_example_terms
from .marginals import exact_label_marginal, exact_marginals, exact_prediction_mean, loo_prediction_means
from .sgd import SgdParams, optimal_linear_weights, population_linear_loss, sgd_train
from .synthetic import cube_class, grid_distribution, identity_and_square, linear_regression_fixture, two_atom_construction
from .warmup import WarmupInput, check_bag_size, select_two

CSV_HEADER = ("experiment", "loss", "k", "statistic", "value", "stderr", "seed", "repetitions")

# first counter of every cell seed, one per experiment
_VARIANCE, _WARMUP, _ERM, _SGD = 1, 2, 3, 4

MEDIAN_SE_FACTOR = math.sqrt(math.pi / 2)  # asymptotic se(median) / se(mean) for normal data


@dataclass(frozen=True)
class ResultRow:
    experiment: str
    loss: str
    k: int
    statistic: str
    value: float
    stderr: float
    seed: int
    repetitions: int

    def __post_init__(self):
        if not self.stderr >= 0:
            raise ValueError(f"stderr must be nonnegative, got {self.stderr}")

    def sort_key(self):
        return (self.experiment, self.loss, self.k, self.statistic)


def _run_cells(fn: Callable, cells: Sequence, threads: int) -> list[ResultRow]:
    if threads < 1:
        raise ValueError("threads must be at least 1")
    if threads == 1:
        chunks = [fn(c) for c in cells]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(fn, cells))
    return sorted((row for chunk in chunks for row in chunk), key=ResultRow.sort_key)


def _cell_label(**params) -> str:
    return ";".join(f"{key}={value:g}" if isinstance(value, float) else f"{key}={value}"
                    for key, value in params.items())


def _variance_stderr(values: np.ndarray) -> float:
    """Large-sample standard error of the sample variance, ``sqrt((mu4 - s^4) / n)``."""
    centred = values - values.mean()
    s2 = float(np.mean(centred**2))
    mu4 = float(np.mean(centred**4))
    return math.sqrt(max(mu4 - s2 * s2, 0.0) / values.size)


def _rate_stderr(rate: float, reps: int) -> float:
    return math.sqrt(rate * (1.0 - rate) / reps)


def _median_stderr(values: np.ndarray) -> float:
    if values.size < 2:
        return 0.0
    return MEDIAN_SE_FACTOR * float(np.std(values, ddof=1)) / math.sqrt(values.size)


# ---------------------------------------------------------------------------
# variance of bag-level loss estimates as a function of bag size
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class VarianceExperimentConfig:
    n_examples: int = 2**20
    bag_sizes: tuple = (2, 4, 8, 16, 32, 64, 128, 256)
    batch_examples: int = 1024
    grid_points: int = 1024
    seed: int = 0
    losses: tuple = (OURS_UNCLIPPED.label, LI_ET_AL.label, EASYLLP_SQ.label)
    repetitions: int = 1
    per_example: bool = False  # also report the variance of single EasyLLP terms

    def __post_init__(self):
        object.__setattr__(self, "bag_sizes", tuple(int(k) for k in self.bag_sizes))
        object.__setattr__(self, "losses", tuple(self.losses))
        if self.n_examples < 1 or self.grid_points < 1 or self.repetitions < 1:
            raise ValueError("n_examples, grid_points and repetitions must be positive")
        for k in self.bag_sizes:
            if k < 1 or k > self.batch_examples:
                raise ValueError(f"bag size {k} must lie in [1, batch_examples={self.batch_examples}]")
            if 2 * k > self.n_examples:
                raise ValueError(f"bag size {k} leaves fewer than two bags out of {self.n_examples} examples")
        for label in self.losses:
            LossKind.parse(label)

    @property
    def loss_kinds(self) -> list[LossKind]:
        return [LossKind.parse(label) for label in self.losses]


def _variance_cell(config: VarianceExperimentConfig, k: int) -> list[ResultRow]:
    dist = grid_distribution(config.grid_points)
    _, h_hat = identity_and_square()
    p = exact_label_marginal(dist)
    exact_mean = exact_prediction_mean(dist, h_hat)
    per_rep: dict[tuple[str, str], list[tuple[float, float]]] = {}

    def record(label, stat, values):
        per_rep.setdefault((label, stat), []).append((float(np.var(values, ddof=1)), _variance_stderr(values)))

    for rep in range(config.repetitions):
        data = sample_dataset(dist, config.n_examples, make_rng(config.seed, _VARIANCE, k, rep, 0))
        bags = partition_into_bags(data, k, make_rng(config.seed, _VARIANCE, k, rep, 1))
        hvals = bags.hypothesis_values(h_hat)
        loo = loo_prediction_means(hvals, batch_bags(bags, config.batch_examples))
        # a bag alone in its batch has no other bags to average over
        loo = np.where(np.isnan(loo), exact_mean, loo)
        for kind in config.loss_kinds:
            values, _ = bag_losses(kind, hvals, bags.alphas, p, loo)
            record(kind.label, "variance", values)
            if config.per_example and kind.name in (LossName.EASYLLP, LossName.EASYLLP_SQ):
                terms = easyllp_example_terms(hvals, bags.alphas, p, squared=kind.name is LossName.EASYLLP_SQ)
                record(kind.label, "per_example_variance", terms.reshape(-1))

    rows = []
    for (label, stat), results in per_rep.items():
        variances = np.array([v for v, _ in results])
        if variances.size == 1:
            value, stderr = float(variances[0]), results[0][1]
        else:
            value, stderr = float(variances.mean()), float(np.std(variances, ddof=1) / math.sqrt(variances.size))
        rows.append(ResultRow("variance", label, k, stat, value, stderr, config.seed, config.repetitions))
    return rows


def run_variance_experiment(config: VarianceExperimentConfig, threads: int = 1) -> list[ResultRow]:
    """Variance of per-bag estimates of ``E[(y - x)^2]`` with ``x`` on a grid and ``P(y=1|x) = x^2``.

    ``p`` is exact; ``E[h(x)]`` for each bag is the leave-one-bag-out mean of
    the other bags in its batch of ``batch_examples`` examples.
    """
    return _run_cells(lambda k: _variance_cell(config, k), config.bag_sizes, threads)


# ---------------------------------------------------------------------------
# warmup discriminator
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WarmupSweepConfig:
    beta: float = 0.25
    delta: float = 0.0
    ks: tuple = (128,)
    n_grid: tuple | None = None  # None -> n0 * (1, 2, 4) with n0 = n0_factor * k / beta
    n0_factor: float = 4.0  # pilot-calibrated (seed 99): success 0.945, 0.99, 1.0 at k=128, beta=0.25
    repetitions: int = 200
    seed: int = 0
    check_guard: bool = True

    def __post_init__(self):
        object.__setattr__(self, "ks", tuple(int(k) for k in self.ks))
        if self.n_grid is not None:
            object.__setattr__(self, "n_grid", tuple(int(n) for n in self.n_grid))
        if self.repetitions < 1:
            raise ValueError("repetitions must be positive")
        if not 0.0 < self.beta <= 1.0:
            raise ValueError(f"beta must lie in (0, 1], got {self.beta}")

    def grid_for(self, k: int) -> tuple:
        if self.n_grid is not None:
            return self.n_grid
        n0 = math.ceil(self.n0_factor * k / self.beta)
        return (n0, 2 * n0, 4 * n0)


def _warmup_cell(config: WarmupSweepConfig, cell) -> list[ResultRow]:
    k, n = cell
    wins = 0
    for rep in range(config.repetitions):
        # alternate which hypothesis is the truth so tie rules cannot score
        truth = 1 + rep % 2
        dist, h1, h2 = two_atom_construction(config.beta, config.delta, truth)
        data = sample_dataset(dist, n, make_rng(config.seed, _WARMUP, k, n, rep, 0))
        bags = partition_into_bags(data, k, make_rng(config.seed, _WARMUP, k, n, rep, 1))
        chosen = select_two(WarmupInput(bags, h1, h2, config.delta, config.beta))
        wins += chosen == (h1.id if truth == 1 else h2.id)
    rate = wins / config.repetitions
    stat = f"success_rate[{_cell_label(n=n, beta=config.beta, delta=config.delta)}]"
    return [ResultRow("warmup", "select_two", k, stat, rate, _rate_stderr(rate, config.repetitions),
                      config.seed, config.repetitions)]


def run_warmup_sweep(config: WarmupSweepConfig, threads: int = 1) -> list[ResultRow]:
    """Success frequency of the two-hypothesis discriminator per ``(k, n)`` cell.

    Raises :class:`PreconditionViolated` for a bag size below the guarantee's
    minimum unless ``check_guard`` is off.
    """
    if config.check_guard:
        for k in config.ks:
            check_bag_size(k, config.beta)
    cells = [(k, n) for k in config.ks for n in config.grid_for(k)]
    for k, n in cells:
        if n < k:
            raise ValueError(f"n={n} is smaller than the bag size {k}")
    return _run_cells(lambda c: _warmup_cell(config, c), cells, threads)


# ---------------------------------------------------------------------------
# ERM over a finite realizable class
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ErmSweepConfig:
    beta: float = 0.25
    ks: tuple = (4, 16)
    m_grid: tuple = (5, 10, 20)  # pilot-calibrated m0 = 5 (seed 99)
    repetitions: int = 100
    seed: int = 0
    theta: float | None = None  # None -> beta / (16 k^2)
    m2: int | None = None  # split-sample held-out bags, None -> ceil(m/2)

    def __post_init__(self):
        object.__setattr__(self, "ks", tuple(int(k) for k in self.ks))
        object.__setattr__(self, "m_grid", tuple(int(m) for m in self.m_grid))
        if any(m < 1 for m in self.m_grid):
            raise ValueError("every m must be at least 1")
        if self.repetitions < 1:
            raise ValueError("repetitions must be positive")


def _erm_cell(config: ErmSweepConfig, cell) -> list[ResultRow]:
    k, m = cell
    dist, hyps = cube_class()
    exact = exact_marginals(dist, hyps)
    failures = {"exact": 0, "split": 0}
    agree = 0
    theta = None
    for rep in range(config.repetitions):
        data = sample_dataset(dist, m * k, make_rng(config.seed, _ERM, k, m, rep, 0))
        bags = partition_into_bags(data, k, make_rng(config.seed, _ERM, k, m, rep, 1))
        chosen = {}
        for mode, marginal_mode in (("exact", ExactMarginals(exact)), ("split", SplitSample(config.m2))):
            result = erm_fit(bags, hyps, ErmConfig(marginal_mode, theta=config.theta, beta=config.beta))
            theta = result.theta
            chosen[mode] = result.chosen
            failures[mode] += population_regret(dist, hyps, result.chosen) >= config.beta
        agree += chosen["exact"] == chosen["split"]
    reps = config.repetitions
    loss = f"ours_clipped(theta={theta!r})"
    rows = []
    for mode, count in failures.items():
        rate = count / reps
        stat = f"failure_rate[{_cell_label(m=m, mode=mode, beta=config.beta)}]"
        rows.append(ResultRow("erm", loss, k, stat, rate, _rate_stderr(rate, reps), config.seed, reps))
    rate = agree / reps
    rows.append(ResultRow("erm", loss, k, f"agreement_rate[{_cell_label(m=m)}]", rate,
                          _rate_stderr(rate, reps), config.seed, reps))
    return rows


def run_erm_sweep(config: ErmSweepConfig, threads: int = 1) -> list[ResultRow]:
    """Failure rate (regret >= beta) of clipped-loss ERM per ``(k, m, marginal mode)``."""
    cells = [(k, m) for k in config.ks for m in config.m_grid]
    return _run_cells(lambda c: _erm_cell(config, c), cells, threads)


# ---------------------------------------------------------------------------
# SGD on a linear regression fixture
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SgdSweepConfig:
    slope: float = 0.5
    grid_points: int = 64
    ks: tuple = (2,)
    m_grid: tuple = (500, 2000)
    repetitions: int = 20
    seed: int = 0
    rho_w: float = 1.0
    rho_x: float = 1.0
    rho_y: float = 1.0
    L_star: float = 0.0
    eta: float | None = None
    theta: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "ks", tuple(int(k) for k in self.ks))
        object.__setattr__(self, "m_grid", tuple(int(m) for m in self.m_grid))
        if any(m < 1 for m in self.m_grid):
            raise ValueError("every m must be at least 1")
        if self.repetitions < 1:
            raise ValueError("repetitions must be positive")


def _sgd_cell(config: SgdSweepConfig, cell) -> list[ResultRow]:
    k, m = cell
    dist = linear_regression_fixture(config.slope, config.grid_points)
    best = population_linear_loss(dist, optimal_linear_weights(dist, config.rho_w))
    params = SgdParams(config.rho_w, config.rho_x, config.rho_y, dist.mean_features, dist.mean_label,
                       m=m, k=k, L_star=config.L_star, eta=config.eta, theta=config.theta)
    excess, skip = [], []
    for rep in range(config.repetitions):
        data = sample_dataset(dist, m * k, make_rng(config.seed, _SGD, k, m, rep, 0))
        bags = partition_into_bags(data, k, make_rng(config.seed, _SGD, k, m, rep, 1))
        trace = sgd_train(bags, params)
        excess.append(population_linear_loss(dist, trace.final_average) - best)
        skip.append(trace.skip_rate)
    excess, skip = np.array(excess), np.array(skip)
    reps = config.repetitions
    label = _cell_label(m=m, lstar=config.L_star)
    return [
        ResultRow("sgd", "linear_square", k, f"median_excess[{label}]", float(np.median(excess)),
                  _median_stderr(excess), config.seed, reps),
        ResultRow("sgd", "linear_square", k, f"skip_rate[{label}]", float(skip.mean()),
                  float(np.std(skip, ddof=1) / math.sqrt(reps)) if reps > 1 else 0.0, config.seed, reps),
    ]


def run_sgd_sweep(config: SgdSweepConfig, threads: int = 1) -> list[ResultRow]:
    """Median excess risk and skip rate of truncated SGD per ``(k, m)``."""
    cells = [(k, m) for k in config.ks for m in config.m_grid]
    return _run_cells(lambda c: _sgd_cell(config, c), cells, threads)


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def format_csv(rows: Iterable[ResultRow]) -> str:
    lines = [",".join(CSV_HEADER)]
    for row in rows:
        fields_ = [row.experiment, row.loss, row.k, row.statistic, float(row.value), float(row.stderr),
                   row.seed, row.repetitions]
        lines.append(",".join(_csv_field(_fmt(v)) for v in fields_))
    return "\n".join(lines) + "\n"


def _csv_field(text: str) -> str:
    if any(ch in text for ch in ',"\n'):
        return '"' + text.replace('"', '""') + '"'
    return text


def write_csv(rows: Iterable[ResultRow], path) -> None:
    Path(path).write_text(format_csv(rows), encoding="utf-8")


def parse_csv(text: str) -> list[ResultRow]:
    reader = csv.reader(text.splitlines())
    header = next(reader)
    if tuple(header) != CSV_HEADER:
        raise ValueError(f"unexpected header {header}")
    return [ResultRow(e, loss, int(k), stat, float(v), float(se), int(seed), int(reps))
            for e, loss, k, stat, v, se, seed, reps in reader]


def read_csv(path) -> list[ResultRow]:
    return parse_csv(Path(path).read_text(encoding="utf-8"))


def snapshot_path(csv_path) -> Path:
    return Path(csv_path).with_suffix(".json")


def config_snapshot(experiment: str, config) -> dict:
    return {"experiment": experiment, "version": __version__, "config": asdict(config)}


def write_snapshot(experiment: str, config, csv_path) -> Path:
    path = snapshot_path(csv_path)
    path.write_text(json.dumps(config_snapshot(experiment, config), indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")
    return path


def config_fields(config_cls) -> set[str]:
    return {f.name for f in fields(config_cls)}
