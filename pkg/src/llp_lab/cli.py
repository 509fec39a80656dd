"""Command-line entry point: ``llp-lab variance`` and ``llp-lab sweep {warmup,erm,sgd}``.

Settings resolve as flag > ``--config`` JSON file > built-in default. Exit
codes: 0 success, 1 runtime error, 2 bad flags or config, 3 a precondition
guard of the warmup guarantee failed.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

from . import __version__
from .bench import (
    ErmSweepConfig,
    SgdSweepConfig,
    VarianceExperimentConfig,
    WarmupSweepConfig,
    run_erm_sweep,
    run_sgd_sweep,
    run_variance_experiment,
    run_warmup_sweep,
    write_csv,
    write_snapshot,
)
from .errors import PreconditionViolated

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, EXIT_PRECONDITION = 0, 1, 2, 3
THREADS_ENV = "LLP_LAB_THREADS"


class UsageError(Exception):
    pass


def _int_list(text: str) -> tuple[int, ...]:
    try:
        values = tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of integers, got {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


def _default_threads() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw is None:
        return 1
    try:
        return _positive_int(raw)
    except argparse.ArgumentTypeError as exc:
        raise UsageError(f"{THREADS_ENV}: {exc}")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", required=True, help="CSV output path; a JSON config snapshot is written next to it")
    p.add_argument("--config", help="JSON file with config fields (flags take precedence)")
    p.add_argument("--seed", type=int, help="master RNG seed (default 0)")
    p.add_argument("--threads", type=_positive_int,
                   help=f"worker threads (default ${THREADS_ENV} or 1); 1 runs sequentially")
    p.add_argument("--reps", type=_positive_int, help="repetitions per cell")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="llp-lab", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    var = sub.add_parser("variance", help="variance of bag-level loss estimates versus bag size")
    _common(var)
    var.add_argument("--n", type=_positive_int, help="number of examples per bag size (default 2^20)")
    var.add_argument("--k", type=_int_list, help="comma-separated bag sizes")
    var.add_argument("--batch", type=_positive_int, help="examples per leave-one-bag-out batch (default 1024)")
    var.add_argument("--grid", type=_positive_int, help="grid points for x on [0, 1] (default 1024)")
    var.add_argument("--losses", help="comma-separated loss labels, e.g. ours_unclipped,li_et_al,easyllp_sq")
    var.add_argument("--per-example", action="store_true", default=None,
                     help="also report the variance of single EasyLLP terms")

    sweep = sub.add_parser("sweep", help="sample-complexity sweeps")
    kinds = sweep.add_subparsers(dest="sweep", required=True)

    warm = kinds.add_parser("warmup", help="two-hypothesis discriminator success rate")
    _common(warm)
    warm.add_argument("--n", type=_int_list, help="comma-separated example counts (default n0, 2n0, 4n0)")
    warm.add_argument("--k", type=_int_list, help="comma-separated bag sizes (default 128)")
    warm.add_argument("--beta", type=float, help="separation E[(h1-h2)^2] (default 0.25)")
    warm.add_argument("--delta", type=float, help="mean gap E[h1-h2] (default 0)")
    warm.add_argument("--no-guard", dest="check_guard", action="store_false", default=None,
                      help="run even when k is below the bag-size guard")

    erm = kinds.add_parser("erm", help="clipped-loss ERM failure rate")
    _common(erm)
    erm.add_argument("--m", type=_int_list, help="comma-separated bag counts")
    erm.add_argument("--k", type=_int_list, help="comma-separated bag sizes (default 4,16)")
    erm.add_argument("--beta", type=float, help="regret target; failure means regret >= beta (default 0.25)")
    erm.add_argument("--theta", type=float, help="clipping parameter (default beta / (16 k^2))")
    erm.add_argument("--m2", type=_positive_int, help="held-out bags for split-sample marginals (default ceil(m/2))")

    sgd = kinds.add_parser("sgd", help="truncated SGD excess risk")
    _common(sgd)
    sgd.add_argument("--m", type=_int_list, help="comma-separated bag counts (default 500,2000)")
    sgd.add_argument("--k", type=_int_list, help="comma-separated bag sizes (default 2)")
    sgd.add_argument("--lstar", type=float, help="optimistic loss bound L* (default 0)")
    sgd.add_argument("--eta", type=float, help="step size override")
    sgd.add_argument("--theta", type=float, help="truncation threshold override")
    return parser


# flag name -> config field, per experiment
_FIELD_MAP = {
    "variance": {"n": "n_examples", "k": "bag_sizes", "batch": "batch_examples", "grid": "grid_points",
                 "seed": "seed", "reps": "repetitions", "losses": "losses", "per_example": "per_example"},
    "warmup": {"n": "n_grid", "k": "ks", "beta": "beta", "delta": "delta", "seed": "seed",
               "reps": "repetitions", "check_guard": "check_guard"},
    "erm": {"m": "m_grid", "k": "ks", "beta": "beta", "theta": "theta", "m2": "m2", "seed": "seed",
            "reps": "repetitions"},
    "sgd": {"m": "m_grid", "k": "ks", "lstar": "L_star", "eta": "eta", "theta": "theta", "seed": "seed",
            "reps": "repetitions"},
}

_EXPERIMENTS = {
    "variance": (VarianceExperimentConfig, run_variance_experiment),
    "warmup": (WarmupSweepConfig, run_warmup_sweep),
    "erm": (ErmSweepConfig, run_erm_sweep),
    "sgd": (SgdSweepConfig, run_sgd_sweep),
}


def _load_config_file(path: str, config_cls) -> dict:
    file = Path(path)
    if not file.is_file():
        raise UsageError(f"config file {path} does not exist")
    try:
        data = json.loads(file.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise UsageError(f"config file {path} is not valid JSON: {exc}")
    if isinstance(data, dict) and isinstance(data.get("config"), dict):
        data = data["config"]  # a snapshot written by a previous run
    if not isinstance(data, dict):
        raise UsageError("config file must hold a JSON object")
    known = {f.name for f in dataclasses.fields(config_cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise UsageError(f"unknown config fields: {', '.join(unknown)}")
    return data


def resolve_config(experiment: str, args: argparse.Namespace):
    config_cls, _ = _EXPERIMENTS[experiment]
    values = _load_config_file(args.config, config_cls) if args.config else {}
    for flag, name in _FIELD_MAP[experiment].items():
        value = getattr(args, flag, None)
        if value is not None:
            values[name] = tuple(value.split(",")) if flag == "losses" else value
    try:
        return config_cls(**values)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc))


def _summary(row) -> str:
    return f"{row.experiment} {row.loss} k={row.k} {row.statistic} = {row.value:.6g} (se {row.stderr:.2g})"


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    experiment = args.command if args.command == "variance" else args.sweep
    try:
        threads = args.threads if args.threads is not None else _default_threads()
        config = resolve_config(experiment, args)
    except UsageError as exc:
        print(f"llp-lab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    _, runner = _EXPERIMENTS[experiment]
    print(f"{experiment}: seed={config.seed} threads={threads}")
    try:
        rows = runner(config, threads=threads)
        write_csv(rows, args.out)
        write_snapshot(experiment, config, args.out)
    except PreconditionViolated as exc:
        print(f"llp-lab: precondition failed: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except (ValueError, OSError, ArithmeticError) as exc:
        print(f"llp-lab: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    for row in rows:
        print(_summary(row))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
