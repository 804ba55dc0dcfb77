"""Command-line front end.

Subcommands::

    elmerge train                  direct training, report + optional weight dump
    elmerge compare-hierarchical   direct vs. divide-and-merge training
    elmerge compare-incremental    direct vs. grow-by-blocks training
    elmerge selftest               randomized invariant suite

Exit codes: 0 success, 1 usage error, 2 I/O or file-format error,
3 numeric (factorization) failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import data as data_mod
from . import solvers
from .data import DataFormatError, Dataset
from .evaluation import BenchReport, CompareConfig, run_comparison
from .model import Activation, compute_hidden_matrix, generate_feature_map, save_weights
from .selftest import run_selftest

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_NUMERIC = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems with exit code 1."""

    def error(self, message):
        raise _UsageError(message)


def parse_partition(spec: str):
    """Partition grammar: ``2000,2000`` for one level, ``[[1000,1000],[1000,1000]]``
    (JSON-style nesting) for trees."""
    spec = spec.strip()
    if spec.startswith("["):
        try:
            tree = json.loads(spec)
        except json.JSONDecodeError as exc:
            raise _UsageError(f"bad partition {spec!r}: {exc}") from None
    else:
        try:
            tree = [int(tok) for tok in spec.split(",") if tok.strip()]
        except ValueError:
            raise _UsageError(f"bad partition {spec!r}: expected comma-separated counts") from None
    try:
        sizes = solvers.flatten_partition(tree)
    except ValueError as exc:
        raise _UsageError(f"bad partition {spec!r}: {exc}") from None
    if not sizes:
        raise _UsageError(f"bad partition {spec!r}: no leaves")
    return tree


def parse_increments(spec: str) -> list[int]:
    """Growth schedule: plus-separated block sizes, e.g. ``2000+2000``."""
    try:
        blocks = [int(tok) for tok in spec.split("+") if tok.strip()]
    except ValueError:
        raise _UsageError(f"bad increments {spec!r}: expected counts joined by '+'") from None
    if not blocks or any(b < 1 for b in blocks):
        raise _UsageError(f"bad increments {spec!r}: counts must be positive")
    return blocks


def _add_data_args(p: argparse.ArgumentParser):
    g = p.add_argument_group("data")
    g.add_argument("--format", choices=["csv", "idx", "synthetic"], default="csv")
    g.add_argument("--train", help="training CSV path (csv format)")
    g.add_argument("--test", help="test CSV path (csv format)")
    g.add_argument("--label-column", type=int, default=-1,
                   help="label column index in CSV files (default: last)")
    g.add_argument("--header", action="store_true", help="CSV files start with a header row")
    g.add_argument("--train-images", help="training images IDX path (idx format)")
    g.add_argument("--train-labels", help="training labels IDX path (idx format)")
    g.add_argument("--test-images", help="test images IDX path (idx format)")
    g.add_argument("--test-labels", help="test labels IDX path (idx format)")
    g.add_argument("--samples", type=int, default=2000, help="synthetic: training samples")
    g.add_argument("--test-samples", type=int, default=500, help="synthetic: test samples")
    g.add_argument("--dim", type=int, default=8, help="synthetic: feature dimension")
    g.add_argument("--classes", type=int, default=10, help="synthetic: class count")
    g.add_argument("--spread", type=float, default=0.15, help="synthetic: cluster noise")
    g.add_argument("--normalize", action=argparse.BooleanOptionalAction, default=True,
                   help="min-max scale features to [0,1] using training statistics")


def _add_model_args(p: argparse.ArgumentParser):
    g = p.add_argument_group("model")
    g.add_argument("--activation", choices=[a.value for a in Activation], default="sigmoid")
    g.add_argument("--neurons", type=int, required=True, help="hidden-unit count")
    g.add_argument("--alpha", type=float, default=solvers.DEFAULT_ALPHA,
                   help="ridge trade-off (penalty on ||W||^2 is 1/alpha)")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--repeats", type=int, default=5, help="timing repetitions to average")
    g.add_argument("--threads", type=int, default=None,
                   help="concurrent leaf solves (default: machine cores; "
                        "env ELM_THREADS takes precedence)")


def _add_output_args(p: argparse.ArgumentParser):
    g = p.add_argument_group("output")
    g.add_argument("--out", help="report path prefix; writes <out>.json and <out>.csv")
    g.add_argument("--figures", action=argparse.BooleanOptionalAction, default=True,
                   help="render PNG charts next to the report files")


def build_parser() -> _Parser:
    parser = _Parser(prog="elmerge", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a network with the direct solver")
    _add_data_args(p_train)
    _add_model_args(p_train)
    _add_output_args(p_train)
    p_train.add_argument("--dump-weights", help="write the trained weight matrix (binary)")

    p_hier = sub.add_parser("compare-hierarchical", help="direct vs. hierarchical training")
    _add_data_args(p_hier)
    _add_model_args(p_hier)
    _add_output_args(p_hier)
    p_hier.add_argument("--partition", default=None,
                        help="leaf sizes, e.g. '2000,2000' or '[[1000,1000],[1000,1000]]' "
                             "(default: two equal halves)")

    p_incr = sub.add_parser("compare-incremental", help="direct vs. incremental training")
    _add_data_args(p_incr)
    _add_model_args(p_incr)
    _add_output_args(p_incr)
    p_incr.add_argument("--increments", default=None,
                        help="growth schedule, e.g. '2000+2000' (default: --neurons in one block)")

    p_self = sub.add_parser("selftest", help="run the randomized invariant suite")
    p_self.add_argument("--trials", type=int, default=200)
    p_self.add_argument("--seed", type=int, default=0)

    return parser


def _validate_common(args) -> None:
    if args.neurons < 1:
        raise _UsageError(f"--neurons must be >= 1, got {args.neurons}")
    if not (args.alpha > 0 and np.isfinite(args.alpha)):
        raise _UsageError(f"--alpha must be finite and > 0, got {args.alpha}")
    if args.repeats < 1:
        raise _UsageError(f"--repeats must be >= 1, got {args.repeats}")
    if args.format == "csv":
        if not args.train:
            raise _UsageError("--train is required with --format csv")
    elif args.format == "idx":
        if not (args.train_images and args.train_labels):
            raise _UsageError("--train-images and --train-labels are required with --format idx")
    else:
        if args.samples < args.classes:
            raise _UsageError("--samples must be >= --classes")


def _effective_threads(args) -> int | None:
    env = os.environ.get("ELM_THREADS")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise _UsageError(f"ELM_THREADS must be an integer, got {env!r}") from None
    return args.threads


def _load_datasets(args) -> tuple[Dataset, Dataset]:
    if args.format == "csv":
        train = data_mod.load_csv(args.train, args.label_column, args.header, split="train")
        test = (
            data_mod.load_csv(args.test, args.label_column, args.header,
                              name=train.name, split="test")
            if args.test else None
        )
    elif args.format == "idx":
        train = data_mod.load_idx(args.train_images, args.train_labels, split="train")
        test = (
            data_mod.load_idx(args.test_images, args.test_labels, split="test")
            if args.test_images and args.test_labels else None
        )
    else:
        train = data_mod.synthetic_blobs(args.seed, args.samples, args.dim,
                                         args.classes, args.spread, split="train")
        test = data_mod.synthetic_blobs(args.seed + 1, args.test_samples, args.dim,
                                        args.classes, args.spread, split="test")
    if args.normalize:
        normalized_train = data_mod.normalize_minmax(train)
        test = data_mod.normalize_minmax(test, reference=train) if test else None
        train = normalized_train
    if test is None:
        test = train
    return train, test


def _emit_report(report: BenchReport, args) -> None:
    sys.stdout.write(report.to_text_table())
    if args.out:
        prefix = Path(args.out)
        prefix.parent.mkdir(parents=True, exist_ok=True)
        json_path = prefix.with_name(prefix.name + ".json")
        json_path.write_text(report.to_json())
        prefix.with_name(prefix.name + ".csv").write_text(report.to_csv())
        written = [str(json_path)]
        if args.figures:
            from .figures import render_report_figures

            written += [str(p) for p in render_report_figures(report, prefix)]
        print("wrote " + ", ".join(written))


def _run_comparison_command(args, partition=None, increments=None) -> int:
    train, test = _load_datasets(args)
    config = CompareConfig(
        activation=Activation(args.activation),
        neurons=args.neurons,
        alpha=args.alpha,
        seed=args.seed,
        repeats=args.repeats,
        partition=partition,
        increments=increments,
        threads=_effective_threads(args),
    )
    report = run_comparison(train, test, config)
    _emit_report(report, args)
    return EXIT_OK


def cmd_train(args) -> int:
    train, test = _load_datasets(args)
    config = CompareConfig(
        activation=Activation(args.activation),
        neurons=args.neurons,
        alpha=args.alpha,
        seed=args.seed,
        repeats=args.repeats,
        threads=_effective_threads(args),
    )
    report = run_comparison(train, test, config)
    _emit_report(report, args)
    if args.dump_weights:
        fmap = generate_feature_map(train.input_dim, args.neurons,
                                    Activation(args.activation), args.seed)
        H = compute_hidden_matrix(fmap, train.features)
        W = solvers.solve_auto(H, data_mod.one_hot(train.labels, train.class_count),
                               solvers.RidgeConfig(alpha=args.alpha))
        save_weights(W, args.dump_weights)
        print(f"wrote {args.dump_weights}")
    return EXIT_OK


def cmd_compare_hierarchical(args) -> int:
    if args.partition is not None:
        partition = parse_partition(args.partition)
    else:
        half = args.neurons // 2
        if half < 1:
            raise _UsageError("--neurons must be >= 2 for the default equal split")
        partition = [half, args.neurons - half]
    return _run_comparison_command(args, partition=partition)


def cmd_compare_incremental(args) -> int:
    if args.increments is not None:
        increments = parse_increments(args.increments)
    else:
        increments = [args.neurons]
    return _run_comparison_command(args, increments=increments)


def cmd_selftest(args) -> int:
    result = run_selftest(trials=args.trials, seed=args.seed)
    for line in result.summary_lines():
        print(line)
    for failure in result.failures[:20]:
        print(f"  {failure}")
    return EXIT_OK if result.ok else EXIT_USAGE


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "selftest":
            return cmd_selftest(args)
        _validate_common(args)
        if args.command == "train":
            return cmd_train(args)
        if args.command == "compare-hierarchical":
            return cmd_compare_hierarchical(args)
        return cmd_compare_incremental(args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        name = getattr(exc, "filename", None)
        print(f"error: {name or ''} {exc.strerror or exc}".strip(), file=sys.stderr)
        return EXIT_IO
    except solvers.FactorizationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
