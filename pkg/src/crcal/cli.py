"""Command-line front end.

Subcommands: run (experiment config), report (records directory),
boundary (checkpoint to grid CSV), verify (property suite), gen-data
(dataset CSV). Errors print one line to stderr as
"error: <category>: <message>"; exit codes: 2 config, 3 data, 4 run,
1 failed verification.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .data import generate_blobs, generate_moons, save_csv_dataset
from .diagnostics import verify_suite
from .errors import ConfigError, CrcalError
from .harness import (
    _parse_centers,
    boundary_to_csv,
    decision_boundary_grid,
    emit_report,
    load_checkpoint,
    load_config,
    load_records,
    report_to_csv,
    run_assl,
)

_EXIT_CODES = {"config-error": 2, "data-error": 3, "run-error": 4, "error": 4}


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="crcal",
        description="Kernel-spectrum batch active learning at desk scale",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run the experiment described by a config file")
    p_run.add_argument("config", help="flat key=value config file")

    p_report = sub.add_parser("report", help="summarize a directory of run records")
    p_report.add_argument("records_dir")
    p_report.add_argument("--output", "-o", help="write CSV here instead of stdout")

    p_boundary = sub.add_parser(
        "boundary", help="decision-boundary grid from a model checkpoint"
    )
    p_boundary.add_argument("checkpoint", help="NPZ checkpoint path")
    p_boundary.add_argument(
        "--bounds", nargs=4, type=float, required=True,
        metavar=("XMIN", "XMAX", "YMIN", "YMAX"),
    )
    p_boundary.add_argument("--resolution", type=int, default=200)
    p_boundary.add_argument("--output", "-o", required=True)

    p_verify = sub.add_parser("verify", help="run the numerical property suite")
    p_verify.add_argument(
        "--full", action="store_true", help="include the slow checks"
    )
    p_verify.add_argument("--seed", type=int, default=0)

    p_gen = sub.add_parser("gen-data", help="write a generated dataset as CSV")
    p_gen.add_argument("output")
    p_gen.add_argument("--dataset", choices=("moons", "blobs"), default="moons")
    p_gen.add_argument("--n", type=int, default=1000)
    p_gen.add_argument("--noise", type=float, default=0.1)
    p_gen.add_argument("--arms", type=int, choices=(2, 4), default=4)
    p_gen.add_argument("--binarize", action="store_true")
    p_gen.add_argument("--centers", help="blobs centers, e.g. '0,0;4,0;0,4'")
    p_gen.add_argument("--sigma", type=float, default=0.5)
    p_gen.add_argument("--seed", type=int, default=0)
    return parser


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    for seed in cfg.seeds:
        record = run_assl(cfg, seed)
        final = record.rounds[-1]
        acc = final["test_accuracy"]
        acc_text = "n/a" if acc is None else f"{acc:.4f}"
        print(
            f"seed {seed}: {len(record.rounds)} rounds, "
            f"final labeled {final['labeled_size']}, test accuracy {acc_text}"
        )
    if cfg.output_dir:
        print(f"records written to {cfg.output_dir}")
    return 0


def _cmd_report(args) -> int:
    rows = emit_report(load_records(args.records_dir))
    if args.output:
        report_to_csv(rows, args.output)
        print(f"report written to {args.output}")
    else:
        print("strategy,labeled_size,mean_accuracy,std_accuracy,min_accuracy,max_accuracy,num_runs")
        for r in rows:
            print(
                f"{r['strategy']},{r['labeled_size']},{r['mean_accuracy']!r},"
                f"{r['std_accuracy']!r},{r['min_accuracy']!r},"
                f"{r['max_accuracy']!r},{r['num_runs']}"
            )
    return 0


def _cmd_boundary(args) -> int:
    params, spec = load_checkpoint(args.checkpoint)
    grid = decision_boundary_grid(params, spec, args.bounds, args.resolution)
    boundary_to_csv(grid, args.output)
    print(f"{grid.shape[0]} grid rows written to {args.output}")
    return 0


def _cmd_verify(args) -> int:
    results = verify_suite(fast=not args.full, seed=args.seed)
    failures = 0
    for name, passed, detail in results:
        tag = "PASS" if passed else "FAIL"
        print(f"{tag} {name}: {detail}")
        failures += 0 if passed else 1
    print(f"{len(results) - failures}/{len(results)} checks passed")
    return 1 if failures else 0


def _cmd_gen_data(args) -> int:
    if args.dataset == "moons":
        pool = generate_moons(
            args.n, args.noise, args.arms, args.seed, binarize=args.binarize
        )
    else:
        if not args.centers:
            raise ConfigError("blobs need --centers")
        centers = np.asarray(_parse_centers("--centers", args.centers))
        pool = generate_blobs(args.n, centers.shape[0], centers, args.sigma, args.seed)
    save_csv_dataset(pool, args.output)
    print(f"{pool.size} samples written to {args.output}")
    return 0


_COMMANDS = {
    "run": _cmd_run,
    "report": _cmd_report,
    "boundary": _cmd_boundary,
    "verify": _cmd_verify,
    "gen-data": _cmd_gen_data,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except CrcalError as exc:
        print(f"error: {exc.category}: {exc}", file=sys.stderr)
        return _EXIT_CODES.get(exc.category, 4)
    except ValueError as exc:
        print(f"error: run-error: {exc}", file=sys.stderr)
        return 4
    except OSError as exc:
        print(f"error: data-error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
