"""Command line entry point: ``okselect run --config file.toml [overrides]``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .errors import OkselectError
from .harness import ALGORITHMS, RunConfig, run_experiment
from .losses import LossKind


def _floats(text):
    return tuple(float(s) for s in text.split(",") if s.strip())


def _param(text):
    return text if text == "auto" else float(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="okselect", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment and write results.json / results.txt")
    run.add_argument("--config", help="flat TOML file with RunConfig keys")
    run.add_argument("--algo", choices=ALGORITHMS)
    run.add_argument("--loss", choices=[k.value for k in LossKind])
    run.add_argument("--widths", type=_floats, help="comma-separated Gaussian widths")
    run.add_argument("--U", dest="radius", type=float)
    run.add_argument("--horizon", type=int)
    run.add_argument("--delta", type=_param)
    run.add_argument("--eta", type=_param)
    run.add_argument("--lambda", dest="lam", type=_param)
    run.add_argument("--lambda-grid", type=_floats)
    run.add_argument("--ell-max", type=float)
    run.add_argument("--features", type=int, help="random features per arm (D)")
    run.add_argument("--ioks-variant", choices=["theory", "experiment"])
    run.add_argument("--dataset", help="named dataset, e.g. magic04")
    run.add_argument("--data", help="path to a LIBSVM or CSV file")
    run.add_argument("--format", choices=["libsvm", "csv"])
    run.add_argument("--task", choices=["cls", "reg"])
    run.add_argument("--label-col", type=int)
    run.add_argument("--perms", type=int, help="number of random permutations (seeds)")
    run.add_argument("--seed", type=int, help="first seed")
    run.add_argument("--limit", type=int, help="use only the first n rows of each permutation")
    run.add_argument("--output", help="directory for results.json and results.txt")
    run.add_argument("--trace", help="directory for per-round CSV traces")
    run.add_argument("--jobs", type=int)
    run.add_argument("--no-time", dest="report_time", action="store_false", default=None,
                     help="omit wall-clock columns so reports are byte-reproducible")
    return parser


def config_from_args(args) -> RunConfig:
    mapping = {}
    if args.config:
        mapping.update(RunConfig.from_toml(args.config).to_dict())
        mapping.pop("U", None)
    overrides = {
        "algorithm": args.algo, "loss": args.loss, "widths": args.widths, "radius": args.radius,
        "horizon": args.horizon, "delta": args.delta, "eta": args.eta, "lam": args.lam,
        "lambda_grid": args.lambda_grid, "ell_max": args.ell_max, "features": args.features,
        "ioks_variant": args.ioks_variant, "dataset": args.dataset, "data": args.data,
        "format": args.format, "task": args.task, "label_col": args.label_col, "limit": args.limit,
        "output": args.output, "trace": args.trace, "jobs": args.jobs, "report_time": args.report_time,
    }
    mapping.update({k: v for k, v in overrides.items() if v is not None})
    if args.perms is not None or args.seed is not None:
        first = args.seed if args.seed is not None else 0
        n = args.perms if args.perms is not None else len(mapping.get("seeds", range(10)))
        mapping["seeds"] = tuple(range(first, first + n))
    return RunConfig.from_mapping(mapping)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = config_from_args(args)
        if not config.output:
            config.output = "results"
        table = run_experiment(config)
    except (OkselectError, FileNotFoundError) as exc:
        print(f"okselect: error: {exc}", file=sys.stderr)
        return 2
    print((Path(config.output) / "results.txt").read_text(), end="")
    summary = {r.algorithm: {"mean": r.mean, "std": r.std} for r in table.rows}
    logging.getLogger(__name__).info("summary %s", json.dumps(summary))
    return 0


if __name__ == "__main__":
    sys.exit(main())
