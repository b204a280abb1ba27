"""Command-line entry point: run experiments, check oracles, print presets."""

from __future__ import annotations

import argparse
import dataclasses
import sys

from .experiment import (
    PRESET_NOTES,
    PRESETS,
    load_config,
    oracle_check,
    preset,
    run_experiment,
)
from .training import TrainingDiverged

CONVERT_HELP = """\
The companion planetoid_converter package turns the upstream pickled
citation benchmarks (cora, citeseer, pubmed) into the text dataset
directories this tool loads through `dataset.path`.

Expected raw files in <raw_dir> (upstream naming convention):
    ind.<name>.x   ind.<name>.tx   ind.<name>.allx
    ind.<name>.y   ind.<name>.ty   ind.<name>.ally
    ind.<name>.graph   ind.<name>.test.index

Install and run:
    pip install ./converter
    convert <raw_dir> <name> <out_dir>

The output directory receives meta.txt, edges.txt, features.txt,
labels.txt and masks.txt, with the standard train/val/test masks, and
the counts are verified against the published dataset statistics
(cora: 2708 nodes, 5278 edges, 1433 features, 7 classes). Point an
experiment config at the result with:
    dataset.path = <out_dir>
"""


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bipass",
        description="Bi-directional low-pass graph filtering: experiments and checks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run an experiment config")
    run_p.add_argument("--config", required=True, help="flat key = value config file")
    run_p.add_argument("--seed", type=int, default=None, help="override the master seed")
    run_p.add_argument("--out", default=None, help="override the output directory")

    sub.add_parser("oracle-check", help="run every registered numerical oracle")

    preset_p = sub.add_parser("preset", help="print a named hyperparameter fragment")
    preset_p.add_argument("--name", required=True,
                          help=f"one of: {', '.join(sorted(PRESETS))}")

    sub.add_parser("convert-help", help="how to convert upstream citation datasets")
    return parser


def _cmd_run(args) -> int:
    config = load_config(args.config)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["out"] = args.out
    if overrides:
        config = dataclasses.replace(config, **overrides)
    try:
        out = run_experiment(config)
    except TrainingDiverged as exc:
        print(f"error: {exc} (partial results kept in {config.out})", file=sys.stderr)
        return 3
    print(f"wrote {out['results']} and {out['summary']} ({len(out['rows'])} rows)")
    return 0


def _cmd_oracle_check() -> int:
    results = oracle_check()
    failed = [r for r in results if not r.ok]
    print(f"{len(results) - len(failed)}/{len(results)} oracle families passed")
    return 1 if failed else 0


def _cmd_preset(name: str) -> int:
    fragment = preset(name)
    print(f"# preset {name}: {PRESET_NOTES[name]}")
    for key, value in fragment.items():
        print(f"{key} = {value}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "oracle-check":
            return _cmd_oracle_check()
        if args.command == "preset":
            return _cmd_preset(args.name)
        if args.command == "convert-help":
            print(CONVERT_HELP, end="")
            return 0
    except ValueError as exc:
        # ConfigError subclasses ValueError; data-level rejections raised
        # while rows execute (malformed dataset files, a graph too small
        # to split for the task) are user input problems all the same.
        print(f"error: {exc}", file=sys.stderr)
        return 2
    raise AssertionError(f"unhandled command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
