"""Command line entry point: convert <raw_dir> <name> <out_dir>."""

from __future__ import annotations

import argparse
import sys

from .convert import EXPECTED_STATS, convert, verify


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="convert",
        description="Convert upstream pickled citation shards (ind.<name>.*) "
                    "into a five-file text dataset directory.",
    )
    parser.add_argument("raw_dir", help="directory holding the ind.<name>.* files")
    parser.add_argument("name", help="dataset name, e.g. cora, citeseer, pubmed")
    parser.add_argument("out_dir",
                        help="directory to write meta/edges/features/labels/masks into")
    args = parser.parse_args(argv)

    try:
        out = convert(args.raw_dir, args.name, args.out_dir)
    except (FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    print(f"converted {args.name} -> {out}")
    if args.name in EXPECTED_STATS:
        report = verify(out, EXPECTED_STATS[args.name])
        for line in report.lines():
            print(f"  {line}")
        if not report.ok:
            print(f"error: converted {args.name} does not match the published counts",
                  file=sys.stderr)
            return 1
    else:
        print("  (no published counts on record for this name; skipping the check)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
