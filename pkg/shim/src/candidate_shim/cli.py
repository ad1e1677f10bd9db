"""Command line entry: ``shim <source-file> <class-name> [--whitelist PATH]``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from candidate_shim.host import host
from candidate_shim.whitelist import load_whitelist

USAGE_ERROR = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shim",
        description=(
            "Host an optimizer class from a source file behind the ask/tell "
            "wire protocol on standard streams."
        ),
    )
    parser.add_argument("source_file", help="path to the candidate source")
    parser.add_argument("class_name", help="optimizer class to instantiate")
    parser.add_argument(
        "--whitelist",
        metavar="PATH",
        default=None,
        help="file of allowed third-party packages, one per line "
        "(default: the packaged list)",
    )
    return parser


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    try:
        source = Path(args.source_file).read_text()
    except OSError as exc:
        print(f"shim: cannot read source file: {exc}", file=sys.stderr)
        return USAGE_ERROR
    try:
        whitelist = load_whitelist(args.whitelist)
    except OSError as exc:
        print(f"shim: cannot read whitelist: {exc}", file=sys.stderr)
        return USAGE_ERROR

    return host(
        source,
        args.class_name,
        sys.stdin,
        sys.stdout,
        whitelist,
        source_name=args.source_file,
    )


if __name__ == "__main__":
    sys.exit(main())
