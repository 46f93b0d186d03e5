"""`render` command-line entry point.

    render --in <csv> --kind <kind> --out <png|svg> [--group policy]
           [--dump-table]

Exit codes: 0 success, 1 schema/usage error (stderr names the offending
column). --dump-table echoes the input rows verbatim to stdout, for
diffing against the plotted data.
"""

from __future__ import annotations

import argparse
import sys

from . import KINDS
from .render import SchemaError, read_table, render


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise SchemaError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="render", description=__doc__,
                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--in", dest="src", required=True, help="input CSV")
    p.add_argument("--kind", required=True, choices=KINDS)
    p.add_argument("--out", required=True, help="output image (.png or .svg)")
    p.add_argument("--group", default=None,
                   help="grouping column for sweep kinds (default: policy)")
    p.add_argument("--dump-table", action="store_true",
                   help="echo the plotted rows verbatim to stdout")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        table = read_table(args.src, args.kind, args.group)
        render(table, args.kind, args.out, args.group)
        if args.dump_table:
            for line in table.raw_lines:
                print(line)
    except (SchemaError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
