"""CLI: kamtori-figures render --kind <k> --in <csv...> --out <file>."""

from __future__ import annotations

import argparse
import sys
from typing import List, Optional

from .render import KINDS, FigureSpec, SchemaError, render


def main(argv: Optional[List[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="kamtori-figures",
        description="Render kamtori run-directory CSVs into figures.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("render", help="draw one figure")
    p.add_argument("--kind", required=True, choices=KINDS)
    p.add_argument("--in", dest="inputs", nargs="+", required=True, metavar="CSV")
    p.add_argument("--out", required=True)
    p.add_argument("--peaks", help="peaks.json sidecar (scan_curve only)")
    p.add_argument("--title", default="")
    p.add_argument("--labels", nargs="*", default=())
    args = parser.parse_args(argv)

    try:
        spec = FigureSpec(
            kind=args.kind,
            inputs=args.inputs,
            output=args.out,
            peaks=args.peaks,
            title=args.title,
            labels=tuple(args.labels),
        )
        path = render(spec)
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
