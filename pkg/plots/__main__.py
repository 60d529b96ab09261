"""Command-line entry point: ``python -m plots <kind> --in … --manifest … --out …``"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import List, Optional

from .render import KIND_COMMANDS, FigureSpec, SchemaError, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plots",
        description="Render figures from simulation CSV tables and manifests.",
    )
    parser.add_argument("kind", choices=sorted(KIND_COMMANDS),
                        help="figure kind to render")
    parser.add_argument("--in", dest="csv_path", type=Path, required=True,
                        help="input results CSV")
    parser.add_argument("--manifest", type=Path, required=True,
                        help="JSON manifest written alongside the CSV")
    parser.add_argument("--out", type=Path, required=True,
                        help="output image path (.svg or .png)")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = FigureSpec.for_kind(args.kind, args.csv_path, args.manifest,
                                   args.out)
        render(spec)
    except (SchemaError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
