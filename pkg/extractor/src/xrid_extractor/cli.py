"""xrid-extract: image folders in, xrid binary feature files out."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .errors import ExtractorError
from .extract import extract


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="xrid-extract",
        description="Extract CNN features from a <label>/<image> folder "
                    "into the xrid binary feature format",
    )
    parser.add_argument("--images", required=True, type=Path,
                        help="directory with one subdirectory per identity")
    parser.add_argument("--out", required=True, type=Path, help="output feature file")
    parser.add_argument("--backbone", default="alexnet")
    parser.add_argument("--layer", default="fc7")
    parser.add_argument("--batch", type=int, default=16)
    parser.add_argument("--weights", default="pretrained",
                        help="'pretrained', 'random', or a state-dict path")
    parser.add_argument("--seed", type=int, default=0,
                        help="initialization seed for --weights random")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        count = extract(args.images, args.out, backbone=args.backbone,
                        layer=args.layer, weights=args.weights,
                        batch=args.batch, seed=args.seed)
    except ExtractorError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {count} feature vectors to {args.out}")
    print(f"preprocessing recorded in {args.out}.meta.txt")
    return 0


if __name__ == "__main__":
    sys.exit(main())
