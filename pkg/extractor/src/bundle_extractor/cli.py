"""Command-line front end mirroring ExtractionSpec."""

from __future__ import annotations

import argparse
import sys

from .extract import INIT_PRETRAINED, INIT_RANDOM, ExtractionSpec, extract


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bundle-extract",
        description="Dump penultimate-layer embeddings of a vision model "
        "as an embedding-bundle directory.",
    )
    parser.add_argument("--model", required=True, help="torchvision model name")
    parser.add_argument("--dataset", required=True, help="ImageFolder root")
    parser.add_argument("--out", required=True, help="bundle directory to write")
    parser.add_argument("--split", default="train", help="split name recorded in provenance")
    parser.add_argument("--init", choices=(INIT_PRETRAINED, INIT_RANDOM),
                        default=INIT_PRETRAINED)
    parser.add_argument("--seed", type=int, default=0, help="seeds random-init weights")
    parser.add_argument("--batch-size", type=int, default=32)
    parser.add_argument("--checkpoint", default=None,
                        help="local state_dict file for pretrained weights")
    parser.add_argument("--no-predictions", action="store_true",
                        help="skip the source-softmax predictions file")
    parser.add_argument("--name", default=None, help="bundle name override")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    spec = ExtractionSpec(
        model=args.model,
        dataset=args.dataset,
        output=args.out,
        split=args.split,
        init=args.init,
        seed=args.seed,
        batch_size=args.batch_size,
        checkpoint=args.checkpoint,
        with_predictions=not args.no_predictions,
        name=args.name,
    )
    try:
        path = extract(spec)
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
