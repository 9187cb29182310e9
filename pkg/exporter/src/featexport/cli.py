"""Command line mirror of ExportConfig.

Exit codes: 0 done, 2 export failed, 64 bad usage.
"""

import argparse
import json
import logging
import sys

from .errors import ExportError
from .export import ExportConfig, export_features

EXIT_OK = 0
EXIT_RUNTIME = 2
EXIT_USAGE = 64


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit 2; keep 2 for runtime only
        raise _UsageError(message)


def build_parser() -> _Parser:
    parser = _Parser(prog="featexport", description=__doc__.splitlines()[0])
    parser.add_argument("--manifest", required=True, help="dataset manifest JSONL")
    parser.add_argument("--media-dir", required=True, help="content-addressed media root")
    parser.add_argument("--modality", required=True, choices=("image", "text"))
    parser.add_argument("--out", required=True, help="KENYFEAT output path")
    parser.add_argument("--backbone", default=None, help="encoder name; default per modality")
    parser.add_argument("--augment", action="store_true", help="seeded train-time augmentation")
    parser.add_argument("--image-dim", type=int, default=2048)
    parser.add_argument("--text-dim", type=int, default=768)
    parser.add_argument("--seed", type=int, default=0)
    return parser


def run(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(message)s")
    try:
        args = build_parser().parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    try:
        cfg = ExportConfig(
            manifest=args.manifest,
            media_dir=args.media_dir,
            modality=args.modality,
            out=args.out,
            backbone=args.backbone,
            augment=args.augment,
            image_dim=args.image_dim,
            text_dim=args.text_dim,
            seed=args.seed,
        )
        result = export_features(cfg)
    except ExportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME

    print(
        json.dumps(
            {
                "out": str(result.out),
                "written": result.written,
                "skipped": len(result.skipped),
                "errors_file": str(result.errors_file) if result.errors_file else None,
            },
            sort_keys=True,
        )
    )
    return EXIT_OK


def main() -> None:
    raise SystemExit(run())


if __name__ == "__main__":
    main()
