"""Command-line interface: extract representations, list models, build manifests."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .errors import ExtractorError
from .extract import ExtractJob, run_job
from .manifest import build_manifest
from .models import DEFAULT_CHUNK_SECONDS, MODEL_SPECS


def cmd_extract(args) -> int:
    job = ExtractJob(
        model_name=args.model,
        wav_dir=Path(args.wav_dir),
        out_dir=Path(args.out_dir),
        chunk_seconds=args.chunk_seconds,
    )
    written = run_job(job, log=print)
    print(f"{len(written)} files written to {args.out_dir}")
    return 0


def cmd_list_models(args) -> int:
    print(f"{'name':<16} {'layers':>6} {'dim':>5}  checkpoint")
    for name in sorted(MODEL_SPECS):
        spec = MODEL_SPECS[name]
        print(f"{spec.name:<16} {spec.num_layers:>6} {spec.dim:>5}  {spec.hf_id}")
    return 0


def cmd_build_manifest(args) -> int:
    path = build_manifest(args.pairs_csv, args.repr_dir, args.name)
    print(f"manifest written to {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="voicesim-extract",
        description="Dump frozen layer-wise speech encoder hidden states to LRP1 files",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="extract every .wav in a directory")
    p.add_argument("--model", "-m", required=True, choices=sorted(MODEL_SPECS))
    p.add_argument("wav_dir")
    p.add_argument("out_dir")
    p.add_argument(
        "--chunk-seconds",
        type=int,
        default=DEFAULT_CHUNK_SECONDS,
        help="whisper chunk length; clips longer than this are refused",
    )
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("list-models", help="show the supported model catalog")
    p.set_defaults(func=cmd_list_models)

    p = sub.add_parser("build-manifest", help="write a rated-pair manifest from a CSV listing")
    p.add_argument("pairs_csv")
    p.add_argument("repr_dir", help="directory holding the extracted .lrp files")
    p.add_argument("--name", default="manifest.ndjson", help="manifest file name")
    p.set_defaults(func=cmd_build_manifest)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ExtractorError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
