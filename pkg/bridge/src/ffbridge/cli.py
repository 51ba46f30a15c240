"""Command line for exporting checkpoints into ffrank interchange files."""

from __future__ import annotations

import argparse
import logging
import sys

from .export import KINDS, ExportJob, run_job


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ffbridge",
        description="Export a pretrained transformer into ffrank's text interchange formats.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("export-table", help="dump the token embedding matrix")
    p.add_argument("--model", required=True, help="checkpoint path or hub identifier")
    p.add_argument("--output", required=True)

    p = sub.add_parser("export-vectors", help="encode id<TAB>text lines into vectors")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True, help="id<TAB>text lines")
    p.add_argument("--kind", choices=[k for k in KINDS if k != "embedding_table"],
                   required=True)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--max-length", type=int, default=256)
    p.add_argument("--output", required=True)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        if args.command == "export-table":
            job = ExportJob(model=args.model, kind="embedding_table", output=args.output)
        else:
            job = ExportJob(
                model=args.model,
                kind=args.kind,
                output=args.output,
                input_path=args.input,
                batch_size=args.batch_size,
                max_length=args.max_length,
            )
        count = run_job(job)
        print(f"wrote {count} records to {job.output}")
        return 0
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
