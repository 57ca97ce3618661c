"""CLI: export-embeddings --names <txt> --model <id> --out <json>."""

from __future__ import annotations

import argparse
import sys

from . import DEFAULT_MODEL, EmbeddingExportJob, ExportError, export_embeddings


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="export-embeddings",
        description="Write an embedding table for a list of names",
    )
    parser.add_argument("--names", required=True, help="text file, one name per line")
    parser.add_argument(
        "--model",
        default=DEFAULT_MODEL,
        help="sentence-transformers id, or 'hashed-trigram[:dim]' for the "
        "offline encoder",
    )
    parser.add_argument("--out", required=True, help="output JSON path")
    args = parser.parse_args(argv)
    try:
        out = export_embeddings(
            EmbeddingExportJob(names_path=args.names, model=args.model, output_path=args.out)
        )
    except ExportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
