"""export-embeddings: batch-encode a dataset into a QEMB store."""

from __future__ import annotations

import argparse
import sys

from . import ExportError, __version__
from .encoders import ALIASES, make_encoder
from .export import export_embeddings


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(
        prog="export-embeddings",
        description=__doc__,
        epilog=f"encoder aliases: {', '.join(ALIASES)} (or any checkpoint id, or 'hash')",
    )
    ap.add_argument("--version", action="version", version=f"qemb-exporter {__version__}")
    ap.add_argument("--dataset", required=True)
    ap.add_argument("--format", default="jsonl", choices=["jsonl", "tsv"])
    ap.add_argument("--encoder", required=True,
                    help="alias, checkpoint id, or 'hash' for the offline test encoder")
    ap.add_argument("--backend", default="auto",
                    choices=["auto", "hash", "sentence-transformers", "transformers"])
    ap.add_argument("--batch", type=int, default=64)
    ap.add_argument("--device", default="cpu")
    ap.add_argument("--revision", default=None, help="checkpoint revision to pin")
    ap.add_argument("--dim", type=int, default=64, help="hash backend only")
    ap.add_argument("--seed", type=int, default=0, help="hash backend only")
    ap.add_argument("--out", required=True)
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        encoder = make_encoder(
            args.encoder, backend=args.backend, device=args.device,
            batch_size=args.batch, revision=args.revision,
            dim=args.dim, seed=args.seed,
        )
        count, dim = export_embeddings(args.dataset, encoder, args.out, format=args.format)
    except ExportError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    print(f"wrote {count} vectors (dim {dim}) to {args.out} [{encoder.name}]",
          file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
