"""Command-line entry points: collect texts, export embeddings."""

import argparse
import sys
from pathlib import Path

from .export import ExportJob, export
from .texts import collect_texts, write_texts


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="embed-export",
        description="offline embedding export for keyed engine embedding files")
    subs = parser.add_subparsers(dest="command", required=True)

    collect = subs.add_parser(
        "collect", help="gather the unique edge labels and questions to embed")
    collect.add_argument("--kg", required=True, help="fact TSV file")
    collect.add_argument("--dataset", required=True, help="conversation dataset JSON")
    collect.add_argument("--out", required=True, help="texts file to write, one per line")

    run = subs.add_parser("export", help="encode a texts file into an embedding file")
    run.add_argument("--texts", required=True, help="input texts file, one per line")
    run.add_argument("--out", required=True, help="embedding file to write")
    run.add_argument("--model", default="bert-base-uncased",
                     help="pretrained encoder name (default: bert-base-uncased)")
    run.add_argument("--dim", type=int, default=None,
                     help="require this embedding width; must match the encoder")

    args = parser.parse_args(argv)
    try:
        if args.command == "collect":
            texts = collect_texts(args.kg, args.dataset)
            write_texts(texts, args.out)
            print(f"wrote {len(texts)} texts to {args.out}")
        else:
            out = export(ExportJob(texts_path=Path(args.texts), out_path=Path(args.out),
                                   model_name=args.model, d=args.dim))
            lines = out.read_text(encoding="utf-8").splitlines()
            print(f"wrote {len(lines) - 1} embeddings ({lines[0]}) to {out}")
    except (OSError, RuntimeError, ValueError) as exc:
        print(f"error ({args.command}): {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
