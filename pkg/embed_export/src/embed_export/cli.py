"""Command line entry point.

    embed-export export --records R --model M --batch B --layer L --out O
                        [--deterministic]

Exit codes: 0 success, 1 input or usage error, 2 model load or runtime
failure.
"""

from __future__ import annotations

import argparse
import sys

from .exporter import ModelLoadError, export_embeddings


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValueError(message)


def main(argv=None) -> int:
    parser = _Parser(prog="embed-export", description=__doc__)
    sub = parser.add_subparsers(dest="command", metavar="command")
    p = sub.add_parser("export", help="embed a records file")
    p.add_argument("--records", required=True, help="records .jsonl file")
    p.add_argument("--model", required=True, help="encoder checkpoint path or hub id")
    p.add_argument("--batch", type=int, default=32, help="inference batch size")
    p.add_argument("--layer", type=int, default=-1,
                   help="hidden-state index; -1 is the final layer")
    p.add_argument("--out", required=True, help="output .slmx path")
    p.add_argument("--deterministic", action="store_true",
                   help="single-threaded, seeded inference for stable hashes")

    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_usage(sys.stderr)
            return 1
        manifest = export_embeddings(
            args.records,
            args.model,
            args.out,
            batch_size=args.batch,
            layer=args.layer,
            deterministic=args.deterministic,
        )
    except SystemExit as exc:  # argparse --help
        return 0 if exc.code in (0, None) else 1
    except (ValueError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ModelLoadError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(
        f"records={manifest.records} hidden_size={manifest.hidden_size} "
        f"layer={manifest.layer} truncated={manifest.truncated} wrote {args.out}"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
