"""Command-line harness.

    bench run --server URL --corpus FILE [--batch-size N] [--in-flight K]
              [--mode cached|non-cached] [--timeout S] [--out report.json]
    bench extract --tree FILE --source FILE [--out steps.json]
    bench prepare-corpus --in FILE --out FILE

Exit codes: 0 success, 1 usage, 2 server/transport, 3 data.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import requests

from .bench import bench_run, load_snippets_for_run, write_report
from .corpus import prepare_records, read_records, write_corpus
from .errors import CorpusError, MalformedTree, SpanOutOfBounds
from .infotree import extract_data, format_steps
from .protocol import split_snippet

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_TRANSPORT = 2
EXIT_DATA = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse defaults to exit code 2
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def build_parser() -> _Parser:
    parser = _Parser(prog="bench", description="Proof verification benchmark harness")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="drive a running server with a proof corpus")
    run.add_argument("--server", required=True, help="server base URL")
    run.add_argument("--corpus", required=True, help="corpus file (JSON lines: uuid, code)")
    run.add_argument("--batch-size", type=int, default=8)
    run.add_argument("--in-flight", type=int, default=4, help="max concurrent requests")
    run.add_argument("--mode", choices=["cached", "non-cached"], default="cached")
    run.add_argument("--timeout", type=float, default=None, help="per-snippet seconds")
    run.add_argument("--out", default=None, help="write the report as JSON")

    extract = sub.add_parser("extract", help="extract proof steps from stored files")
    extract.add_argument("--tree", required=True, help="infotree JSON file")
    extract.add_argument("--source", required=True, help="proof source file")
    extract.add_argument("--out", default=None, help="write steps as JSON lines")

    prepare = sub.add_parser("prepare-corpus", help="clean a raw dataset export")
    prepare.add_argument("--in", dest="infile", required=True)
    prepare.add_argument("--out", dest="outfile", required=True)
    return parser


def _cmd_run(args: argparse.Namespace) -> int:
    try:
        corpus = load_snippets_for_run(args.corpus)
    except CorpusError as exc:
        print(f"corpus error: {exc}", file=sys.stderr)
        return EXIT_DATA
    try:
        report = bench_run(
            args.server,
            corpus,
            batch_size=args.batch_size,
            max_in_flight=args.in_flight,
            mode=args.mode,
            timeout=args.timeout,
        )
    except requests.RequestException as exc:
        print(f"server unreachable: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT
    print(report.table())
    if args.out:
        write_report(report, args.out)
        print(f"report written to {args.out}")
    return EXIT_OK


def _cmd_extract(args: argparse.Namespace) -> int:
    try:
        document = json.loads(Path(args.tree).read_text(encoding="utf-8"))
        source = Path(args.source).read_text(encoding="utf-8")
    except (OSError, json.JSONDecodeError) as exc:
        print(f"cannot read inputs: {exc}", file=sys.stderr)
        return EXIT_DATA
    body = split_snippet(source).body
    try:
        steps = extract_data(document, body)
    except (MalformedTree, SpanOutOfBounds) as exc:
        print(f"extraction failed: {exc}", file=sys.stderr)
        return EXIT_DATA
    if steps:
        print(format_steps(steps))
    print(f"{len(steps)} intervals")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            for step in steps:
                fh.write(json.dumps(step.to_wire(), ensure_ascii=False) + "\n")
        print(f"steps written to {args.out}")
    return EXIT_OK


def _cmd_prepare(args: argparse.Namespace) -> int:
    try:
        records = read_records(args.infile)
    except CorpusError as exc:
        print(f"corpus error: {exc}", file=sys.stderr)
        return EXIT_DATA
    kept = prepare_records(records)
    count = write_corpus(args.outfile, kept)
    print(f"kept {count} of {len(records)} records -> {args.outfile}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    handlers = {"run": _cmd_run, "extract": _cmd_extract, "prepare-corpus": _cmd_prepare}
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
