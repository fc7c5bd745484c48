"""polevent command line: build an index, query it, explore it in a REPL,
and score extractions against a gold set.

Exit codes are stable: 0 ok, 1 general failure, 2 data/config problem,
3 transport/endpoint failure, 64 usage error. With --json, standard out
carries machine-readable JSON only; human text goes to standard error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import AppConfig, config_to_json, load_config
from .engine import EngineConfig, answer_query, build, load_bundle
from .errors import (
    AlignmentError,
    ConfigError,
    EmbedderMismatchError,
    EmptyCorpusError,
    GoldFormatError,
    IndexFormatError,
    PolEventError,
    RemoteError,
)
from .evalharness import evaluate, load_gold
from .llm import MockScript

EXIT_OK = 0
EXIT_GENERAL = 1
EXIT_DATA = 2
EXIT_TRANSPORT = 3
EXIT_USAGE = 64

_DATA_ERRORS = (
    EmptyCorpusError,
    GoldFormatError,
    AlignmentError,
    ConfigError,
    IndexFormatError,
    EmbedderMismatchError,
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on bad usage; this CLI promises 64."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _engine_config(app: AppConfig, args) -> EngineConfig:
    mock_script = MockScript.load(args.mock) if getattr(args, "mock", None) else None
    k = args.k if getattr(args, "k", None) else app.k
    return EngineConfig(
        k=k,
        budget_chars=app.budget_chars,
        embedder=app.embedder,
        llm=app.llm,
        mock_script=mock_script,
        attribution=app.attribution,
        template=app.template,
    )


def _events_json(answer) -> list[dict]:
    return [event.to_json() for event in answer.events]


def _print_verbose(answer, stream) -> None:
    for n, hit in enumerate(answer.hits, start=1):
        print(f"  hit {n}: {hit.chunk_id} score={hit.score:.4f} {hit.text[:80]!r}", file=stream)
    if answer.warning:
        print(f"  warning: {answer.warning}", file=stream)
    print(f"  raw: {answer.raw_text[:400]}", file=stream)
    print(f"  timings: {answer.timings}", file=stream)


def cmd_build(args) -> int:
    app = load_config(args.config)
    out_dir = args.out or app.index_dir
    if not out_dir:
        print("build: --out directory required", file=sys.stderr)
        return EXIT_USAGE
    bundle, stats = build(args.corpus, out_dir, _engine_config(app, args), app.corpus)
    if args.json:
        print(
            json.dumps(
                {
                    "documents": stats.documents,
                    "rejected": stats.rejected,
                    "chunks": stats.chunks,
                    "dim": stats.dim,
                    "out": str(out_dir),
                }
            )
        )
    else:
        print(
            f"{stats.documents} documents, {stats.chunks} chunks "
            f"({stats.rejected} rejected, dim {stats.dim}) -> {out_dir}"
        )
    return EXIT_OK


def _read_question(args) -> str:
    if args.q is not None:
        question = args.q
    else:
        question = sys.stdin.read()
    if not question.strip():
        raise UsageError("question is empty")
    return question.strip()


def cmd_query(args) -> int:
    app = load_config(args.config)
    index_dir = args.index or app.index_dir
    if not index_dir:
        print("query: --index directory required", file=sys.stderr)
        return EXIT_USAGE
    question = _read_question(args)
    bundle = load_bundle(index_dir)
    answer = answer_query(question, bundle, _engine_config(app, args))
    if args.verbose:
        _print_verbose(answer, sys.stderr)
    print(json.dumps(_events_json(answer), ensure_ascii=False))
    return EXIT_OK


def _sources_lines(answer, bundle) -> list[str]:
    lines = []
    for event in answer.events:
        for chunk_id in event.sources:
            doc = bundle.document_for_chunk(chunk_id)
            if doc is None:
                lines.append(f"{chunk_id}: (unknown document)")
            else:
                where = doc.source_link or doc.headline
                lines.append(f"{chunk_id}: {where} ({doc.published.isoformat()})")
    return lines or ["(no sources: last answer had no events)"]


def cmd_repl(args) -> int:
    app = load_config(args.config)
    index_dir = args.index or app.index_dir
    if not index_dir:
        print("repl: --index directory required", file=sys.stderr)
        return EXIT_USAGE
    bundle = load_bundle(index_dir)
    config = _engine_config(app, args)
    last_answer = None
    print("polevent repl: ask a question, :sources for attributions, :quit to leave", file=sys.stderr)
    while True:
        print("> ", end="", file=sys.stderr, flush=True)
        line = sys.stdin.readline()
        if not line:
            return EXIT_OK
        line = line.strip()
        if not line:
            continue
        if line == ":quit":
            return EXIT_OK
        if line == ":sources":
            if last_answer is None:
                print("(no answer yet)")
            else:
                print("\n".join(_sources_lines(last_answer, bundle)))
            continue
        try:
            last_answer = answer_query(line, bundle, config)
            if args.verbose:
                _print_verbose(last_answer, sys.stderr)
            print(json.dumps(_events_json(last_answer), ensure_ascii=False))
        except PolEventError as exc:
            print(f"error: {exc}", file=sys.stderr)


def cmd_eval(args) -> int:
    app = load_config(args.config)
    gold_path = args.gold or app.gold_path
    index_dir = args.index or app.index_dir
    if not gold_path or not index_dir:
        print("eval: --gold file and --index directory required", file=sys.stderr)
        return EXIT_USAGE
    gold = load_gold(gold_path)
    bundle = load_bundle(index_dir)
    config = _engine_config(app, args)
    answers = [answer_query(item.question, bundle, config) for item in gold.items]
    report = evaluate(answers, gold, tau=args.tau)
    if args.report:
        Path(args.report).write_text(
            json.dumps(report.to_json(), ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
        )
    if args.json:
        print(json.dumps(report.to_json(), ensure_ascii=False))
    else:
        print(report.table())
        print(f"accuracy {report.accuracy:.3f}")
    return EXIT_OK


def cmd_config(args) -> int:
    app = load_config(args.config)
    if args.show_prompts:
        print("--- system template ---")
        print(app.template.system_text)
        print("--- wrapper template ---")
        print(app.template.wrapper_text)
        return EXIT_OK
    print(json.dumps(config_to_json(app), indent=2, ensure_ascii=False))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="polevent", description="Political event extraction over a news corpus")
    parser.add_argument("--config", help="path to a JSON config file")
    sub = parser.add_subparsers(dest="command", required=True)

    p_build = sub.add_parser("build", help="ingest a corpus and build the index")
    p_build.add_argument("--corpus", required=True, help="JSON-lines news corpus")
    p_build.add_argument("--out", help="output directory for the index artifacts")
    p_build.add_argument("--json", action="store_true", help="machine-readable output")
    p_build.set_defaults(func=cmd_build)

    p_query = sub.add_parser("query", help="answer one question against the index")
    p_query.add_argument("--index", help="index directory")
    p_query.add_argument("--q", help="the question (default: read standard input)")
    p_query.add_argument("--k", type=int, help="contexts to retrieve")
    p_query.add_argument("--mock", help="mock script JSON instead of a live endpoint")
    p_query.add_argument("--json", action="store_true")
    p_query.add_argument("--verbose", action="store_true", help="hits and raw output to stderr")
    p_query.set_defaults(func=cmd_query)

    p_repl = sub.add_parser("repl", help="interactive question loop")
    p_repl.add_argument("--index", help="index directory")
    p_repl.add_argument("--k", type=int)
    p_repl.add_argument("--mock")
    p_repl.add_argument("--verbose", action="store_true")
    p_repl.set_defaults(func=cmd_repl)

    p_eval = sub.add_parser("eval", help="score the pipeline against a gold set")
    p_eval.add_argument("--gold", help="gold set JSON")
    p_eval.add_argument("--index", help="index directory")
    p_eval.add_argument("--k", type=int)
    p_eval.add_argument("--mock")
    p_eval.add_argument("--tau", type=float, default=0.8, help="match threshold")
    p_eval.add_argument("--report", help="write the full report JSON here")
    p_eval.add_argument("--json", action="store_true")
    p_eval.set_defaults(func=cmd_eval)

    p_config = sub.add_parser("config", help="print the effective configuration")
    p_config.add_argument("--show-prompts", action="store_true")
    p_config.set_defaults(func=cmd_config)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except _DATA_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except RemoteError as exc:
        print(f"transport error: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT
    except KeyboardInterrupt:
        return EXIT_GENERAL
    except (PolEventError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_GENERAL


if __name__ == "__main__":
    sys.exit(main())
