"""Command line entry point.

Exit status: 0 success, 1 some documents failed or are invalid,
2 configuration, usage or protocol error.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
import threading
from pathlib import Path

from . import metrics
from .model import DocumentParseError, SchemaError, ValidationError, deserialize, validate
from .pipeline import ConfigError, Pipeline, PipelineConfig, ResourceError, corpus_files, run_corpus_local

CONFIG_ENV = "OGMIOS_CONFIG"

log = logging.getLogger("ogmios")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _config(args) -> PipelineConfig:
    path = args.config or os.environ.get(CONFIG_ENV)
    if not path:
        raise UsageError(f"no pipeline config given (use --config or set {CONFIG_ENV})")
    return PipelineConfig.from_file(path)


def cmd_annotate(args) -> int:
    cfg = _config(args)
    results, summary = run_corpus_local(args.input, cfg, jobs=args.jobs, out_dir=args.output)
    for doc_id, step, error in summary.failures:
        print(f"FAILED {doc_id} in {step}: {error}", file=sys.stderr)
    print(summary.line())
    return 1 if summary.failed else 0


def cmd_serve(args) -> int:
    from .distribution import Coordinator, CoordinatorServer, DirectoryStore, parse_address
    from .pipeline import source_format

    journal = Path(args.journal)
    kwargs = dict(lease_seconds=args.lease_seconds, max_attempts=args.max_attempts, store=DirectoryStore(args.output))
    coord = Coordinator.resume(journal, **kwargs)
    known = {u.doc_id for u in coord.units.values()}
    queued = coord.enqueue((p.stem, p, source_format(p)) for p in corpus_files(args.corpus) if p.stem not in known)
    server = CoordinatorServer(coord, parse_address(args.listen)).start()
    host, port = server.address
    print(f"serving {coord.total} units ({queued} new) on {host}:{port}", file=sys.stderr, flush=True)
    try:
        server.wait_drained()
    except KeyboardInterrupt:
        pass
    finally:
        server.stop()
        coord.journal.close()
    counts = coord.counts()
    print(f"{coord.total} units: {counts['done']} done, {counts['failed-permanent']} failed, "
          f"{counts['queued'] + counts['leased']} unfinished")
    return 1 if counts["failed-permanent"] or not coord.drained() else 0


def cmd_work(args) -> int:
    from .distribution import parse_address, worker_loop

    pipeline = Pipeline.from_config(_config(args))
    stop = threading.Event()
    try:
        status = worker_loop(parse_address(args.server), pipeline, worker_id=args.worker_id, stop=stop,
                             max_retries=args.retries)
    except KeyboardInterrupt:
        stop.set()
        status = 0
    print("worker finished" if status == 0 else f"server {args.server} unreachable")
    return status


def _load_docs(directory):
    bad = []
    docs = []
    for path in corpus_files(directory):
        if path.suffix.lower() != ".xml":
            continue
        try:
            docs.append((path, deserialize(path.read_bytes())))
        except (ValueError, OSError) as exc:
            bad.append((path, exc))
    return docs, bad


def cmd_stats(args) -> int:
    docs, bad = _load_docs(args.directory)
    for path, exc in bad:
        print(f"skipping {path}: {exc}", file=sys.stderr)
    tsv = args.format == "tsv"
    stats = metrics.corpus_stats(d for _, d in docs)
    out = [stats.to_tsv() if tsv else stats.to_text()]
    if args.timing:
        report = metrics.timing_report(d for _, d in docs)
        out.append(report.to_tsv() if tsv else report.to_text())
    if args.sizes:
        hist = metrics.size_histogram(p.stat().st_size for p, _ in docs)
        out.append(metrics._tsv(("bytes_from", "bytes_to", "documents"), hist) if tsv
                   else metrics.size_histogram_text(hist))
    sys.stdout.write("\n".join(out))
    print(f"{len(docs)} documents summarized, {len(bad)} skipped")
    return 1 if bad else 0


def cmd_parser_eval(args) -> int:
    try:
        baseline = metrics.read_eval_records(args.baseline)
        variant = metrics.read_eval_records(args.variant)
        report = metrics.parser_eval_report(baseline, variant)
    except (OSError, ValueError) as exc:
        raise UsageError(str(exc)) from None
    sys.stdout.write(report.to_tsv() if args.format == "tsv" else report.to_text())
    print(f"compared {len(baseline)} baseline and {len(variant)} variant sentences")
    return 0


def cmd_validate(args) -> int:
    try:
        data = Path(args.file).read_bytes()
    except OSError as exc:
        raise UsageError(str(exc)) from None
    try:
        doc = deserialize(data)
    except ValidationError as exc:
        for v in exc.violations:
            print(f"{args.file}: {v}")
        print(f"{args.file}: invalid ({len(exc.violations)} violation(s))")
        return 1
    except (DocumentParseError, SchemaError) as exc:
        print(f"{args.file}: {exc}")
        return 1
    assert not validate(doc)
    print(f"{args.file}: valid ({len(doc.tokens)} tokens)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ogmios", description="Stand-off linguistic annotation of document collections.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    a = sub.add_parser("annotate", help="annotate a file or directory locally")
    a.add_argument("input")
    a.add_argument("output", help="output directory for XML documents")
    a.add_argument("--config")
    a.add_argument("--jobs", type=int, default=1)
    a.set_defaults(func=cmd_annotate)

    s = sub.add_parser("serve", help="coordinate distributed annotation of a corpus directory")
    s.add_argument("corpus")
    s.add_argument("--listen", required=True, help="HOST:PORT")
    s.add_argument("--journal", required=True)
    s.add_argument("--output", "--out", required=True, dest="output", help="directory for annotated documents")
    s.add_argument("--lease-seconds", type=float, default=300.0)
    s.add_argument("--max-attempts", type=int, default=3)
    s.set_defaults(func=cmd_serve)

    w = sub.add_parser("work", help="run a worker against a coordinator")
    w.add_argument("--server", required=True, help="HOST:PORT")
    w.add_argument("--config")
    w.add_argument("--worker-id")
    w.add_argument("--retries", type=int, default=5)
    w.set_defaults(func=cmd_work)

    st = sub.add_parser("stats", help="corpus statistics over annotated XML documents")
    st.add_argument("directory")
    st.add_argument("--timing", action="store_true")
    st.add_argument("--sizes", action="store_true")
    st.add_argument("--format", choices=("text", "tsv"), default="text")
    st.set_defaults(func=cmd_stats)

    pe = sub.add_parser("parser-eval", help="compare two parser evaluation files")
    pe.add_argument("baseline")
    pe.add_argument("variant")
    pe.add_argument("--format", choices=("text", "tsv"), default="text")
    pe.set_defaults(func=cmd_parser_eval)

    v = sub.add_parser("validate", help="check one platform XML document")
    v.add_argument("file")
    v.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                            format="%(levelname)s %(name)s: %(message)s")
        if getattr(args, "jobs", 1) < 1:
            raise UsageError("--jobs must be at least 1")
        return args.func(args)
    except UsageError as exc:
        print(str(exc).splitlines()[0], file=sys.stderr)
        return 2
    except (ConfigError, ResourceError, FileNotFoundError, NotADirectoryError) as exc:
        print(f"ogmios: {str(exc).splitlines()[0]}", file=sys.stderr)
        return 2
    except (ConnectionError, OSError) as exc:
        print(f"ogmios: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
