"""Per-document orchestration of the annotation steps.

Steps always run in the canonical order below; a configuration only switches
steps on or off.  Every executed step is timed, as are input loading and XML
rendering, and the records travel inside the output document.
"""
from __future__ import annotations

import configparser
import logging
import os
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Mapping, Optional, Union

from .lexical import Gazetteer, MorphLexicon, pos_tag_and_lemmatize, segment_sentences, segment_words, tag_named_entities
from .model import Document, ResourceError, TimingRecord, ValidationError, deserialize, render_body, render_timings, validate
from .terminology import NullParser, Parser, Terminology, parse_document, tag_terms
from .tokenizer import tokenize_document

log = logging.getLogger(__name__)

STEP_ORDER = ("tokenize", "ne", "words", "sentences", "morpho", "terms", "parse", "anaphora")
PREREQUISITES = {
    "tokenize": (),
    "ne": ("tokenize",),
    "words": ("tokenize", "ne"),
    "sentences": ("words",),
    "morpho": ("words", "sentences"),
    "terms": ("morpho", "words", "ne"),
    "parse": ("sentences", "terms"),
    "anaphora": ("parse",),
}
NOT_IMPLEMENTED = ("anaphora",)
FULL_LINE = ("tokenize", "ne", "words", "sentences", "morpho", "terms")
LOAD = "load"
RENDER = "render"

RESOURCE_ROOT_ENV = "OGMIOS_RESOURCE_ROOT"


@dataclass(frozen=True)
class PipelineConfig:
    steps: tuple = FULL_LINE
    gazetteer: Optional[str] = None
    lexicon: Optional[str] = None
    suffix_rules: Optional[str] = None
    terminology: Optional[str] = None
    case_fold: bool = False
    variants: bool = True
    # "step:marker" -- the step raises on documents containing marker.
    fault_injection: Optional[str] = None
    base_dir: Optional[str] = None

    def resource_path(self, value: Optional[str]) -> Optional[Path]:
        if not value:
            return None
        path = Path(value)
        if path.is_absolute():
            return path
        root = os.environ.get(RESOURCE_ROOT_ENV) or self.base_dir
        return Path(root) / path if root else path

    @classmethod
    def parse(cls, text: str, base_dir: Optional[str] = None) -> "PipelineConfig":
        """Read the INI-style config format (sections pipeline/resources/options)."""
        cp = configparser.ConfigParser()
        cp.read_string(text)
        known = {"pipeline": {"steps"},
                 "resources": {"gazetteer", "lexicon", "suffix_rules", "terminology"},
                 "options": {"case_fold", "variants", "fault_injection"}}
        for section in cp.sections():
            if section not in known:
                raise ValueError(f"unknown config section [{section}]")
            extra = set(cp[section]) - known[section]
            if extra:
                raise ValueError(f"unknown key(s) in [{section}]: {', '.join(sorted(extra))}")
        kwargs = {"base_dir": base_dir}
        if cp.has_option("pipeline", "steps"):
            kwargs["steps"] = tuple(s.strip() for s in cp["pipeline"]["steps"].split(",") if s.strip())
        if cp.has_section("resources"):
            kwargs.update({k: v.strip() or None for k, v in cp["resources"].items()})
        if cp.has_section("options"):
            opts = cp["options"]
            if "case_fold" in opts:
                kwargs["case_fold"] = opts.getboolean("case_fold")
            if "variants" in opts:
                kwargs["variants"] = opts.getboolean("variants")
            kwargs["fault_injection"] = opts.get("fault_injection", "").strip() or None
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path) -> "PipelineConfig":
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except (OSError, UnicodeDecodeError) as exc:
            raise ResourceError(path, f"cannot read config: {exc}") from None
        try:
            return cls.parse(text, base_dir=str(path.parent))
        except (configparser.Error, ValueError) as exc:
            raise ResourceError(path, str(exc).splitlines()[0]) from None


@dataclass(frozen=True)
class ConfigIssue:
    step: str
    missing: str
    message: str

    def __str__(self) -> str:
        return self.message


class ConfigError(ValueError):
    def __init__(self, issues):
        self.issues = list(issues)
        super().__init__("; ".join(str(i) for i in self.issues))


class StepError(RuntimeError):
    """A document failed in one step; carries the step name and the cause."""

    def __init__(self, doc_id: str, step: str, cause: BaseException):
        self.doc_id = doc_id
        self.step = step
        self.cause = cause
        super().__init__(f"{doc_id}: step {step!r} failed: {type(cause).__name__}: {cause}")


class InjectedFault(RuntimeError):
    pass


def _check_steps(cfg: PipelineConfig) -> list:
    issues = []
    steps = cfg.steps
    for s in steps:
        if s not in PREREQUISITES:
            issues.append(ConfigIssue(s, "", f"unknown step {s!r}"))
    known = [s for s in steps if s in PREREQUISITES]
    if len(set(known)) != len(known):
        issues.append(ConfigIssue("", "", "a step is listed twice"))
    ranks = [STEP_ORDER.index(s) for s in known]
    if ranks != sorted(ranks):
        issues.append(ConfigIssue("", "", "steps must be listed in canonical order: " + ", ".join(STEP_ORDER)))
    enabled = set(known)
    if "tokenize" not in enabled:
        issues.append(ConfigIssue("document", "tokenize", "every document needs the tokenize step"))
    for s in STEP_ORDER:
        if s not in enabled:
            continue
        if s in NOT_IMPLEMENTED:
            issues.append(ConfigIssue(s, "", f"step {s!r} is reserved but not implemented"))
        for req in PREREQUISITES[s]:
            if req not in enabled:
                issues.append(ConfigIssue(s, req, f"{s} needs {req}"))
    if cfg.fault_injection:
        fstep, sep, marker = cfg.fault_injection.partition(":")
        if not sep or not marker or fstep not in STEP_ORDER + (LOAD, RENDER):
            issues.append(ConfigIssue("", "", f"fault_injection must be 'step:marker', got {cfg.fault_injection!r}"))
    return issues


def _load_resources(cfg: PipelineConfig) -> tuple:
    """Load every configured resource; returns (resources dict, issues)."""
    issues = []
    res = {"gazetteer": None, "lexicon": None, "terminology": None}
    loaders = {
        "gazetteer": lambda: Gazetteer.load(cfg.resource_path(cfg.gazetteer), case_fold=cfg.case_fold) if cfg.gazetteer else None,
        "lexicon": lambda: MorphLexicon.load(cfg.resource_path(cfg.lexicon), cfg.resource_path(cfg.suffix_rules)),
        "terminology": lambda: Terminology.load(cfg.resource_path(cfg.terminology), cfg.variants) if cfg.terminology else None,
    }
    for name, load in loaders.items():
        try:
            res[name] = load()
        except ResourceError as exc:
            issues.append(ConfigIssue("", "", f"resource {name}: {exc}"))
    return res, issues


def validate_config(cfg: PipelineConfig) -> list:
    """Every prerequisite and resource problem in ``cfg``; empty means usable."""
    issues = _check_steps(cfg)
    issues.extend(_load_resources(cfg)[1])
    return issues


@dataclass(frozen=True)
class Annotated:
    document: Document
    xml: bytes


class Pipeline:
    """A validated configuration with its resources loaded.

    ``overrides`` maps step names to ``Document -> Document`` callables, so an
    external tagger can stand in for a built-in step.
    """

    def __init__(self, cfg: PipelineConfig, gazetteer: Optional[Gazetteer] = None,
                 lexicon: Optional[MorphLexicon] = None, terminology: Optional[Terminology] = None,
                 parser: Optional[Parser] = None, overrides: Optional[Mapping[str, Callable]] = None):
        issues = _check_steps(cfg)
        if issues:
            raise ConfigError(issues)
        self.cfg = cfg
        self.steps = tuple(s for s in STEP_ORDER if s in cfg.steps)
        gazetteer = gazetteer if gazetteer is not None else Gazetteer(case_fold=cfg.case_fold)
        lexicon = lexicon if lexicon is not None else MorphLexicon.load()
        terminology = terminology if terminology is not None else Terminology(variants=cfg.variants)
        parser = parser if parser is not None else NullParser()
        self._impl = {
            "tokenize": tokenize_document,
            "ne": lambda d: tag_named_entities(d, gazetteer),
            "words": segment_words,
            "sentences": segment_sentences,
            "morpho": lambda d: pos_tag_and_lemmatize(d, lexicon),
            "terms": lambda d: tag_terms(d, terminology),
            "parse": lambda d: parse_document(d, parser),
        }
        self._impl.update(overrides or {})
        self._fault = None
        if cfg.fault_injection:
            fstep, _, marker = cfg.fault_injection.partition(":")
            self._fault = (fstep, marker)

    @classmethod
    def from_config(cls, cfg: PipelineConfig, **kwargs) -> "Pipeline":
        issues = _check_steps(cfg)
        res, res_issues = _load_resources(cfg)
        if issues or res_issues:
            raise ConfigError(issues + res_issues)
        return cls(cfg, **res, **kwargs)

    def _maybe_fail(self, step: str, text: str) -> None:
        if self._fault and self._fault[0] == step and self._fault[1] in text:
            raise InjectedFault(f"injected failure in {step}")

    def _load(self, doc_id: str, source: Union[str, bytes], fmt: str, meta) -> Document:
        if fmt == "xml":
            loaded = deserialize(source if isinstance(source, bytes) else source.encode("utf-8"))
            return Document(loaded.doc_id, loaded.text, meta={**loaded.meta, **(meta or {})})
        text = source.decode("utf-8") if isinstance(source, bytes) else source
        return Document(doc_id, text, meta=dict(meta or {}))

    def annotate(self, doc_id: str, source: Union[str, bytes], fmt: str = "text",
                 meta: Optional[Mapping[str, str]] = None) -> Annotated:
        """Run the configured steps and render XML.

        Raises :class:`StepError` naming the failing step; nothing is rendered
        for a failed document.
        """
        timings = []
        step = LOAD
        try:
            t0 = time.perf_counter()
            doc = self._load(doc_id, source, fmt, meta)
            self._maybe_fail(LOAD, doc.text)
            timings.append(TimingRecord(LOAD, time.perf_counter() - t0))
            for step in self.steps:
                t0 = time.perf_counter()
                self._maybe_fail(step, doc.text)
                doc = self._impl[step](doc)
                timings.append(TimingRecord(step, time.perf_counter() - t0))
            step = RENDER
            t0 = time.perf_counter()
            self._maybe_fail(RENDER, doc.text)
            violations = validate(doc)
            if violations:
                raise ValidationError(violations)
            body = "".join(render_body(doc))
            timings.append(TimingRecord(RENDER, time.perf_counter() - t0))
        except Exception as exc:
            raise StepError(doc_id, step, exc) from exc
        doc = doc.with_timings(timings)
        return Annotated(doc, (body + render_timings(timings)).encode("utf-8"))

    def run(self, doc_id: str, text: str) -> Document:
        return self.annotate(doc_id, text).document


def run_pipeline(doc_id: str, text: str, cfg: PipelineConfig, **kwargs) -> Document:
    return Pipeline.from_config(cfg, **kwargs).run(doc_id, text)


# --------------------------------------------------------------------------
# local corpus processing


def write_atomic(path, data: bytes) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


@dataclass
class DocResult:
    doc_id: str
    source: str
    ok: bool
    timings: tuple = ()
    output: Optional[str] = None
    xml: Optional[bytes] = None
    step: Optional[str] = None
    error: Optional[str] = None


@dataclass
class CorpusSummary:
    documents: int = 0
    succeeded: int = 0
    failed: int = 0
    wall_seconds: float = 0.0
    step_seconds: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)

    def line(self) -> str:
        return (f"{self.documents} documents, {self.succeeded} annotated, {self.failed} failed "
                f"in {self.wall_seconds:.2f}s")


def corpus_files(input_path) -> list:
    """Document files under ``input_path`` (a file or directory), sorted by name."""
    path = Path(input_path)
    if path.is_file():
        return [path]
    if not path.is_dir():
        raise FileNotFoundError(f"no such file or directory: {path}")
    return sorted(p for p in path.iterdir() if p.is_file() and not p.name.startswith("."))


def source_format(path: Path) -> str:
    return "xml" if path.suffix.lower() == ".xml" else "text"


def process_file(pipeline: Pipeline, path: Path, out_dir: Optional[Path]) -> DocResult:
    doc_id = path.stem
    try:
        data = path.read_bytes()
        annotated = pipeline.annotate(doc_id, data, source_format(path))
    except StepError as exc:
        return DocResult(doc_id, str(path), False, step=exc.step, error=f"{type(exc.cause).__name__}: {exc.cause}")
    except OSError as exc:
        return DocResult(doc_id, str(path), False, step=LOAD, error=str(exc))
    result = DocResult(doc_id, str(path), True, annotated.document.timings)
    if out_dir is None:
        result.xml = annotated.xml
    else:
        target = out_dir / f"{annotated.document.doc_id}.xml"
        write_atomic(target, annotated.xml)
        result.output = str(target)
    return result


_worker_pipeline: Optional[Pipeline] = None


def _init_worker(cfg: PipelineConfig) -> None:
    global _worker_pipeline
    _worker_pipeline = Pipeline.from_config(cfg)


def _work(path: Path, out_dir: Optional[Path]) -> DocResult:
    return process_file(_worker_pipeline, path, out_dir)


def run_corpus_local(input_path, cfg: PipelineConfig, jobs: int = 1, out_dir=None,
                     on_result: Optional[Callable[[DocResult], None]] = None) -> tuple:
    """Annotate every document under ``input_path``.

    Failures are recorded per document and never stop the run.  Returns
    ``(results, summary)``; results are in file-name order regardless of
    ``jobs``.
    """
    files = corpus_files(input_path)
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    pipeline = Pipeline.from_config(cfg)
    t0 = time.perf_counter()
    if jobs <= 1 or len(files) <= 1:
        results_iter = (process_file(pipeline, p, out) for p in files)
        results = _collect(results_iter, on_result)
    else:
        with ProcessPoolExecutor(max_workers=jobs, initializer=_init_worker, initargs=(cfg,)) as pool:
            results = _collect(pool.map(_work, files, [out] * len(files), chunksize=4), on_result)
    summary = summarize(results, time.perf_counter() - t0)
    return results, summary


def _collect(results: Iterable[DocResult], on_result) -> list:
    out = []
    for r in results:
        if not r.ok:
            log.warning("%s failed in %s: %s", r.doc_id, r.step, r.error)
        if on_result is not None:
            on_result(r)
        out.append(r)
    return out


def summarize(results: Iterable[DocResult], wall_seconds: float = 0.0) -> CorpusSummary:
    summary = CorpusSummary(wall_seconds=wall_seconds)
    for r in results:
        summary.documents += 1
        if r.ok:
            summary.succeeded += 1
            for t in r.timings:
                summary.step_seconds[t.step] = summary.step_seconds.get(t.step, 0.0) + t.wall_seconds
        else:
            summary.failed += 1
            summary.failures.append((r.doc_id, r.step, r.error))
    return summary


def with_steps(cfg: PipelineConfig, steps: Iterable[str]) -> PipelineConfig:
    return replace(cfg, steps=tuple(steps))
