"""Stand-off annotation data model, validation and XML serialization.

A :class:`Document` holds the raw text, the token segmentation that anchors
everything else, and a set of named layers whose annotations point at token
ids (or, for the morpho and link layers, at word ids).  Documents are frozen;
pipeline steps produce new documents with :meth:`Document.with_layer`.
"""
from __future__ import annotations

import base64
import bisect
import re
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, NamedTuple, Optional, Sequence, Union
from xml.etree import ElementTree as ET

ALPHABETICAL = "alphabetical"
NUMERICAL = "numerical"
SEPARATING = "separating"
SYMBOLIC = "symbolic"
TOKEN_KINDS = (ALPHABETICAL, NUMERICAL, SEPARATING, SYMBOLIC)

POS_TAGS = ("NOUN", "VERB", "ADJ", "ADV", "DET", "PREP", "CONJ", "PRON", "NUM", "PUNCT", "OTHER")
MORPHO_SOURCES = ("lexicon", "guesser", "fallback")

# Layer names, in serialization order.
NE = "ne"
WORDS = "words"
SENTENCES = "sentences"
MORPHO = "morpho"
TERMS = "terms"
LINKS = "links"
LAYER_ORDER = (NE, WORDS, SENTENCES, MORPHO, TERMS, LINKS)
SPAN_LAYERS = (NE, WORDS, SENTENCES, TERMS)

# Violation classes reported by validate().
TOKEN_ID = "token id"
TOKEN_SPAN = "token span"
TOKEN_CONTIGUITY = "token contiguity"
TOKEN_COVERAGE = "token coverage"
TOKEN_SURFACE = "token surface"
TOKEN_KIND = "token kind"
TEXT_ENCODING = "text encoding"
ANNOTATION_ID = "annotation id"
SPAN_RANGE = "span range"
SPAN_BOUNDS = "span bounds"
LAYER_OVERLAP = "layer overlap"
LAYER_PAYLOAD = "layer payload"
WORD_SEPARATOR = "word separator"
WORD_IN_SENTENCE = "word in sentence"
NE_TERM_OVERLAP = "ne/term overlap"
MORPHO_REFERENCE = "morpho reference"
MORPHO_TOTALITY = "morpho totality"
MORPHO_VALUE = "morpho value"
LINK_REFERENCE = "link reference"
TIMING_VALUE = "timing value"
UNKNOWN_LAYER = "unknown layer"


@dataclass(frozen=True)
class Token:
    id: int
    kind: str
    start: int
    end: int
    surface: str


@dataclass(frozen=True)
class Span:
    """An annotation covering tokens ``first_token..last_token`` inclusive.

    ``label`` is the semantic type for named entities and the canonical form
    for terms.  Terms also carry the terminology ``entry`` id and ``head``, the
    offset of the head word inside the term.
    """

    id: int
    first_token: int
    last_token: int
    label: Optional[str] = None
    entry: Optional[str] = None
    head: Optional[int] = None


@dataclass(frozen=True)
class Morpho:
    word_id: int
    pos: str
    lemma: Optional[str]
    source: str


@dataclass(frozen=True)
class Link:
    """Dependency link between two words (document word ids)."""

    id: int
    head: int
    dependent: int
    label: str


@dataclass(frozen=True)
class TimingRecord:
    step: str
    wall_seconds: float


Annotation = Union[Span, Morpho, Link]


@dataclass(frozen=True)
class Document:
    doc_id: str
    text: str
    tokens: tuple = ()
    layers: Mapping[str, tuple] = field(default_factory=dict)
    timings: tuple = ()
    meta: Mapping[str, str] = field(default_factory=dict)

    def layer(self, name: str) -> tuple:
        return self.layers.get(name, ())

    def has_layer(self, name: str) -> bool:
        return name in self.layers

    def with_layer(self, name: str, annotations: Iterable[Annotation]) -> "Document":
        layers = dict(self.layers)
        layers[name] = tuple(annotations)
        return replace(self, layers=layers)

    def with_tokens(self, tokens: Iterable[Token]) -> "Document":
        return replace(self, tokens=tuple(tokens))

    def with_timings(self, timings: Iterable[TimingRecord]) -> "Document":
        return replace(self, timings=tuple(timings))

    def without_timings(self) -> "Document":
        return replace(self, timings=())

    def span_text(self, span: Span) -> str:
        return self.text[self.tokens[span.first_token].start:self.tokens[span.last_token].end]


class Violation(NamedTuple):
    rule: str
    layer: str
    annotation_id: Optional[int]
    message: str

    def __str__(self) -> str:
        where = self.layer if self.annotation_id is None else f"{self.layer}#{self.annotation_id}"
        return f"{self.rule} [{where}]: {self.message}"


class ValidationError(ValueError):
    """Raised when a document breaks the model invariants."""

    def __init__(self, violations: Sequence[Violation]):
        self.violations = list(violations)
        head = "; ".join(str(v) for v in self.violations[:3])
        more = f" (+{len(self.violations) - 3} more)" if len(self.violations) > 3 else ""
        super().__init__(f"invalid document: {head}{more}")


class DocumentParseError(ValueError):
    """Malformed XML, with the expat position when available."""

    def __init__(self, message: str, position: Optional[tuple] = None):
        self.position = position
        if position is not None:
            message = f"{message} (line {position[0]}, column {position[1]})"
        super().__init__(message)


class SchemaError(ValueError):
    """Well-formed XML that does not follow the document schema."""


class PreconditionError(ValueError):
    """A processing step was called on a document lacking a required layer."""


class ResourceError(ValueError):
    """A resource file could not be read or has a malformed line."""

    def __init__(self, path, message: str, line: Optional[int] = None):
        self.path = str(path)
        self.line = line
        where = self.path if line is None else f"{self.path}:{line}"
        super().__init__(f"{where}: {message}")


def read_tsv(path, min_fields: int, max_fields: int):
    """Yield ``(line_number, fields)`` for a tab-separated resource file.

    Blank lines and lines starting with ``#`` are skipped.
    """
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except (OSError, UnicodeDecodeError) as exc:
        raise ResourceError(path, f"cannot read: {exc}") from None
    for lineno, line in enumerate(lines, 1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        fields = line.split("\t")
        if not min_fields <= len(fields) <= max_fields:
            raise ResourceError(path, f"expected {min_fields}-{max_fields} tab-separated fields, got {len(fields)}", lineno)
        yield lineno, fields


def kind_matches(kind: str, surface: str) -> bool:
    if kind == ALPHABETICAL:
        return surface.isalpha()
    if kind == NUMERICAL:
        return surface.isdecimal()
    if kind == SEPARATING:
        return surface.isspace()
    if kind == SYMBOLIC:
        return len(surface) == 1 and not (surface.isalpha() or surface.isdecimal() or surface.isspace())
    return False


# --------------------------------------------------------------------------
# validation


def _has_surrogate(text: str) -> bool:
    return any(0xD800 <= ord(ch) <= 0xDFFF for ch in text)


def _validate_tokens(doc: Document, out: list) -> None:
    text = doc.text
    if _has_surrogate(text):
        out.append(Violation(TEXT_ENCODING, "text", None, "text contains surrogate code points"))
    tokens = doc.tokens
    if not tokens:
        if text:
            out.append(Violation(TOKEN_COVERAGE, "tokens", None, "non-empty text has no tokens"))
        return
    bad = set()
    for i, tok in enumerate(tokens):
        if tok.id != i:
            out.append(Violation(TOKEN_ID, "tokens", tok.id, f"token at position {i} has id {tok.id}"))
        if not tok.start < tok.end:
            out.append(Violation(TOKEN_SPAN, "tokens", tok.id, f"empty or reversed span {tok.start}..{tok.end}"))
            bad.add(i)
            continue
        if tok.surface != text[tok.start:tok.end]:
            out.append(Violation(TOKEN_SURFACE, "tokens", tok.id, "surface differs from text slice"))
        elif not kind_matches(tok.kind, tok.surface):
            out.append(Violation(TOKEN_KIND, "tokens", tok.id, f"{tok.kind!r} inconsistent with {tok.surface!r}"))
    # neighbours of a token with a broken span are only reported through it
    if tokens[0].start != 0 and 0 not in bad:
        out.append(Violation(TOKEN_CONTIGUITY, "tokens", tokens[0].id, "first token does not start at 0"))
    for i in range(1, len(tokens)):
        prev, tok = tokens[i - 1], tokens[i]
        if prev.end != tok.start and i not in bad and i - 1 not in bad:
            out.append(Violation(TOKEN_CONTIGUITY, "tokens", tok.id,
                                 f"starts at {tok.start}, previous ends at {prev.end}"))
    if tokens[-1].end != len(text) and len(tokens) - 1 not in bad:
        out.append(Violation(TOKEN_COVERAGE, "tokens", tokens[-1].id,
                             f"last token ends at {tokens[-1].end}, text length {len(text)}"))


def _validate_spans(doc: Document, name: str, spans: tuple, out: list) -> list:
    """Check one span layer; returns the spans that are safe to use further."""
    n = len(doc.tokens)
    good = []
    prev = None
    for i, span in enumerate(spans):
        if not isinstance(span, Span):
            out.append(Violation(LAYER_PAYLOAD, name, i, f"expected a span, got {type(span).__name__}"))
            continue
        if span.id != i:
            out.append(Violation(ANNOTATION_ID, name, span.id, f"annotation at position {i} has id {span.id}"))
        if not (0 <= span.first_token < n and 0 <= span.last_token < n):
            out.append(Violation(SPAN_BOUNDS, name, span.id,
                                 f"token range {span.first_token}..{span.last_token} outside 0..{n - 1}"))
            continue
        if span.first_token > span.last_token:
            out.append(Violation(SPAN_RANGE, name, span.id,
                                 f"first token {span.first_token} after last token {span.last_token}"))
            continue
        if prev is not None and span.first_token <= prev.last_token:
            out.append(Violation(LAYER_OVERLAP, name, span.id,
                                 f"overlaps or precedes annotation {prev.id}"))
        prev = span
        good.append(span)
        if name == NE and not span.label:
            out.append(Violation(LAYER_PAYLOAD, name, span.id, "named entity without a type"))
        elif name == TERMS:
            if not span.label or not span.entry:
                out.append(Violation(LAYER_PAYLOAD, name, span.id, "term without canonical form or entry"))
            elif span.head is None or span.head < 0:
                out.append(Violation(LAYER_PAYLOAD, name, span.id, "term without a head offset"))
        elif name in (WORDS, SENTENCES) and (span.label or span.entry or span.head is not None):
            out.append(Violation(LAYER_PAYLOAD, name, span.id, "unexpected payload"))
    return good


def _owners(n_tokens: int, spans: list) -> list:
    """Per token: id of the single covering span, -1 if none, -2 if several."""
    owner = [-1] * n_tokens
    for s in spans:
        for t in range(s.first_token, s.last_token + 1):
            owner[t] = s.id if owner[t] == -1 else -2
    return owner


def validate(doc: Document) -> list:
    """Return every invariant violation in ``doc``; an empty list means valid."""
    out: list = []
    _validate_tokens(doc, out)
    spans = {}
    for name, annotations in doc.layers.items():
        if name not in LAYER_ORDER:
            out.append(Violation(UNKNOWN_LAYER, name, None, f"unknown layer {name!r}"))
        elif name in SPAN_LAYERS:
            spans[name] = _validate_spans(doc, name, annotations, out)

    tokens = doc.tokens
    words = spans.get(WORDS, [])
    for w in words:
        if any(tokens[t].kind == SEPARATING for t in range(w.first_token, w.last_token + 1)):
            out.append(Violation(WORD_SEPARATOR, WORDS, w.id, "word contains a separating token"))
    if WORDS in spans and SENTENCES in spans:
        owner = _owners(len(tokens), spans[SENTENCES])
        for w in words:
            if owner[w.first_token] < 0 or owner[w.first_token] != owner[w.last_token]:
                out.append(Violation(WORD_IN_SENTENCE, WORDS, w.id, "word not inside exactly one sentence"))
    if NE in spans and TERMS in spans:
        covered = [0]
        for marked in _owners(len(tokens), spans[NE]):
            covered.append(covered[-1] + (marked != -1))
        for t in spans[TERMS]:
            if covered[t.last_token + 1] - covered[t.first_token]:
                out.append(Violation(NE_TERM_OVERLAP, TERMS, t.id, "overlaps a named entity"))
    if TERMS in spans and WORDS in spans:
        firsts = [w.first_token for w in words]
        for t in spans[TERMS]:
            lo = bisect.bisect_left(firsts, t.first_token)
            hi = lo
            while hi < len(words) and words[hi].last_token <= t.last_token:
                hi += 1
            if t.head is not None and t.head >= hi - lo:
                out.append(Violation(LAYER_PAYLOAD, TERMS, t.id, f"head offset {t.head} beyond its {hi - lo} words"))

    if MORPHO in doc.layers:
        _validate_morpho(doc, out)
    if LINKS in doc.layers:
        n_words = len(doc.layer(WORDS))
        for i, link in enumerate(doc.layer(LINKS)):
            if not isinstance(link, Link):
                out.append(Violation(LAYER_PAYLOAD, LINKS, i, "expected a link"))
            elif link.id != i:
                out.append(Violation(ANNOTATION_ID, LINKS, link.id, f"link at position {i} has id {link.id}"))
            elif not (0 <= link.head < n_words and 0 <= link.dependent < n_words):
                out.append(Violation(LINK_REFERENCE, LINKS, link.id, "link references an unknown word"))

    for i, timing in enumerate(doc.timings):
        if not timing.step or not timing.wall_seconds >= 0:
            out.append(Violation(TIMING_VALUE, "timings", i, f"bad timing {timing.step!r}={timing.wall_seconds!r}"))
    return out


def _validate_morpho(doc: Document, out: list) -> None:
    n_words = len(doc.layer(WORDS))
    seen = set()
    last = -1
    for i, m in enumerate(doc.layer(MORPHO)):
        if not isinstance(m, Morpho):
            out.append(Violation(LAYER_PAYLOAD, MORPHO, i, "expected a morpho annotation"))
            continue
        if not 0 <= m.word_id < n_words:
            out.append(Violation(MORPHO_REFERENCE, MORPHO, m.word_id, "references an unknown word"))
            continue
        if m.word_id <= last:
            out.append(Violation(MORPHO_REFERENCE, MORPHO, m.word_id, "duplicate or out-of-order word reference"))
        seen.add(m.word_id)
        last = max(last, m.word_id)
        if m.pos not in POS_TAGS or m.source not in MORPHO_SOURCES or m.lemma == "":
            out.append(Violation(MORPHO_VALUE, MORPHO, m.word_id, f"bad values pos={m.pos!r} source={m.source!r}"))
    if len(seen) != n_words:
        out.append(Violation(MORPHO_TOTALITY, MORPHO, None, f"{len(seen)} morpho annotations for {n_words} words"))


# --------------------------------------------------------------------------
# XML


_XML_ILLEGAL = re.compile("[\x00-\x08\x0b\x0c\x0e-\x1f\ufffe\uffff]")


def _esc(value: str) -> str:
    return (value.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
            .replace('"', "&quot;").replace("\r", "&#13;").replace("\n", "&#10;").replace("\t", "&#9;"))


def _esc_text(value: str) -> str:
    return value.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;").replace("\r", "&#13;")


def _attrs(pairs) -> str:
    for _, v in pairs:
        if isinstance(v, str) and (_XML_ILLEGAL.search(v) or _has_surrogate(v)):
            raise ValueError(f"attribute value {v!r} cannot be represented in XML")
    return "".join(f' {k}="{_esc(str(v))}"' for k, v in pairs if v is not None)


def _span_element(tag: str, span: Span) -> str:
    return f"<{tag}{_attrs([('id', span.id), ('first', span.first_token), ('last', span.last_token), ('type' if tag == 'ne' else 'canonical', span.label), ('entry', span.entry), ('head', span.head)])}/>"


_SPAN_TAGS = {NE: "ne", WORDS: "word", SENTENCES: "sentence", TERMS: "term"}


def render_body(doc: Document) -> list:
    """XML fragments for everything except the timings element."""
    parts = ['<?xml version="1.0" encoding="UTF-8"?>\n', f"<document{_attrs([('id', doc.doc_id)])}>\n"]
    if _XML_ILLEGAL.search(doc.text) or _has_surrogate(doc.text):
        b64 = base64.b64encode(doc.text.encode("utf-8", "surrogatepass")).decode("ascii")
        parts.append(f'  <text encoding="base64">{b64}</text>\n')
    else:
        parts.append(f"  <text>{_esc_text(doc.text)}</text>\n")
    parts.append("  <tokens>\n")
    for t in doc.tokens:
        parts.append(f"    <token{_attrs([('id', t.id), ('kind', t.kind), ('start', t.start), ('end', t.end)])}/>\n")
    parts.append("  </tokens>\n")
    for name in LAYER_ORDER:
        if name not in doc.layers:
            continue
        parts.append(f'  <layer name="{name}">\n')
        for a in doc.layers[name]:
            if name == MORPHO:
                parts.append(f"    <morpho{_attrs([('word', a.word_id), ('pos', a.pos), ('lemma', a.lemma), ('source', a.source)])}/>\n")
            elif name == LINKS:
                parts.append(f"    <link{_attrs([('id', a.id), ('head', a.head), ('dependent', a.dependent), ('label', a.label)])}/>\n")
            else:
                parts.append(f"    {_span_element(_SPAN_TAGS[name], a)}\n")
        parts.append("  </layer>\n")
    if doc.meta:
        parts.append("  <meta>\n")
        for key in sorted(doc.meta):
            parts.append(f"    <entry{_attrs([('key', key), ('value', doc.meta[key])])}/>\n")
        parts.append("  </meta>\n")
    return parts


def render_timings(timings: Iterable[TimingRecord]) -> str:
    rows = "".join(f"    <timing{_attrs([('step', t.step), ('seconds', repr(float(t.wall_seconds)))])}/>\n"
                   for t in timings)
    return f"  <timings>\n{rows}  </timings>\n</document>\n"


def serialize(doc: Document) -> bytes:
    """Render a valid document as deterministic UTF-8 XML.

    Raises :class:`ValidationError` if the document is not valid.
    """
    violations = validate(doc)
    if violations:
        raise ValidationError(violations)
    return ("".join(render_body(doc)) + render_timings(doc.timings)).encode("utf-8")


_TIMINGS_RE = re.compile(rb"  <timings>\n.*?  </timings>\n", re.S)


def strip_timings(xml: bytes) -> bytes:
    """Drop the timings element so outputs of different runs can be compared."""
    return _TIMINGS_RE.sub(b"", xml)


def _int(el, name: str, required: bool = True) -> Optional[int]:
    raw = el.get(name)
    if raw is None:
        if required:
            raise SchemaError(f"<{el.tag}> missing attribute {name!r}")
        return None
    try:
        return int(raw)
    except ValueError:
        raise SchemaError(f"<{el.tag}> attribute {name}={raw!r} is not an integer") from None


def _req(el, name: str) -> str:
    raw = el.get(name)
    if raw is None:
        raise SchemaError(f"<{el.tag}> missing attribute {name!r}")
    return raw


def deserialize(data: bytes) -> Document:
    """Parse platform XML back into a validated :class:`Document`."""
    try:
        root = ET.fromstring(data)
    except ET.ParseError as exc:
        raise DocumentParseError(f"malformed XML: {exc.msg if hasattr(exc, 'msg') else exc}",
                                 getattr(exc, "position", None)) from None
    if root.tag != "document":
        raise SchemaError(f"root element is <{root.tag}>, expected <document>")
    doc_id = _req(root, "id")

    text_el = root.find("text")
    if text_el is None:
        raise SchemaError("missing <text>")
    text = text_el.text or ""
    if text_el.get("encoding") == "base64":
        text = base64.b64decode(text).decode("utf-8", "surrogatepass")
    elif text_el.get("encoding") is not None:
        raise SchemaError(f"unknown text encoding {text_el.get('encoding')!r}")

    tokens_el = root.find("tokens")
    if tokens_el is None:
        raise SchemaError("missing <tokens>")
    tokens = []
    for el in tokens_el:
        if el.tag != "token":
            raise SchemaError(f"unexpected <{el.tag}> in <tokens>")
        start, end = _int(el, "start"), _int(el, "end")
        kind = _req(el, "kind")
        if kind not in TOKEN_KINDS:
            raise SchemaError(f"unknown token kind {kind!r}")
        tokens.append(Token(_int(el, "id"), kind, start, end, text[start:end] if 0 <= start <= end else ""))

    layers = {}
    for layer_el in root.findall("layer"):
        name = _req(layer_el, "name")
        if name not in LAYER_ORDER:
            raise SchemaError(f"unknown layer {name!r}")
        if name in layers:
            raise SchemaError(f"duplicate layer {name!r}")
        items = []
        for el in layer_el:
            if name == MORPHO:
                if el.tag != "morpho":
                    raise SchemaError(f"unexpected <{el.tag}> in layer {name!r}")
                items.append(Morpho(_int(el, "word"), _req(el, "pos"), el.get("lemma"), _req(el, "source")))
            elif name == LINKS:
                if el.tag != "link":
                    raise SchemaError(f"unexpected <{el.tag}> in layer {name!r}")
                items.append(Link(_int(el, "id"), _int(el, "head"), _int(el, "dependent"), _req(el, "label")))
            else:
                if el.tag != _SPAN_TAGS[name]:
                    raise SchemaError(f"unexpected <{el.tag}> in layer {name!r}")
                label = el.get("type") if name == NE else el.get("canonical")
                items.append(Span(_int(el, "id"), _int(el, "first"), _int(el, "last"), label,
                                  el.get("entry"), _int(el, "head", required=False)))
        layers[name] = tuple(items)

    timings = []
    timings_el = root.find("timings")
    if timings_el is not None:
        for el in timings_el:
            try:
                seconds = float(_req(el, "seconds"))
            except ValueError:
                raise SchemaError(f"bad timing value {el.get('seconds')!r}") from None
            timings.append(TimingRecord(_req(el, "step"), seconds))

    meta = {}
    meta_el = root.find("meta")
    if meta_el is not None:
        for el in meta_el:
            meta[_req(el, "key")] = _req(el, "value")

    doc = Document(doc_id, text, tuple(tokens), layers, tuple(timings), meta)
    violations = validate(doc)
    if violations:
        raise ValidationError(violations)
    return doc
