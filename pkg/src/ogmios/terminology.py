"""Terminology tagging, variant normalization and term simplification.

Terms are matched on lemma sequences (lowercased surface where a word has no
lemma).  Before parsing, each term occurrence can be reduced to its head word;
after parsing, the arcs are mapped back to the full sentence and the
term-internal structure (every modifier attached to the head) is appended.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Optional, Protocol, Sequence

from .model import (LINKS, MORPHO, NE, SENTENCES, TERMS, WORDS, Document, Link, PreconditionError,
                    ResourceError, Span, read_tsv)

_END = None
OF = "of"
MODIFIER = "MOD"


@dataclass(frozen=True)
class TermPattern:
    lemmas: tuple
    head: int


@dataclass(frozen=True)
class TermEntry:
    entry_id: str
    canonical: str
    patterns: tuple

    def all_patterns(self, variants: bool = True) -> list:
        out = list(self.patterns)
        if variants:
            for p in self.patterns:
                v = of_variant(p)
                if v is not None and v not in out:
                    out.append(v)
        return out


def of_variant(pattern: TermPattern) -> Optional[TermPattern]:
    """"N1 N2" -> "N2 of N1" (head-final patterns of two or more words)."""
    if len(pattern.lemmas) < 2 or pattern.head != len(pattern.lemmas) - 1 or OF in pattern.lemmas:
        return None
    head = pattern.lemmas[-1]
    return TermPattern((head, OF) + pattern.lemmas[:-1], 0)


def _split(text: str) -> tuple:
    return tuple(text.lower().split())


class Terminology:
    """Term entries indexed by a trie over lemma sequences.

    Explicit patterns take precedence over generated "of" variants; among
    identical patterns the first-listed entry wins.
    """

    def __init__(self, entries: Iterable[TermEntry] = (), variants: bool = True):
        self.variants = variants
        self.entries = {}
        for e in entries:
            self._register(e)
        self._build()

    def _register(self, entry: TermEntry) -> None:
        for p in entry.patterns:
            if not p.lemmas:
                raise ValueError(f"entry {entry.entry_id!r} has an empty pattern")
            if not 0 <= p.head < len(p.lemmas):
                raise ValueError(f"entry {entry.entry_id!r}: head index {p.head} outside pattern {' '.join(p.lemmas)!r}")
        old = self.entries.get(entry.entry_id)
        if old is not None:
            if old.canonical != entry.canonical:
                raise ValueError(f"entry {entry.entry_id!r} has two canonical forms")
            entry = TermEntry(entry.entry_id, old.canonical, old.patterns + entry.patterns)
        self.entries[entry.entry_id] = entry

    def _build(self) -> None:
        self._trie: dict = {}
        explicit = [(e, p) for e in self.entries.values() for p in e.patterns]
        generated = []
        if self.variants:
            for e in self.entries.values():
                for p in e.all_patterns(True)[len(e.patterns):]:
                    generated.append((e, p))
        for entry, pattern in explicit + generated:
            node = self._trie
            for lemma in pattern.lemmas:
                node = node.setdefault(lemma, {})
            node.setdefault(_END, (entry, pattern))

    def add(self, entry_id: str, canonical: str, pattern: Optional[str] = None, head: Optional[int] = None) -> None:
        lemmas = _split(pattern if pattern else canonical)
        canon = " ".join(_split(canonical))
        self._register(TermEntry(entry_id, canon, (TermPattern(lemmas, len(lemmas) - 1 if head is None else head),)))
        self._build()

    def __len__(self) -> int:
        return len(self.entries)

    def matches_at(self, keys: Sequence, i: int):
        """Yield ``(last index, entry, pattern)`` for patterns matching from ``i``."""
        node = self._trie
        for j in range(i, len(keys)):
            if keys[j] is None:
                return
            node = node.get(keys[j])
            if node is None:
                return
            if _END in node:
                yield (j,) + node[_END]

    @classmethod
    def load(cls, path, variants: bool = True) -> "Terminology":
        """Read ``entry_id<TAB>canonical<TAB>pattern<TAB>head_index`` lines.

        ``pattern`` defaults to the canonical form and ``head_index`` (0-based)
        to the last word.  Repeating an entry id adds patterns to that entry.
        """
        term = cls(variants=variants)
        for lineno, fields in read_tsv(path, 2, 4):
            fields = [f.strip() for f in fields] + [""] * (4 - len(fields))
            entry_id, canonical, pattern, head = fields
            if not entry_id or not canonical:
                raise ResourceError(path, "entry id and canonical form are required", lineno)
            if head and not head.lstrip("-").isdigit():
                raise ResourceError(path, f"head index {head!r} is not an integer", lineno)
            lemmas = _split(pattern or canonical)
            try:
                term._register(TermEntry(entry_id, " ".join(_split(canonical)),
                                         (TermPattern(lemmas, int(head) if head else len(lemmas) - 1),)))
            except ValueError as exc:
                raise ResourceError(path, str(exc), lineno) from None
        term._build()
        return term


def word_keys(doc: Document) -> list:
    """Matching key per word: lemma, else lowercased surface; None inside NEs."""
    in_ne = set()
    for s in doc.layer(NE):
        in_ne.update(range(s.first_token, s.last_token + 1))
    keys = []
    for word, m in zip(doc.layer(WORDS), doc.layer(MORPHO)):
        if word.first_token in in_ne:
            keys.append(None)
        else:
            keys.append((m.lemma or doc.span_text(word)).lower())
    return keys


def sentence_word_ranges(doc: Document) -> list:
    """``(first word index, last word index)`` for each sentence (whole doc if unsegmented)."""
    words = doc.layer(WORDS)
    if not words:
        return []
    if not doc.has_layer(SENTENCES):
        return [(0, len(words) - 1)]
    ranges = []
    k = 0
    for s in doc.layer(SENTENCES):
        while k < len(words) and words[k].first_token < s.first_token:
            k += 1
        first = k
        while k < len(words) and words[k].last_token <= s.last_token:
            k += 1
        if k > first:
            ranges.append((first, k - 1))
    return ranges


def find_terms(keys: Sequence, term: Terminology, lo: int = 0, hi: Optional[int] = None) -> list:
    """Leftmost-longest matches in ``keys[lo:hi]`` as ``(first, last, entry, pattern)``."""
    hi = len(keys) if hi is None else hi
    window = keys[lo:hi]
    found = []
    i = 0
    while i < len(window):
        best = None
        for j, entry, pattern in term.matches_at(window, i):
            best = (j, entry, pattern)
        if best is None:
            i += 1
            continue
        found.append((lo + i, lo + best[0], best[1], best[2]))
        i = best[0] + 1
    return found


def tag_terms(doc: Document, term: Terminology) -> Document:
    missing = [name for name in (WORDS, MORPHO, NE) if not doc.has_layer(name)]
    if missing:
        raise PreconditionError(f"term tagging needs the {', '.join(missing)} layer(s)")
    words = doc.layer(WORDS)
    keys = word_keys(doc)
    spans = []
    for lo, hi in sentence_word_ranges(doc):
        for first, last, entry, pattern in find_terms(keys, term, lo, hi + 1):
            spans.append(Span(len(spans), words[first].first_token, words[last].last_token,
                              entry.canonical, entry.entry_id, pattern.head))
    return doc.with_layer(TERMS, spans)


def normalize_term(matched: Sequence[str], entry: TermEntry, variants: bool = True) -> str:
    """Canonical form of ``entry`` for a matched lemma sequence.

    Raises ValueError if ``matched`` is not one of the entry's patterns.
    """
    key = tuple(w.lower() for w in matched)
    if key == _split(entry.canonical) or any(key == p.lemmas for p in entry.all_patterns(variants)):
        return entry.canonical
    raise ValueError(f"{' '.join(matched)!r} is not a form of term {entry.entry_id!r}")


def canonical_frequencies(docs: Iterable[Document]) -> Counter:
    return Counter(t.label for doc in docs for t in doc.layer(TERMS))


# --------------------------------------------------------------------------
# simplification for parsing


class Arc(NamedTuple):
    head: int
    dependent: int
    label: str


@dataclass(frozen=True)
class TermReduction:
    """One term reduced to its head; positions are sentence-local word indexes."""

    term_id: int
    first: int
    last: int
    head: int
    arcs: tuple

    @property
    def elided(self) -> int:
        return self.last - self.first


@dataclass(frozen=True)
class SimplificationMap:
    n_original: int
    kept: tuple  # original position of each reduced word
    reductions: tuple


class IntegrityError(ValueError):
    """Parse arcs do not fit the simplification map they are applied with."""


def simplify_terms(words: Sequence[Span], terms: Sequence[Span]) -> tuple:
    """Replace every term in a sentence by its head word.

    ``words`` are the sentence's word spans in order; ``terms`` may be the whole
    term layer, only terms lying inside the sentence are used.  Returns the
    reduced word list and the map needed by :func:`reattach_term_structure`.
    """
    if not words:
        return [], SimplificationMap(0, (), ())
    lo, hi = words[0].first_token, words[-1].last_token
    pos_of_first = {w.first_token: i for i, w in enumerate(words)}
    pos_of_last = {w.last_token: i for i, w in enumerate(words)}
    reductions = []
    for t in terms:
        if t.first_token < lo or t.last_token > hi:
            continue
        a, b = pos_of_first.get(t.first_token), pos_of_last.get(t.last_token)
        if a is None or b is None:
            raise IntegrityError(f"term {t.id} does not start and end on word boundaries")
        if t.head is None or not 0 <= t.head <= b - a:
            raise IntegrityError(f"term {t.id} has no usable head offset")
        h = a + t.head
        arcs = tuple(Arc(h, m, MODIFIER) for m in range(a, b + 1) if m != h)
        reductions.append(TermReduction(t.id, a, b, h, arcs))
    reductions.sort(key=lambda r: r.first)
    kept = []
    k = 0
    for r in reductions:
        if r.first < k:
            raise IntegrityError(f"term {r.term_id} overlaps another term")
        kept.extend(range(k, r.first))
        kept.append(r.head)
        k = r.last + 1
    kept.extend(range(k, len(words)))
    return [words[i] for i in kept], SimplificationMap(len(words), tuple(kept), tuple(reductions))


def reattach_term_structure(arcs: Sequence[Arc], smap: SimplificationMap) -> list:
    """Map arcs over reduced positions back to original positions and append
    the term-internal arcs."""
    out = []
    n = len(smap.kept)
    for arc in arcs:
        if not (0 <= arc.head < n and 0 <= arc.dependent < n):
            raise IntegrityError(f"arc {arc} references a position outside the {n} reduced words")
        out.append(Arc(smap.kept[arc.head], smap.kept[arc.dependent], arc.label))
    for r in smap.reductions:
        out.extend(r.arcs)
    return out


class Parser(Protocol):
    def parse(self, words: Sequence[str]) -> Sequence[Arc]: ...


class NullParser:
    """Stand-in parser that finds no links."""

    def parse(self, words: Sequence[str]) -> list:
        return []


def parse_document(doc: Document, parser: Parser) -> Document:
    """Parse each sentence in its simplified form and store the re-expanded
    arcs as the link layer (document word ids)."""
    missing = [name for name in (WORDS, SENTENCES, TERMS) if not doc.has_layer(name)]
    if missing:
        raise PreconditionError(f"parsing needs the {', '.join(missing)} layer(s)")
    words = doc.layer(WORDS)
    terms = doc.layer(TERMS)
    links = []
    t = 0
    for lo, hi in sentence_word_ranges(doc):
        sentence = words[lo:hi + 1]
        inside = []
        while t < len(terms) and terms[t].first_token <= sentence[-1].last_token:
            inside.append(terms[t])
            t += 1
        reduced, smap = simplify_terms(sentence, inside)
        arcs = parser.parse([doc.span_text(w) for w in reduced])
        for arc in reattach_term_structure(arcs, smap):
            links.append(Link(len(links), lo + arc.head, lo + arc.dependent, arc.label))
    return doc.with_layer(LINKS, links)
