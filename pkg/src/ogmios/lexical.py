"""Named entities, word and sentence segmentation, POS tags and lemmas.

The steps run in a fixed order: entities are found on raw tokens first, so
that an abbreviation dot inside a name ("B. subtilis") is already claimed when
sentence boundaries are decided.
"""
from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from typing import Iterable, Mapping, Optional, Sequence

from .model import (ALPHABETICAL, MORPHO, NE, NUMERICAL, POS_TAGS, SENTENCES, SEPARATING, SYMBOLIC,
                    WORDS, Document, Morpho, PreconditionError, ResourceError, Span, read_tsv)
from .tokenizer import tokenize

ALNUM = (ALPHABETICAL, NUMERICAL)

# Segmentation rule table.
INTRA_WORD = frozenset("-‐‑'’")
DECIMAL_MARKS = frozenset(".,")
TERMINAL = frozenset(".!?")
CLOSERS = frozenset("\"')]}’”»")
OPENERS = frozenset("\"'([{‘“«")

_END = ""  # trie terminal key; no token has an empty surface
_SEP = " "  # any run of whitespace inside an entry


class Gazetteer:
    """Dictionary of multi-token surface forms mapped to semantic types.

    Entries are tokenized with the platform tokenizer and stored in a trie over
    token surfaces, so matching never cuts through a token.  Any whitespace run
    in an entry matches any whitespace run in the text.
    """

    def __init__(self, entries: Iterable[tuple] = (), case_fold: bool = False):
        self.case_fold = case_fold
        self.entries = []
        self._trie: dict = {}
        for surface, label in entries:
            self.add(surface, label)

    def _norm(self, surface: str) -> str:
        return surface.casefold() if self.case_fold else surface

    def add(self, surface: str, label: str) -> None:
        key = tuple(_SEP if t.kind == SEPARATING else self._norm(t.surface) for t in tokenize(surface.strip()))
        if not key:
            raise ValueError("empty gazetteer entry")
        if not label:
            raise ValueError(f"gazetteer entry {surface!r} has no type")
        node = self._trie
        for part in key:
            node = node.setdefault(part, {})
        node.setdefault(_END, label)  # first-listed entry wins
        self.entries.append((surface.strip(), label))

    def __len__(self) -> int:
        return len(self.entries)

    def matches_at(self, tokens: Sequence, i: int):
        """Yield ``(last_token, label)`` for every entry matching from token ``i``."""
        node = self._trie
        for j in range(i, len(tokens)):
            tok = tokens[j]
            node = node.get(_SEP if tok.kind == SEPARATING else self._norm(tok.surface))
            if node is None:
                return
            if _END in node:
                yield j, node[_END]

    @classmethod
    def load(cls, path, case_fold: bool = False) -> "Gazetteer":
        gaz = cls(case_fold=case_fold)
        for lineno, (surface, label) in read_tsv(path, 2, 2):
            try:
                gaz.add(surface, label.strip())
            except ValueError as exc:
                raise ResourceError(path, str(exc), lineno) from None
        return gaz


def _glued(tokens: Sequence, a: int, b: int) -> bool:
    """True when tokens a and b are adjacent letters/digits (same word)."""
    return 0 <= a < len(tokens) and 0 <= b < len(tokens) and tokens[a].kind in ALNUM and tokens[b].kind in ALNUM


def find_entities(tokens: Sequence, gaz: Gazetteer) -> list:
    """Leftmost-longest, non-overlapping gazetteer matches as NE spans.

    A match must not start or end inside a letter/digit run ("p" in "p53").
    """
    spans = []
    i = 0
    n = len(tokens)
    while i < n:
        best = None
        if tokens[i].kind != SEPARATING and not _glued(tokens, i - 1, i):
            for j, label in gaz.matches_at(tokens, i):
                if tokens[j].kind != SEPARATING and not _glued(tokens, j, j + 1):
                    best = (j, label)
        if best is None:
            i += 1
            continue
        spans.append(Span(len(spans), i, best[0], best[1]))
        i = best[0] + 1
    return spans


def tag_named_entities(doc: Document, gaz: Gazetteer) -> Document:
    if doc.text and not doc.tokens:
        raise PreconditionError("named entity tagging needs the token layer")
    if doc.has_layer(WORDS) or doc.has_layer(SENTENCES):
        raise PreconditionError("named entities must be tagged before word and sentence segmentation")
    return doc.with_layer(NE, find_entities(doc.tokens, gaz))


def _joins(tokens: Sequence, j: int, n: int, ne_starts) -> int:
    """Index of the token that extends a word ending at ``j``, or -1."""
    nxt = j + 1
    if nxt >= n or nxt in ne_starts:
        return -1
    if tokens[nxt].kind in ALNUM:
        return nxt
    after = nxt + 1
    if tokens[nxt].kind != SYMBOLIC or after >= n or after in ne_starts or tokens[after].kind not in ALNUM:
        return -1
    sym = tokens[nxt].surface
    if sym in INTRA_WORD:
        return after
    if sym in DECIMAL_MARKS and tokens[j].kind == NUMERICAL and tokens[after].kind == NUMERICAL:
        return after
    return -1


def segment_words(doc: Document) -> Document:
    """Group tokens into words.

    Letter and digit runs join directly ("p53") or across one intra-word
    symbol (hyphen, apostrophe, a decimal mark between digits).  Named
    entities are atomic: inside one, words are its whitespace-free chunks.
    Other symbols are one-token words.
    """
    if doc.text and not doc.tokens:
        raise PreconditionError("word segmentation needs the token layer")
    if not doc.has_layer(NE):
        raise PreconditionError("word segmentation needs the named entity layer")
    tokens = doc.tokens
    n = len(tokens)
    ne_starts = {span.first_token: span for span in doc.layer(NE)}
    bounds = []
    i = 0
    while i < n:
        span = ne_starts.get(i)
        if span is not None:
            j = i
            while j <= span.last_token:
                if tokens[j].kind == SEPARATING:
                    j += 1
                    continue
                k = j
                while k + 1 <= span.last_token and tokens[k + 1].kind != SEPARATING:
                    k += 1
                bounds.append((j, k))
                j = k + 1
            i = span.last_token + 1
            continue
        kind = tokens[i].kind
        if kind == SEPARATING:
            i += 1
        elif kind == SYMBOLIC:
            bounds.append((i, i))
            i += 1
        else:
            j = i
            while (nxt := _joins(tokens, j, n, ne_starts)) != -1:
                j = nxt
            bounds.append((i, j))
            i = j + 1
    return doc.with_layer(WORDS, [Span(k, a, b) for k, (a, b) in enumerate(bounds)])


def _ne_tokens(doc: Document) -> set:
    return {t for s in doc.layer(NE) for t in range(s.first_token, s.last_token + 1)}


def _single_symbol(doc: Document, word: Span, chars, ne_tokens: set) -> bool:
    return (word.first_token == word.last_token and word.first_token not in ne_tokens
            and doc.tokens[word.first_token].surface in chars)


def _starts_sentence(doc: Document, words: Sequence, k: int, ne_tokens: set) -> bool:
    word = words[k]
    if _single_symbol(doc, word, OPENERS, ne_tokens) and k + 1 < len(words) \
            and words[k + 1].first_token == word.last_token + 1:
        word = words[k + 1]
    if word.first_token in ne_tokens:
        return True
    first = doc.tokens[word.first_token].surface[0]
    return first.isupper() or first.istitle() or first.isdecimal()


def segment_sentences(doc: Document) -> Document:
    """Split at ".", "!" or "?" (plus closing quotes/brackets) followed by
    whitespace and a capitalized, numeric or named-entity start.  A dot that
    belongs to a named entity never ends a sentence.
    """
    if not (doc.has_layer(NE) and doc.has_layer(WORDS)):
        raise PreconditionError("sentence segmentation needs the named entity and word layers")
    words = doc.layer(WORDS)
    tokens = doc.tokens
    ne_tokens = _ne_tokens(doc)
    ranges = []
    start = 0
    k = 0
    while k < len(words):
        if not _single_symbol(doc, words[k], TERMINAL, ne_tokens):
            k += 1
            continue
        end = k
        while (end + 1 < len(words) and words[end + 1].first_token == words[end].last_token + 1
               and (_single_symbol(doc, words[end + 1], TERMINAL, ne_tokens)
                    or _single_symbol(doc, words[end + 1], CLOSERS, ne_tokens))):
            end += 1
        gap = words[end].last_token + 1
        if (end + 1 < len(words) and gap < len(tokens) and tokens[gap].kind == SEPARATING
                and _starts_sentence(doc, words, end + 1, ne_tokens)):
            ranges.append((start, end))
            start = end + 1
        k = end + 1
    if start < len(words):
        ranges.append((start, len(words) - 1))
    spans = [Span(i, words[a].first_token, words[b].last_token) for i, (a, b) in enumerate(ranges)]
    return doc.with_layer(SENTENCES, spans)


@dataclass(frozen=True)
class SuffixRule:
    suffix: str
    pos: str


def guess_category(surface: str, rules: Sequence[SuffixRule]) -> Optional[tuple]:
    """POS of the longest suffix rule matching ``surface``, as ``(pos, rule index)``.

    The word must be longer than the suffix.  Returns None when nothing matches.
    """
    if not surface:
        raise PreconditionError("cannot guess the category of an empty word")
    if not surface.isalpha():
        raise PreconditionError(f"category guessing expects an alphabetic word, got {surface!r}")
    word = surface.lower()
    best = None
    for idx, rule in enumerate(rules):
        if len(word) > len(rule.suffix) and word.endswith(rule.suffix):
            if best is None or len(rule.suffix) > len(rules[best].suffix):
                best = idx
    return None if best is None else (rules[best].pos, best)


def load_suffix_rules(path=None) -> list:
    """Read ``suffix<TAB>pos`` lines; the packaged rule file when no path is given."""
    if path is None:
        path = resources.files("ogmios") / "data" / "suffix_rules.tsv"
    rules = []
    for lineno, (suffix, pos) in read_tsv(path, 2, 2):
        suffix, pos = suffix.strip().lstrip("-").lower(), pos.strip()
        if not suffix or not suffix.isalpha():
            raise ResourceError(path, f"bad suffix {suffix!r}", lineno)
        if pos not in POS_TAGS:
            raise ResourceError(path, f"unknown POS tag {pos!r}", lineno)
        rules.append(SuffixRule(suffix, pos))
    return rules


class MorphLexicon:
    """Known word forms (lowercased) with POS and lemma, plus suffix rules."""

    def __init__(self, entries: Optional[Mapping[str, tuple]] = None, rules: Sequence[SuffixRule] = ()):
        self.entries = {k.lower(): v for k, v in (entries or {}).items()}
        self.rules = list(rules)

    def lookup(self, surface: str) -> Optional[tuple]:
        return self.entries.get(surface.lower())

    @classmethod
    def load(cls, lexicon_path=None, rules_path=None, default_rules: bool = True) -> "MorphLexicon":
        entries = {}
        if lexicon_path is not None:
            for lineno, fields in read_tsv(lexicon_path, 2, 3):
                surface, pos = fields[0].strip(), fields[1].strip()
                lemma = fields[2].strip() if len(fields) == 3 else ""
                if not surface:
                    raise ResourceError(lexicon_path, "empty surface form", lineno)
                if pos not in POS_TAGS:
                    raise ResourceError(lexicon_path, f"unknown POS tag {pos!r}", lineno)
                entries.setdefault(surface.lower(), (pos, lemma or None))
        if rules_path is not None or default_rules:
            rules = load_suffix_rules(rules_path)
        else:
            rules = []
        return cls(entries, rules)


def _guess_key(tokens: Sequence) -> Optional[str]:
    """Surface the guesser looks at: the word itself, or the last part of a
    hyphenated compound; None for words with digits or other symbols."""
    if all(t.kind == ALPHABETICAL or t.surface in INTRA_WORD for t in tokens) and tokens[-1].kind == ALPHABETICAL:
        return tokens[-1].surface
    return None


def analyze_word(surface: str, tokens: Sequence, lex: MorphLexicon) -> Morpho:
    """Morpho annotation (with word_id -1) for one word."""
    known = lex.lookup(surface)
    if known is not None:
        return Morpho(-1, known[0], known[1], "lexicon")
    key = _guess_key(tokens)
    if key is not None:
        guess = guess_category(key, lex.rules)
        if guess is not None:
            return Morpho(-1, guess[0], None, "guesser")
    kinds = {t.kind for t in tokens}
    if ALPHABETICAL in kinds:
        pos = "NOUN"
    elif NUMERICAL in kinds:
        pos = "NUM"
    else:
        pos = "PUNCT"
    return Morpho(-1, pos, None, "fallback")


def pos_tag_and_lemmatize(doc: Document, lex: MorphLexicon) -> Document:
    if not (doc.has_layer(WORDS) and doc.has_layer(SENTENCES)):
        raise PreconditionError("POS tagging needs the word and sentence layers")
    out = []
    for word in doc.layer(WORDS):
        m = analyze_word(doc.span_text(word), doc.tokens[word.first_token:word.last_token + 1], lex)
        out.append(Morpho(word.id, m.pos, m.lemma, m.source))
    return doc.with_layer(MORPHO, out)
