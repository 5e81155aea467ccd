"""Independent reference implementations used as test oracles.

None of these import the code paths they check; they work from Unicode
database properties and brute-force enumeration.
"""
from __future__ import annotations

import itertools
import unicodedata

LETTER_CATEGORIES = {"Lu", "Ll", "Lt", "Lm", "Lo"}


def classify_char(ch: str) -> str:
    cat = unicodedata.category(ch)
    if cat in LETTER_CATEGORIES:
        return "alphabetical"
    if cat == "Nd":
        return "numerical"
    if cat == "Zs" or unicodedata.bidirectional(ch) in ("WS", "B", "S"):
        return "separating"
    return "symbolic"


def brute_tokenize(text: str, classify=classify_char) -> list:
    """``(kind, start, end)`` triples from a single left-to-right pass."""
    out = []
    for i, ch in enumerate(text):
        kind = classify(ch)
        if out and kind != "symbolic" and out[-1][0] == kind and out[-1][2] == i:
            out[-1] = (kind, out[-1][1], i + 1)
        else:
            out.append((kind, i, i + 1))
    return out


def leftmost_longest(n: int, candidates) -> list:
    """Greedy selection over explicit ``(start, end)`` candidates."""
    chosen = []
    pos = 0
    by_start = {}
    for start, end in candidates:
        by_start.setdefault(start, []).append(end)
    for start in range(n):
        if start < pos or start not in by_start:
            continue
        end = max(by_start[start])
        chosen.append((start, end))
        pos = end + 1
    return chosen


def all_tilings(n: int, candidates) -> list:
    """Every set of non-overlapping candidates (small n only)."""
    cands = sorted(set(candidates))
    out = []
    for r in range(len(cands) + 1):
        for combo in itertools.combinations(cands, r):
            ok = all(a[1] < b[0] for a, b in zip(combo, combo[1:]))
            if ok:
                out.append(combo)
    return out


def best_tiling(n: int, candidates):
    """Tiling that is lexicographically best by (earliest start, longest span),
    picked by exhaustive enumeration with greedy-consistency filtering."""
    cand_set = set(candidates)

    def greedy_consistent(tiling):
        # every position from which a candidate starts and that is not covered
        # by an earlier chosen span must itself be chosen with its longest end
        covered_until = -1
        chosen = dict(tiling)
        for start in range(n):
            if start <= covered_until:
                if start in chosen:
                    return False
                continue
            ends = [e for s, e in cand_set if s == start]
            if ends:
                if chosen.get(start) != max(ends):
                    return False
                covered_until = max(ends)
            elif start in chosen:
                return False
        return True

    winners = [t for t in all_tilings(n, candidates) if greedy_consistent(t)]
    assert len(winners) == 1, winners
    return list(winners[0])


def longest_suffix(word: str, rules) -> tuple:
    """Brute force over all rules: the longest suffix that strictly ends ``word``."""
    w = word.lower()
    matching = [(len(s), -i, p, i) for i, (s, p) in enumerate(rules) if len(w) > len(s) and w.endswith(s)]
    if not matching:
        return None
    _, _, pos, idx = max(matching)
    return pos, idx


# --- per-invariant re-checkers for documents ------------------------------


def token_ids_ok(doc) -> bool:
    return [t.id for t in doc.tokens] == list(range(len(doc.tokens)))


def token_coverage_ok(doc) -> bool:
    return "".join(doc.text[t.start:t.end] for t in doc.tokens) == doc.text


def spans_ok(doc, layer) -> bool:
    spans = doc.layers.get(layer, ())
    n = len(doc.tokens)
    for k, s in enumerate(spans):
        if s.id != k or not (0 <= s.first_token <= s.last_token < n):
            return False
        if k and spans[k - 1].last_token >= s.first_token:
            return False
    return True


def words_in_sentences_ok(doc) -> bool:
    sentences = doc.layers.get("sentences")
    if sentences is None:
        return True
    for w in doc.layers.get("words", ()):
        owners = [s for s in sentences if s.first_token <= w.first_token and w.last_token <= s.last_token]
        if len(owners) != 1:
            return False
    return True


def ne_term_disjoint(doc) -> bool:
    ne = {t for s in doc.layers.get("ne", ()) for t in range(s.first_token, s.last_token + 1)}
    return all(not ne.intersection(range(s.first_token, s.last_token + 1)) for s in doc.layers.get("terms", ()))


def morpho_total(doc) -> bool:
    if "morpho" not in doc.layers:
        return True
    return [m.word_id for m in doc.layers["morpho"]] == list(range(len(doc.layers.get("words", ()))))
