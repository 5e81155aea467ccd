"""Single-corruption mutations of valid documents, one per violation class.

Each mutator returns the corrupted document, or None when the input lacks the
structure it needs (for example no terms to corrupt).
"""
from __future__ import annotations

from dataclasses import replace

from ogmios.model import Span, TimingRecord, kind_matches


def _tokens(doc, tokens):
    return replace(doc, tokens=tuple(tokens))


def _layer(doc, name, items):
    return doc.with_layer(name, items)


def _renumber(spans):
    return [replace(s, id=i) for i, s in enumerate(spans)]


def token_contiguity(doc):
    # shift the start of an inner multi-char token; the surface follows the slice
    for i in range(1, len(doc.tokens)):
        t = doc.tokens[i]
        if t.end - t.start >= 2:
            toks = list(doc.tokens)
            toks[i] = replace(t, start=t.start + 1, surface=doc.text[t.start + 1:t.end])
            if kind_matches(t.kind, toks[i].surface):
                return _tokens(doc, toks)
    return None


def token_coverage(doc):
    if not doc.tokens:
        return None
    return replace(doc, text=doc.text + "!")


def token_surface(doc):
    if not doc.tokens:
        return None
    toks = list(doc.tokens)
    toks[0] = replace(toks[0], surface=toks[0].surface + "x")
    return _tokens(doc, toks)


def token_kind(doc):
    for i, t in enumerate(doc.tokens):
        if t.kind == "alphabetical":
            toks = list(doc.tokens)
            toks[i] = replace(t, kind="numerical")
            return _tokens(doc, toks)
    return None


def token_id(doc):
    if not doc.tokens:
        return None
    toks = list(doc.tokens)
    toks[-1] = replace(toks[-1], id=toks[-1].id + 1000)
    return _tokens(doc, toks)


def token_span(doc):
    if not doc.tokens:
        return None
    toks = list(doc.tokens)
    toks[-1] = replace(toks[-1], end=toks[-1].start)
    return _tokens(doc, toks)


def text_encoding(doc):
    for i, t in enumerate(doc.tokens):
        if t.kind == "symbolic":
            text = doc.text[:t.start] + "\ud800" + doc.text[t.end:]
            toks = list(doc.tokens)
            toks[i] = replace(t, surface="\ud800")
            return replace(doc, text=text, tokens=tuple(toks))
    return None


def annotation_id(doc):
    ne = doc.layer("ne")
    if not ne:
        return None
    return _layer(doc, "ne", ne[:-1] + (replace(ne[-1], id=ne[-1].id + 1000),))


def span_bounds(doc):
    ne = doc.layer("ne")
    if not ne:
        return None
    return _layer(doc, "ne", ne[:-1] + (replace(ne[-1], last_token=len(doc.tokens) + 5),))


def span_range(doc):
    ne = doc.layer("ne")
    if not ne or ne[-1].first_token == 0:
        return None
    last = ne[-1]
    # reversed range that still sits after the previous entity
    prev_end = ne[-2].last_token if len(ne) > 1 else -1
    if last.last_token - 1 <= prev_end:
        return None
    return _layer(doc, "ne", ne[:-1] + (replace(last, first_token=last.last_token, last_token=last.last_token - 1),))


def layer_overlap(doc):
    ne = doc.layer("ne")
    if not ne:
        return None
    k = len(ne) - 1
    return _layer(doc, "ne", _renumber(list(ne[:k + 1]) + [ne[k]] + list(ne[k + 1:])))


def layer_payload(doc):
    ne = doc.layer("ne")
    if not ne:
        return None
    return _layer(doc, "ne", ne[:-1] + (replace(ne[-1], label=None),))


def word_separator(doc):
    words = doc.layer("words")
    sentences = doc.layer("sentences")
    terms = doc.layer("terms")
    ne = doc.layer("ne")
    covered = {t for s in list(terms) + list(ne) for t in range(s.first_token, s.last_token + 1)}
    sent_last = {s.last_token for s in sentences}
    for k, w in enumerate(words[:-1]):
        nxt = w.last_token + 1
        if (doc.tokens[nxt].kind == "separating" and w.last_token not in sent_last
                and nxt < words[k + 1].first_token and w.last_token not in covered):
            ws = list(words)
            ws[k] = replace(w, last_token=nxt)
            return _layer(doc, "words", ws)
    return None


def word_in_sentence(doc):
    sentences = doc.layer("sentences")
    if not sentences or not doc.layer("words"):
        return None
    return _layer(doc, "sentences", sentences[:-1])


def ne_term_overlap(doc):
    terms = doc.layer("terms")
    if not terms:
        return None
    t = terms[0]
    ne = list(doc.layer("ne")) + [Span(0, t.first_token, t.last_token, "planted")]
    ne.sort(key=lambda s: s.first_token)
    return _layer(doc, "ne", _renumber(ne))


def morpho_reference(doc):
    m = doc.layer("morpho")
    if len(m) < 2:
        return None
    return _layer(doc, "morpho", (m[1], m[0]) + m[2:])


def morpho_totality(doc):
    m = doc.layer("morpho")
    if not m:
        return None
    return _layer(doc, "morpho", m[:-1])


def morpho_value(doc):
    m = doc.layer("morpho")
    if not m:
        return None
    return _layer(doc, "morpho", (replace(m[0], pos="XYZ"),) + m[1:])


def link_reference(doc):
    links = doc.layer("links")
    if not links:
        return None
    return _layer(doc, "links", links[:-1] + (replace(links[-1], head=len(doc.layer("words")) + 3),))


def timing_value(doc):
    if not doc.timings:
        return None
    return replace(doc, timings=doc.timings[:-1] + (TimingRecord(doc.timings[-1].step, -1.0),))


def unknown_layer(doc):
    return _layer(doc, "bogus", ())


MUTATORS = {
    "token contiguity": token_contiguity,
    "token coverage": token_coverage,
    "token surface": token_surface,
    "token kind": token_kind,
    "token id": token_id,
    "token span": token_span,
    "text encoding": text_encoding,
    "annotation id": annotation_id,
    "span bounds": span_bounds,
    "span range": span_range,
    "layer overlap": layer_overlap,
    "layer payload": layer_payload,
    "word separator": word_separator,
    "word in sentence": word_in_sentence,
    "ne/term overlap": ne_term_overlap,
    "morpho reference": morpho_reference,
    "morpho totality": morpho_totality,
    "morpho value": morpho_value,
    "link reference": link_reference,
    "timing value": timing_value,
    "unknown layer": unknown_layer,
}
