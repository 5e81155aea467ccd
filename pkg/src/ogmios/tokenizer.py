"""Typed, language-neutral segmentation of raw text into tokens.

Letters, decimal digits and whitespace are grouped into maximal runs; every
other character is a one-character symbolic token.  Offsets count code
points, so ``text[tok.start:tok.end] == tok.surface`` always holds.
"""
from __future__ import annotations

from itertools import groupby

from .model import ALPHABETICAL, NUMERICAL, SEPARATING, SYMBOLIC, Document, Token


def char_kind(ch: str) -> str:
    if ch.isalpha():
        return ALPHABETICAL
    if ch.isdecimal():
        return NUMERICAL
    if ch.isspace():
        return SEPARATING
    return SYMBOLIC


def tokenize(text: str) -> list:
    tokens = []
    pos = 0
    for kind, run in groupby(text, char_kind):
        if kind == SYMBOLIC:
            for ch in run:
                tokens.append(Token(len(tokens), kind, pos, pos + 1, ch))
                pos += 1
        else:
            surface = "".join(run)
            end = pos + len(surface)
            tokens.append(Token(len(tokens), kind, pos, end, surface))
            pos = end
    return tokens


def tokenize_document(doc: Document) -> Document:
    return doc.with_tokens(tokenize(doc.text))
