import random
import zlib
from dataclasses import replace
from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

import oracles
from generators import random_document
from mutants import MUTATORS
from ogmios.model import (Document, DocumentParseError, Morpho, SchemaError, Span, TimingRecord,
                          ValidationError, deserialize, serialize, strip_timings, validate)
from ogmios.tokenizer import tokenize


def tokenized(text, doc_id="d"):
    return Document(doc_id, text, tuple(tokenize(text)))


def test_empty_document_is_valid():
    assert validate(Document("e", "")) == []


def test_gap_between_tokens_is_one_contiguity_violation():
    doc = tokenized("ab cd")
    # drop the separator but keep ids consecutive: token[1].start != token[0].end
    gap = replace(doc, tokens=(doc.tokens[0], replace(doc.tokens[2], id=1)))
    found = validate(gap)
    assert [v.rule for v in found] == ["token contiguity"]
    assert found[0].layer == "tokens" and found[0].annotation_id == 1


def test_single_token_serializes_with_offsets():
    xml = serialize(tokenized("a")).decode()
    assert '<token id="0" kind="alphabetical" start="0" end="1"/>' in xml


def test_serialize_is_deterministic_and_round_trips():
    doc = random_document(random.Random(5), "r")
    a, b = serialize(doc), serialize(doc)
    assert a == b
    back = deserialize(a)
    assert back == doc
    assert serialize(back) == a


def test_serialize_refuses_invalid_document():
    doc = tokenized("ab")
    bad = replace(doc, text="abc")
    with pytest.raises(ValidationError) as err:
        serialize(bad)
    assert err.value.violations[0].rule == "token coverage"


def test_truncated_xml_is_a_parse_error_with_position():
    data = serialize(random_document(random.Random(1)))
    with pytest.raises(DocumentParseError) as err:
        deserialize(data[: len(data) // 2])
    assert err.value.position is not None


def test_schema_errors_are_named():
    with pytest.raises(SchemaError):
        deserialize(b"<doc/>")
    with pytest.raises(SchemaError):
        deserialize(b'<document id="x"><tokens/></document>')
    with pytest.raises(SchemaError):
        deserialize(b'<document id="x"><text>a</text><tokens><token id="0" kind="weird" start="0" end="1"/>'
                    b"</tokens></document>")


def test_overlapping_words_in_xml_are_rejected_naming_the_word_layer():
    doc = tokenized("ab cd")
    doc = doc.with_layer("words", [Span(0, 0, 0), Span(1, 2, 2)])
    xml = serialize(doc).decode()
    edited = xml.replace('<word id="1" first="2" last="2"/>', '<word id="1" first="0" last="2"/>')
    with pytest.raises(ValidationError) as err:
        deserialize(edited.encode())
    layers = {(v.rule, v.layer) for v in err.value.violations}
    assert ("layer overlap", "words") in layers


def test_text_with_control_characters_uses_base64():
    doc = tokenized("a\x01b\r\n")
    xml = serialize(doc)
    assert b'encoding="base64"' in xml
    assert deserialize(xml) == doc


def test_carriage_return_survives_plain_text():
    doc = tokenized("a\rb")
    assert deserialize(serialize(doc)) == doc


def test_strip_timings_removes_only_timings():
    doc = random_document(random.Random(3))
    xml = serialize(doc)
    other = serialize(doc.with_timings([TimingRecord("load", 9.5)]))
    assert xml != other
    assert strip_timings(xml) == strip_timings(other)
    assert b"<timings>" not in strip_timings(xml)


def test_morpho_lemma_absent_round_trips_as_none():
    doc = tokenized("53").with_layer("words", [Span(0, 0, 0)]).with_layer("sentences", [Span(0, 0, 0)])
    doc = doc.with_layer("morpho", [Morpho(0, "NUM", None, "fallback")])
    assert deserialize(serialize(doc)).layer("morpho")[0].lemma is None


def test_empty_lemma_is_a_value_violation():
    doc = tokenized("x").with_layer("words", [Span(0, 0, 0)])
    doc = doc.with_layer("morpho", [Morpho(0, "NOUN", "", "lexicon")])
    assert [v.rule for v in validate(doc)] == ["morpho value"]


@pytest.mark.parametrize("cls", sorted(MUTATORS))
def test_each_mutation_reports_exactly_its_class(cls):
    rng = random.Random(zlib.crc32(cls.encode()))
    hits = 0
    for i in range(60):
        doc = random_document(rng, f"m{i}")
        mutant = MUTATORS[cls](doc)
        if mutant is None:
            continue
        hits += 1
        assert {v.rule for v in validate(mutant)} == {cls}
        with pytest.raises((ValidationError, ValueError)):
            serialize(mutant)
    assert hits > 10


# --- properties -------------------------------------------------------------

texts = st.text(st.characters(blacklist_categories=("Cs",)), max_size=80)


@given(texts)
@settings(max_examples=200, deadline=None)
def test_tokenized_text_is_valid_and_round_trips(text):
    doc = tokenized(text)
    assert validate(doc) == []
    assert oracles.token_coverage_ok(doc)
    assert deserialize(serialize(doc)) == doc


@given(st.integers(0, 10_000))
@settings(max_examples=60, deadline=None)
def test_validate_agrees_with_independent_checkers(seed):
    doc = random_document(random.Random(seed), f"p{seed}")
    checks = [oracles.token_ids_ok(doc), oracles.token_coverage_ok(doc), oracles.words_in_sentences_ok(doc),
              oracles.ne_term_disjoint(doc), oracles.morpho_total(doc)]
    checks += [oracles.spans_ok(doc, layer) for layer in ("ne", "words", "sentences", "terms")]
    assert all(checks)
    assert validate(doc) == []
    for cls, mutate in MUTATORS.items():
        mutant = mutate(doc)
        if mutant is None:
            continue
        independent = [oracles.token_ids_ok(mutant), oracles.token_coverage_ok(mutant),
                       oracles.words_in_sentences_ok(mutant), oracles.ne_term_disjoint(mutant),
                       oracles.morpho_total(mutant)]
        independent += [oracles.spans_ok(mutant, layer) for layer in ("ne", "words", "sentences", "terms")]
        if not all(independent):
            assert validate(mutant), cls


def test_serialized_documents_conform_to_published_schema():
    etree = pytest.importorskip("lxml.etree")
    schema = etree.XMLSchema(etree.parse(str(Path(__file__).resolve().parent.parent / "docs" / "document.xsd")))
    rng = random.Random(17)
    docs = [random_document(rng, f"x{i}") for i in range(200)] + [Document("e", ""), tokenized("a\x01b")]
    for doc in docs:
        tree = etree.fromstring(serialize(doc))
        assert schema.validate(tree), schema.error_log
