import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bugsum.corpus import (
    COMMENT,
    DESCRIPTION,
    AnnotatedCorpus,
    IngestError,
    dump_annotations,
    dump_corpus,
    ingest_report,
    load_annotations,
    load_corpus,
    load_sds_xml,
    preprocess,
    report_to_record,
    segment_sentences,
)
from synth import synthetic_corpus


def raw(**over):
    rec = {
        "report_id": "42",
        "title": "Crash on startup",
        "reporter": "alice",
        "description": "Firefox crashes. It happens every time.",
        "comments": [{"author": "bob", "text": "Confirmed on Linux."}],
    }
    rec.update(over)
    return rec


def test_ingest_assigns_turn_dot_index_ids():
    r = ingest_report(raw())
    assert [s.id for s in r.sentences] == ["1.1", "1.2", "2.1"]
    assert r.turns[0].kind == DESCRIPTION and r.turns[1].kind == COMMENT
    assert r.turns[0].author == r.reporter == "alice"
    assert r.total_words == 2 + 4 + 3


def test_ingest_without_comments_is_single_description_turn():
    r = ingest_report(raw(comments=[]))
    assert len(r.turns) == 1 and r.turns[0].kind == DESCRIPTION


@pytest.mark.parametrize("field", ["title", "reporter", "description"])
def test_ingest_missing_field_is_named(field):
    rec = raw()
    del rec[field]
    with pytest.raises(IngestError, match=field):
        ingest_report(rec)


def test_ingest_large_presegmented_report_not_truncated():
    n = 4993
    rec = {
        "report_id": "big",
        "title": "t",
        "reporter": "r",
        "turns": [{"author": "r", "sentences": [{"text": f"Sentence number {i}."} for i in range(n)]}],
    }
    r = ingest_report(rec)
    assert len(r.sentences) == n
    assert r.sentences[-1].id == f"1.{n}"


@pytest.mark.parametrize(
    "text, expected",
    [
        ("A bug. It crashes.", ["A bug.", "It crashes."]),
        ("see http://x.y/a.b now", ["see http://x.y/a.b now"]),
        ("line1\npublic static void f();", ["line1", "public static void f();"]),
        ("", []),
        ("Really? Yes! Done.", ["Really?", "Yes!", "Done."]),
        ("Use e.g. the safe mode. Then retry.", ["Use e.g. the safe mode.", "Then retry."]),
        ("int a = b.c(); int d = e.f();", ["int a = b.c(); int d = e.f();"]),
        ("\n\n  \n", []),
    ],
)
def test_segment_sentences(text, expected):
    assert segment_sentences(text) == expected


@pytest.mark.parametrize(
    "text, expected",
    [
        ("The problems were fixed", ["problem", "fix"]),
        ("", []),
        ("SQL sql", ["sql", "sql"]),
        ("Crashes, crashing; crashed!", ["crash", "crash", "crash"]),
    ],
)
def test_preprocess(text, expected):
    assert preprocess(text) == expected


@given(st.text(max_size=200))
@settings(max_examples=200, deadline=None)
def test_preprocess_is_deterministic_and_lowercase(text):
    a, b = preprocess(text), preprocess(text)
    assert a == b
    assert all(t == t.lower() for t in a)


@given(st.text(max_size=300))
@settings(max_examples=200, deadline=None)
def test_segmentation_drops_nothing_but_whitespace(text):
    pieces = segment_sentences(text)
    assert all(p and p == p.strip() for p in pieces)
    assert "".join("".join(pieces).split()) == "".join(text.split())


def test_sentence_ids_biject_onto_turn_index_pairs():
    corpus = synthetic_corpus(5, seed=3)
    for r in corpus.reports:
        pairs = [(s.turn_no, s.index) for s in r.sentences]
        assert len(set(pairs)) == len(pairs)
        for t in r.turns:
            assert [s.index for s in t.sentences] == list(range(1, len(t.sentences) + 1))
            assert all(s.turn_no == t.turn_no for s in t.sentences)


def test_corpus_round_trip_is_stable(tmp_path):
    corpus = synthetic_corpus(5, seed=4)
    p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    dump_corpus(corpus.reports, p1)
    again = load_corpus(p1)
    dump_corpus(again, p2)
    assert again == corpus.reports
    assert p1.read_text() == p2.read_text()


def test_presegmented_sentences_are_kept_verbatim():
    r = ingest_report(raw())
    rec = report_to_record(r)
    rec["turns"][0]["sentences"] = [{"id": "1.1", "text": "One. Two. Three."}]
    again = ingest_report(rec)
    assert again.sentences[0].raw_text == "One. Two. Three."


def test_json_array_corpus_is_accepted(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps([raw(), raw(report_id="43")]))
    assert [r.report_id for r in load_corpus(p)] == ["42", "43"]


def test_annotations_round_trip_and_validation(tmp_path):
    corpus = synthetic_corpus(3, seed=1)
    p = tmp_path / "ann.jsonl"
    dump_annotations(corpus.annotations, p)
    assert load_annotations(p) == corpus.annotations
    bad = {corpus.reports[0].report_id: [("A1", frozenset({"9.9"}))]}
    with pytest.raises(IngestError, match="9.9"):
        AnnotatedCorpus(corpus.reports, bad)


SDS_REPORTS = """<BugReports>
 <BugReport ID="1">
  <Title>"(1) Crash on start"</Title>
  <Turn><Date>2008</Date><From>'Alice'</From>
   <Text><Sentence ID="1.1">It crashes.</Sentence><Sentence ID="1.2">Every time.</Sentence></Text></Turn>
  <Turn><Date>2008</Date><From>'Bob'</From>
   <Text><Sentence ID="2.1">Confirmed.</Sentence></Text></Turn>
 </BugReport>
</BugReports>"""

SDS_ANNOTATIONS = """<root>
 <BugReport ID="1">
  <Annotation><ExtractiveSummary><Sentence ID="1.1"/></ExtractiveSummary></Annotation>
  <Annotation><ExtractiveSummary><Sentence ID="1.1"/><Sentence ID="2.1"/></ExtractiveSummary></Annotation>
 </BugReport>
</root>"""


def test_sds_xml_loader(tmp_path):
    (tmp_path / "b.xml").write_text(SDS_REPORTS)
    (tmp_path / "a.xml").write_text(SDS_ANNOTATIONS)
    corpus = load_sds_xml(tmp_path / "b.xml", tmp_path / "a.xml")
    (r,) = corpus.reports
    assert [s.id for s in r.sentences] == ["1.1", "1.2", "2.1"]
    assert r.reporter == "Alice"
    assert [sel for _, sel in corpus.annotations["1"]] == [frozenset({"1.1"}), frozenset({"1.1", "2.1"})]
