"""Bug report data model, ingestion, sentence segmentation and preprocessing."""

from __future__ import annotations

import json
import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Iterator, Mapping

from nltk.stem.porter import PorterStemmer

DESCRIPTION = "description"
COMMENT = "comment"

_STEMMER = PorterStemmer()
_TOKEN_RE = re.compile(r"[a-z0-9]+(?:['_][a-z0-9]+)*")
_URL_RE = re.compile(r"(?:https?://|ftp://|www\.)\S+", re.IGNORECASE)
# a terminator followed by whitespace ends a sentence
_SPLIT_RE = re.compile(r"(?<=[.!?])\s+")
_ABBREVIATIONS = ("e.g.", "i.e.", "etc.", "vs.", "cf.", "mr.", "mrs.", "dr.", "no.")
_CODE_LINE_RE = re.compile(
    r"^\s*(?:public|private|protected|static|import|#include|def |class |return\b|//|/\*|\*)"
    r"|[;{}]\s*$"
)


class IngestError(ValueError):
    """Raised when a report record is missing a required field or is malformed."""


@dataclass(frozen=True)
class Sentence:
    id: str
    raw_text: str
    tokens: tuple[str, ...]
    char_len: int
    word_count: int

    @property
    def turn_no(self) -> int:
        return int(self.id.split(".")[0])

    @property
    def index(self) -> int:
        return int(self.id.split(".")[1])


@dataclass(frozen=True)
class Turn:
    turn_no: int
    author: str
    sentences: tuple[Sentence, ...]
    kind: str = COMMENT
    timestamp: float | None = None

    @property
    def char_len(self) -> int:
        return sum(s.char_len for s in self.sentences)


@dataclass(frozen=True)
class BugReport:
    report_id: str
    title: str
    reporter: str
    turns: tuple[Turn, ...]
    status: str | None = None

    def __post_init__(self):
        if not self.turns:
            raise IngestError(f"report {self.report_id}: no turns")
        seen = set()
        for i, turn in enumerate(self.turns, start=1):
            if turn.turn_no != i:
                raise IngestError(f"report {self.report_id}: turn {turn.turn_no} out of sequence")
            expected = DESCRIPTION if i == 1 else COMMENT
            if turn.kind != expected:
                raise IngestError(f"report {self.report_id}: turn {i} must be a {expected}")
            for j, s in enumerate(turn.sentences, start=1):
                if s.id != f"{i}.{j}":
                    raise IngestError(f"report {self.report_id}: bad sentence id {s.id!r} at {i}.{j}")
                seen.add(s.id)
        if self.turns[0].author.strip() != self.reporter.strip():
            raise IngestError(f"report {self.report_id}: reporter must author the description")

    @property
    def sentences(self) -> tuple[Sentence, ...]:
        return tuple(s for t in self.turns for s in t.sentences)

    @property
    def total_words(self) -> int:
        return sum(s.word_count for s in self.sentences)

    def turn_of(self, sentence: Sentence) -> Turn:
        return self.turns[sentence.turn_no - 1]

    def sentence(self, sentence_id: str) -> Sentence:
        turn_no, index = (int(p) for p in sentence_id.split("."))
        return self.turns[turn_no - 1].sentences[index - 1]


@dataclass
class AnnotatedCorpus:
    reports: list[BugReport]
    annotations: dict[str, list[tuple[str, frozenset[str]]]] = field(default_factory=dict)

    def __post_init__(self):
        by_id = {r.report_id: r for r in self.reports}
        for rid, entries in self.annotations.items():
            if rid not in by_id:
                raise IngestError(f"annotations reference unknown report {rid}")
            if not entries:
                raise IngestError(f"report {rid}: annotation entry without annotators")
            ids = {s.id for s in by_id[rid].sentences}
            for annotator, selected in entries:
                missing = set(selected) - ids
                if missing:
                    raise IngestError(
                        f"report {rid}: annotator {annotator} selected unknown sentences {sorted(missing)}"
                    )

    @property
    def annotated_reports(self) -> list[BugReport]:
        return [r for r in self.reports if r.report_id in self.annotations]


@lru_cache(maxsize=None)
def stop_words() -> frozenset[str]:
    text = resources.files("bugsum.data").joinpath("stopwords_en.txt").read_text(encoding="utf-8")
    return frozenset(w.strip() for w in text.splitlines() if w.strip() and not w.startswith("#"))


@lru_cache(maxsize=65536)
def _stem(word: str) -> str:
    return _STEMMER.stem(word)


def preprocess(raw_text: str) -> list[str]:
    """Lowercase, tokenize on punctuation, drop stop words and Porter-stem."""
    stops = stop_words()
    return [_stem(w) for w in _TOKEN_RE.findall(raw_text.lower()) if w not in stops]


def _is_code_line(line: str) -> bool:
    return bool(_CODE_LINE_RE.search(line))


def _split_prose(line: str) -> list[str]:
    # shield URLs so that dots inside them never end a sentence
    urls: list[str] = []

    def _hide(m: re.Match) -> str:
        urls.append(m.group(0))
        return f"\x00{len(urls) - 1}\x00"

    masked = _URL_RE.sub(_hide, line)
    pieces: list[str] = []
    for chunk in _SPLIT_RE.split(masked):
        if pieces and pieces[-1].lower().endswith(_ABBREVIATIONS):
            pieces[-1] = f"{pieces[-1]} {chunk}"
        else:
            pieces.append(chunk)
    restored = [re.sub(r"\x00(\d+)\x00", lambda m: urls[int(m.group(1))], p) for p in pieces]
    return [p.strip() for p in restored if p.strip()]


def segment_sentences(text: str) -> list[str]:
    """Split free text into sentences.

    Hard newlines always end a sentence. Prose lines are further split after
    ``.``, ``!`` or ``?`` followed by whitespace; code-like lines and URLs are
    kept whole.
    """
    out: list[str] = []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if _is_code_line(line):
            out.append(line)
        else:
            out.extend(_split_prose(line))
    return out


def make_sentence(sentence_id: str, text: str) -> Sentence:
    return Sentence(
        id=sentence_id,
        raw_text=text,
        tokens=tuple(preprocess(text)),
        char_len=len(text),
        word_count=len(text.split()),
    )


def make_turn(turn_no: int, author: str, texts: Iterable[str], timestamp: float | None = None) -> Turn:
    sentences = tuple(make_sentence(f"{turn_no}.{j}", t) for j, t in enumerate(texts, start=1))
    kind = DESCRIPTION if turn_no == 1 else COMMENT
    return Turn(turn_no=turn_no, author=author, sentences=sentences, kind=kind, timestamp=timestamp)


def _require(record: Mapping, key: str, rid: str):
    value = record.get(key)
    if value is None or not str(value).strip():
        raise IngestError(f"report {rid}: missing field {key!r}")
    return value


def _timestamp(value) -> float | None:
    if value is None or value == "":
        return None
    try:
        return float(value)
    except (TypeError, ValueError):
        raise IngestError(f"bad timestamp {value!r}") from None


def ingest_report(record: Mapping) -> BugReport:
    """Build a :class:`BugReport` from a raw or pre-segmented record.

    Raw records carry ``description`` text and a ``comments`` list of
    ``{"author", "text", "timestamp"?}``; both are run through
    :func:`segment_sentences`. Records with a ``turns`` key are taken as
    already segmented (the corpus file format) and their sentence boundaries
    are kept verbatim.
    """
    if not isinstance(record, Mapping):
        raise IngestError("report record must be a JSON object")
    rid = str(record.get("report_id", record.get("id", "?")))
    if "report_id" not in record and "id" not in record:
        raise IngestError("missing field 'report_id'")
    title = str(_require(record, "title", rid))
    reporter = str(_require(record, "reporter", rid))
    status = record.get("status")

    if "turns" in record:
        turns = []
        for i, raw in enumerate(record["turns"], start=1):
            texts = [s["text"] if isinstance(s, Mapping) else str(s) for s in raw.get("sentences", [])]
            author = raw.get("author")
            if author is None:
                raise IngestError(f"report {rid}: turn {i} missing field 'author'")
            turns.append(make_turn(i, str(author), texts, _timestamp(raw.get("timestamp"))))
        if not turns:
            raise IngestError(f"report {rid}: missing field 'description'")
        return BugReport(rid, title, reporter, tuple(turns), status)

    description = _require(record, "description", rid)
    turns = [make_turn(1, reporter, segment_sentences(str(description)), _timestamp(record.get("timestamp")))]
    for c in record.get("comments") or []:
        if isinstance(c, str):
            c = {"text": c}
        author = c.get("author")
        if author is None:
            raise IngestError(f"report {rid}: comment {len(turns)} missing field 'author'")
        turns.append(
            make_turn(len(turns) + 1, str(author), segment_sentences(str(c.get("text", ""))), _timestamp(c.get("timestamp")))
        )
    return BugReport(rid, title, reporter, tuple(turns), status)


def report_to_record(report: BugReport) -> dict:
    """Serialize to the pre-segmented corpus record format."""
    rec: dict = {"report_id": report.report_id, "title": report.title, "reporter": report.reporter}
    if report.status is not None:
        rec["status"] = report.status
    rec["turns"] = []
    for t in report.turns:
        turn = {"turn_no": t.turn_no, "author": t.author, "kind": t.kind}
        if t.timestamp is not None:
            turn["timestamp"] = t.timestamp
        turn["sentences"] = [{"id": s.id, "text": s.raw_text} for s in t.sentences]
        rec["turns"].append(turn)
    return rec


def _read_records(path: Path) -> Iterator[dict]:
    text = Path(path).read_text(encoding="utf-8")
    stripped = text.lstrip()
    if stripped.startswith("["):
        yield from json.loads(text)
        return
    for n, line in enumerate(text.splitlines(), start=1):
        if line.strip():
            try:
                yield json.loads(line)
            except json.JSONDecodeError as exc:
                raise IngestError(f"{path}:{n}: {exc.msg}") from None


def load_corpus(path: str | Path) -> list[BugReport]:
    """Load a corpus file (JSON array or newline-delimited JSON)."""
    return [ingest_report(rec) for rec in _read_records(Path(path))]


def dump_corpus(reports: Iterable[BugReport], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in reports:
            fh.write(json.dumps(report_to_record(r), ensure_ascii=False, sort_keys=False))
            fh.write("\n")


def load_annotations(path: str | Path) -> dict[str, list[tuple[str, frozenset[str]]]]:
    out: dict[str, list[tuple[str, frozenset[str]]]] = {}
    for rec in _read_records(Path(path)):
        try:
            rid = str(rec["report_id"])
            out[rid] = [(str(a["annotator_id"]), frozenset(a["selected"])) for a in rec["annotators"]]
        except (KeyError, TypeError) as exc:
            raise IngestError(f"annotation record missing field {exc}") from None
    return out


def dump_annotations(annotations: Mapping[str, list[tuple[str, frozenset[str]]]], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rid, entries in annotations.items():
            rec = {
                "report_id": rid,
                "annotators": [{"annotator_id": a, "selected": sorted(sel, key=_id_key)} for a, sel in entries],
            }
            fh.write(json.dumps(rec) + "\n")


def _id_key(sentence_id: str) -> tuple[int, int]:
    a, b = sentence_id.split(".")
    return int(a), int(b)


def load_annotated_corpus(corpus_path: str | Path, annotations_path: str | Path) -> AnnotatedCorpus:
    return AnnotatedCorpus(load_corpus(corpus_path), load_annotations(annotations_path))


def load_sds_xml(bugreports_path: str | Path, annotation_path: str | Path) -> AnnotatedCorpus:
    """Read the public SDS release (``bugreports.xml`` + ``annotation.xml``).

    Sentence boundaries and ids are taken verbatim from the XML. Each
    ``Annotation`` element of a report counts as one annotator; its
    ``ExtractiveSummary/Sentence/@ID`` values are the selected sentences.
    """
    reports = []
    for br in ET.parse(bugreports_path).getroot().iter("BugReport"):
        rid = br.get("ID")
        title = (br.findtext("Title") or "").strip().strip('"')
        turns = []
        for i, turn in enumerate(br.findall("Turn"), start=1):
            author = (turn.findtext("From") or "").strip().strip("'")
            texts = [(s.text or "").strip() for s in turn.iter("Sentence")]
            turns.append(make_turn(i, author, texts))
        if not turns:
            raise IngestError(f"report {rid}: no turns")
        reports.append(BugReport(str(rid), title or f"report {rid}", turns[0].author, tuple(turns)))
    annotations: dict[str, list[tuple[str, frozenset[str]]]] = {}
    for br in ET.parse(annotation_path).getroot().iter("BugReport"):
        rid = str(br.get("ID"))
        entries = []
        for n, ann in enumerate(br.iter("Annotation"), start=1):
            ids = frozenset(s.get("ID") for s in ann.iter("Sentence") if _in_extractive(ann, s))
            entries.append((ann.get("ID") or f"A{n}", ids))
        if entries:
            annotations[rid] = entries
    return AnnotatedCorpus(reports, annotations)


def _in_extractive(annotation: ET.Element, sentence: ET.Element) -> bool:
    for ext in annotation.iter("ExtractiveSummary"):
        if any(s is sentence for s in ext.iter("Sentence")):
            return True
    return False
