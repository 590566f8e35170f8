"""Corpus model and I/O for multi-annotator span annotation data.

A corpus is a sequence of inputs, each pairing a tokenized document with a
document-level label and one span set per annotator who saw that
(document, label) pair.  Word indices are 1-based and inclusive on both ends
throughout the package, matching the annotation format.

All types are immutable values after construction and safe to share across
threads.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from typing import IO, TYPE_CHECKING, Iterable, Iterator, Mapping

if TYPE_CHECKING:
    from spanlab.tags import TagSequence


class CorpusError(ValueError):
    """Malformed corpus file or violated corpus invariant."""


@dataclass(frozen=True, order=True)
class Span:
    """A contiguous word run [begin, end], 1-based, inclusive on both ends."""

    begin: int
    end: int

    def __post_init__(self) -> None:
        if self.begin < 1 or self.end < self.begin:
            raise ValueError(f"invalid span ({self.begin},{self.end})")

    def __len__(self) -> int:
        return self.end - self.begin + 1

    def words(self) -> range:
        """Word indices covered by this span."""
        return range(self.begin, self.end + 1)

    def overlaps(self, other: "Span") -> bool:
        return self.begin <= other.end and other.begin <= self.end


@dataclass(frozen=True)
class SpanSet:
    """Spans kept sorted by position.

    Everything this package produces is non-overlapping.  Overlap in ingested
    data is reported by `parse_corpus`/`validate` instead of being rejected
    here, so validators can still inspect the offending values.
    """

    spans: tuple[Span, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "spans", tuple(sorted(self.spans)))

    @classmethod
    def of(cls, *pairs: tuple[int, int]) -> "SpanSet":
        return cls(tuple(Span(b, e) for b, e in pairs))

    @classmethod
    def from_word_set(cls, words: Iterable[int]) -> "SpanSet":
        """Group word indices into maximal contiguous runs."""
        spans = []
        run_start = prev = None
        for w in sorted(set(words)):
            if prev is None:
                run_start = prev = w
            elif w == prev + 1:
                prev = w
            else:
                spans.append(Span(run_start, prev))
                run_start = prev = w
        if prev is not None:
            spans.append(Span(run_start, prev))
        return cls(tuple(spans))

    def words(self) -> set[int]:
        return {i for s in self.spans for i in s.words()}

    def pairs(self) -> tuple[tuple[int, int], ...]:
        return tuple((s.begin, s.end) for s in self.spans)

    def max_end(self) -> int:
        return max((s.end for s in self.spans), default=0)

    def __iter__(self) -> Iterator[Span]:
        return iter(self.spans)

    def __len__(self) -> int:
        return len(self.spans)

    def __bool__(self) -> bool:
        return bool(self.spans)


@dataclass(frozen=True)
class Document:
    """A tokenized problem description."""

    doc_id: str
    words: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "words", tuple(self.words))
        if not self.words:
            raise ValueError(f"document {self.doc_id!r} has no words")
        if any("\n" in w for w in self.words):
            raise ValueError(f"document {self.doc_id!r} has a newline inside a word")

    def __len__(self) -> int:
        return len(self.words)


@dataclass(frozen=True)
class LabeledInput:
    """A document paired with the label its spans are meant to support."""

    document: Document
    label: str

    @property
    def key(self) -> tuple[str, str]:
        return (self.document.doc_id, self.label)


@dataclass(frozen=True)
class AnnotationRecord:
    """One annotator's span set for one input."""

    annotator_id: str
    spans: SpanSet


@dataclass(frozen=True)
class InputAnnotations:
    """A (document, label) input with every annotator's spans for it."""

    document: Document
    label: str
    records: tuple[AnnotationRecord, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "records", tuple(self.records))

    @property
    def key(self) -> tuple[str, str]:
        return (self.document.doc_id, self.label)

    @property
    def labeled_input(self) -> LabeledInput:
        return LabeledInput(self.document, self.label)


@dataclass(frozen=True)
class Corpus:
    """All inputs, unique by (doc_id, label), in file order."""

    inputs: tuple[InputAnnotations, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "inputs", tuple(self.inputs))

    def __iter__(self) -> Iterator[InputAnnotations]:
        return iter(self.inputs)

    def __len__(self) -> int:
        return len(self.inputs)

    def doc_ids(self) -> tuple[str, ...]:
        """Distinct doc_ids in first-appearance order."""
        seen: dict[str, None] = {}
        for inp in self.inputs:
            seen.setdefault(inp.document.doc_id)
        return tuple(seen)

    def by_key(self) -> dict[tuple[str, str], InputAnnotations]:
        return {inp.key: inp for inp in self.inputs}

    def subset(self, doc_ids: Iterable[str]) -> "Corpus":
        """Inputs whose document is in doc_ids, preserving corpus order."""
        wanted = set(doc_ids)
        return Corpus(tuple(i for i in self.inputs if i.document.doc_id in wanted))


def _field(obj: dict, key: str, typ: type, where: str):
    if key not in obj:
        raise CorpusError(f"{where}: missing key {key!r}")
    value = obj[key]
    if not isinstance(value, typ):
        raise CorpusError(f"{where}: key {key!r} must be a {typ.__name__}")
    return value


def _parse_span_pairs(raw, n: int, who: str) -> SpanSet:
    spans = []
    for pair in raw:
        if (
            not isinstance(pair, list)
            or len(pair) != 2
            or not all(isinstance(x, int) and not isinstance(x, bool) for x in pair)
        ):
            raise CorpusError(f"{who}: span must be a [begin, end] pair of integers")
        b, e = pair
        if b < 1:
            raise CorpusError(f"{who}: span begin {b} below 1")
        if e < b:
            raise CorpusError(f"{who}: span begin {b} exceeds end {e}")
        if e > n:
            raise CorpusError(f"{who}: span end {e} exceeds N={n}")
        spans.append(Span(b, e))
    spans.sort()
    for prev, cur in zip(spans, spans[1:]):
        if cur.begin <= prev.end:
            raise CorpusError(
                f"{who}: spans ({prev.begin},{prev.end}) and "
                f"({cur.begin},{cur.end}) overlap"
            )
    return SpanSet(tuple(spans))


def parse_corpus(stream: Iterable[str]) -> Corpus:
    """Parse corpus JSONL, one input per line.

    Raises CorpusError with the line number for malformed lines and with the
    (doc_id, label, annotator_id) context for invariant violations.  Structural
    invariants (bounds, ordering, overlap, uniqueness) are enforced here; the
    minimum annotated span length is a validation policy, see `validate`.
    """
    inputs: list[InputAnnotations] = []
    seen: set[tuple[str, str]] = set()
    documents: dict[str, Document] = {}
    for lineno, line in enumerate(stream, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorpusError(f"line {lineno}: malformed JSON ({exc.msg})") from None
        if not isinstance(obj, dict):
            raise CorpusError(f"line {lineno}: expected a JSON object")
        doc_id = _field(obj, "doc_id", str, f"line {lineno}")
        words = _field(obj, "words", list, f"line {lineno}")
        label = _field(obj, "label", str, f"line {lineno}")
        annotations = _field(obj, "annotations", list, f"line {lineno}")
        where = f"line {lineno} ({doc_id}/{label})"
        if not doc_id:
            raise CorpusError(f"line {lineno}: empty doc_id")
        if not label:
            raise CorpusError(f"{where}: empty label")
        if not words or not all(isinstance(w, str) for w in words):
            raise CorpusError(f"{where}: 'words' must be a non-empty list of strings")
        if any("\n" in w for w in words):
            raise CorpusError(f"{where}: words may not contain newlines")
        if (doc_id, label) in seen:
            raise CorpusError(f"{where}: duplicate input {doc_id}/{label}")
        seen.add((doc_id, label))
        if doc_id in documents:
            doc = documents[doc_id]
            if doc.words != tuple(words):
                raise CorpusError(f"{where}: doc_id {doc_id} reappears with different words")
        else:
            doc = Document(doc_id, tuple(words))
            documents[doc_id] = doc
        if not annotations:
            raise CorpusError(f"{where}: no annotation records")
        records = []
        rec_ids: set[str] = set()
        for rec_obj in annotations:
            if not isinstance(rec_obj, dict):
                raise CorpusError(f"{where}: annotation record must be an object")
            annotator_id = _field(rec_obj, "annotator_id", str, where)
            raw_spans = _field(rec_obj, "spans", list, where)
            if not annotator_id:
                raise CorpusError(f"{where}: empty annotator_id")
            if annotator_id in rec_ids:
                raise CorpusError(f"{where}: duplicate annotator {annotator_id}")
            rec_ids.add(annotator_id)
            who = f"{where} annotator {annotator_id}"
            records.append(AnnotationRecord(annotator_id, _parse_span_pairs(raw_spans, len(doc), who)))
        inputs.append(InputAnnotations(doc, label, tuple(records)))
    return Corpus(tuple(inputs))


def serialize_corpus(corpus: Corpus, stream: IO[str]) -> None:
    """Inverse of parse_corpus: one JSON object per input, UTF-8 text."""
    for inp in corpus:
        obj = {
            "doc_id": inp.document.doc_id,
            "words": list(inp.document.words),
            "label": inp.label,
            "annotations": [
                {"annotator_id": r.annotator_id, "spans": [[s.begin, s.end] for s in r.spans]}
                for r in inp.records
            ],
        }
        stream.write(json.dumps(obj, ensure_ascii=False) + "\n")


VALIDATION_POLICIES = ("annotator-input", "lenient")


def validate(corpus: Corpus, policy: str = "annotator-input") -> list[str]:
    """Report invariant violations; an empty list means the corpus is valid.

    `lenient` checks structure only (bounds and overlap).  `annotator-input`
    additionally flags annotated spans shorter than 3 words, the minimum that
    holds for ingested annotations.  The minimum is never applied to
    aggregated or predicted spans.
    """
    if policy not in VALIDATION_POLICIES:
        raise ValueError(f"unknown validation policy {policy!r}")
    violations = []
    for inp in corpus:
        n = len(inp.document)
        for rec in inp.records:
            who = f"{inp.document.doc_id}/{inp.label} annotator {rec.annotator_id}"
            prev = None
            for s in rec.spans:
                if s.end > n:
                    violations.append(f"{who}: span end {s.end} exceeds N={n}")
                if prev is not None and s.begin <= prev.end:
                    violations.append(
                        f"{who}: spans ({prev.begin},{prev.end}) and "
                        f"({s.begin},{s.end}) overlap"
                    )
                if policy == "annotator-input" and len(s) < 3:
                    violations.append(f"{who}: span ({s.begin},{s.end}) shorter than 3 words")
                prev = s
    return violations


@dataclass(frozen=True)
class Fold:
    """Disjoint doc_id sets of one cross-validation fold."""

    train: frozenset[str]
    dev: frozenset[str]
    test: frozenset[str]


@dataclass(frozen=True)
class FoldPlan:
    """A complete k-fold split; every doc_id is in exactly one test fold."""

    k: int
    dev_fraction: float
    seed: int
    folds: tuple[Fold, ...]

    def to_json(self) -> dict:
        return {
            "k": self.k,
            "dev_fraction": self.dev_fraction,
            "seed": self.seed,
            "folds": [
                {"train": sorted(f.train), "dev": sorted(f.dev), "test": sorted(f.test)}
                for f in self.folds
            ],
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "FoldPlan":
        folds = tuple(
            Fold(frozenset(f["train"]), frozenset(f["dev"]), frozenset(f["test"]))
            for f in obj["folds"]
        )
        return cls(int(obj["k"]), float(obj["dev_fraction"]), int(obj["seed"]), folds)


def split_folds(corpus: Corpus, k: int, dev_fraction: float, seed: int) -> FoldPlan:
    """Shuffle doc_ids with a seeded RNG and cut k near-equal test folds.

    Splitting is by document, so all (document, label) inputs of one document
    land in the same fold.  Within a fold, the dev set is drawn from the
    non-test documents at dev_fraction (rounded half up).  Pure function of
    (corpus order, k, dev_fraction, seed).
    """
    if k < 1:
        raise CorpusError("k must be a positive integer")
    if not 0.0 < dev_fraction < 1.0:
        raise CorpusError("dev_fraction must be in (0, 1)")
    ids = list(corpus.doc_ids())
    if k > len(ids):
        raise CorpusError(f"k={k} exceeds the {len(ids)} distinct documents")
    rng = random.Random(seed)
    order = ids[:]
    rng.shuffle(order)
    base, extra = divmod(len(order), k)
    folds = []
    at = 0
    for i in range(k):
        size = base + (1 if i < extra else 0)
        test = order[at : at + size]
        at += size
        test_set = set(test)
        pool = rng.sample([d for d in order if d not in test_set], len(order) - size)
        n_dev = int(dev_fraction * len(pool) + 0.5)
        folds.append(Fold(frozenset(pool[n_dev:]), frozenset(pool[:n_dev]), frozenset(test)))
    return FoldPlan(k, dev_fraction, seed, tuple(folds))


def export_conll(
    items: Iterable[tuple[Document, "TagSequence", "TagSequence"]],
    stream: IO[str],
) -> None:
    """Write "word gold pred" lines, one blank line after each sequence.

    Tags render as O / B-SPAN / I-SPAN / E-SPAN / S-SPAN so the output is
    scoreable by standard chunking evaluators.  Byte-exact for identical
    input.
    """
    for doc, gold, pred in items:
        if len(gold) != len(doc) or len(pred) != len(doc):
            raise CorpusError(f"{doc.doc_id}: tag sequences must have length {len(doc)}")
        for word, g, p in zip(doc.words, gold, pred):
            stream.write(f"{word} {_conll_tag(g)} {_conll_tag(p)}\n")
        stream.write("\n")


def _conll_tag(tag) -> str:
    return "O" if tag.name == "O" else f"{tag.name}-SPAN"


def parse_predictions(stream: Iterable[str]) -> dict[tuple[str, str], SpanSet]:
    """Parse predictions JSONL into a (doc_id, label) -> SpanSet map."""
    preds: dict[tuple[str, str], SpanSet] = {}
    for lineno, line in enumerate(stream, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorpusError(f"line {lineno}: malformed JSON ({exc.msg})") from None
        if not isinstance(obj, dict):
            raise CorpusError(f"line {lineno}: expected a JSON object")
        doc_id = _field(obj, "doc_id", str, f"line {lineno}")
        label = _field(obj, "label", str, f"line {lineno}")
        raw_spans = _field(obj, "spans", list, f"line {lineno}")
        key = (doc_id, label)
        if key in preds:
            raise CorpusError(f"line {lineno}: duplicate prediction for {doc_id}/{label}")
        who = f"line {lineno} ({doc_id}/{label})"
        # No document length here; bounds are checked during evaluation.
        preds[key] = _parse_span_pairs(raw_spans, 10**18, who)
    return preds


def write_predictions(
    items: Iterable[tuple[str, str, SpanSet]], stream: IO[str]
) -> None:
    for doc_id, label, spans in items:
        obj = {"doc_id": doc_id, "label": label, "spans": [[s.begin, s.end] for s in spans]}
        stream.write(json.dumps(obj, ensure_ascii=False) + "\n")
