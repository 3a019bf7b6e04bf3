"""Bag-of-CUIs features: dictionary concept mapping and annotation import.

A small longest-match dictionary mapper stands in for an external concept
recognizer. Annotations produced elsewhere can be imported as JSON lines
``{"doc_id": <hadm_id>, "cuis": [...]}`` and go through the same tf-idf
treatment as words.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, Sequence, TextIO

from .errors import DataError, ParseError
from .text import SparseVector, Vocabulary, build_vocabulary, stem_tokens, tokenize, vectorize_tfidf

CUI_PATTERN = re.compile(r"C\d{7}")


def is_cui(value) -> bool:
    return isinstance(value, str) and CUI_PATTERN.fullmatch(value) is not None


@dataclass(frozen=True)
class LexiconEntry:
    phrase: tuple[str, ...]
    cui: str
    preferred_name: str
    surface: str = ""


@dataclass
class ConceptLexicon:
    entries: list[LexiconEntry]
    max_phrase_length: int = 0
    _index: dict = field(init=False, repr=False)

    def __post_init__(self):
        index: dict[tuple[str, ...], list[str]] = {}
        for e in self.entries:
            index.setdefault(e.phrase, []).append(e.cui)
        self._index = {k: tuple(v) for k, v in index.items()}
        self.max_phrase_length = max((len(e.phrase) for e in self.entries), default=0)

    def lookup(self, phrase: tuple[str, ...]) -> tuple[str, ...]:
        return self._index.get(phrase, ())

    def preferred_names(self) -> dict[str, str]:
        names = {}
        for e in self.entries:
            names.setdefault(e.cui, e.preferred_name)
        return names


def load_lexicon(stream: TextIO, *, source=None) -> ConceptLexicon:
    """Read ``phrase<TAB>CUI<TAB>preferred name`` lines.

    Phrases are tokenized and stemmed. Blank lines and ``#`` comment lines
    are skipped; identical (phrase, CUI) pairs are kept once.
    """
    entries = []
    seen = set()
    for lineno, line in enumerate(stream, start=1):
        line = line.rstrip("\r\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise ParseError(f"expected 3 tab-separated fields, got {len(parts)}", row=lineno, source=source)
        phrase_text, cui, name = (p.strip() for p in parts)
        if not is_cui(cui):
            raise ParseError(f"malformed CUI {cui!r}", row=lineno, source=source)
        phrase = tuple(stem_tokens(tokenize(phrase_text)))
        if not phrase:
            raise ParseError("empty phrase", row=lineno, source=source)
        if (phrase, cui) in seen:
            continue
        seen.add((phrase, cui))
        entries.append(LexiconEntry(phrase, cui, name, phrase_text))
    return ConceptLexicon(entries)


def default_lexicon() -> ConceptLexicon:
    path = resources.files("icureadmit.data").joinpath("lexicon.tsv")
    with path.open("r", encoding="utf-8") as fh:
        return load_lexicon(fh, source="lexicon.tsv")


def map_concepts(doc: Sequence[str], lexicon: ConceptLexicon) -> Counter:
    """Greedy left-to-right longest match of stem n-grams.

    Every CUI attached to a matched phrase is emitted, and scanning resumes
    after the matched span. ``doc`` must already be stemmed.
    """
    found: Counter = Counter()
    n = len(doc)
    i = 0
    longest = lexicon.max_phrase_length
    while i < n:
        for length in range(min(longest, n - i), 0, -1):
            cuis = lexicon.lookup(tuple(doc[i : i + length]))
            if cuis:
                found.update(cuis)
                i += length
                break
        else:
            i += 1
    return found


@dataclass(frozen=True)
class ConceptAnnotation:
    doc_id: int
    cuis: Counter

    def tokens(self) -> list[str]:
        """The multiset as a sorted token list, for vocabulary building."""
        return sorted(self.cuis.elements())

    def to_json(self) -> str:
        return json.dumps({"doc_id": self.doc_id, "cuis": self.tokens()})


def import_annotations(stream: TextIO, *, source=None) -> list[ConceptAnnotation]:
    """Read externally produced annotations, one JSON object per line."""
    out = []
    seen = set()
    for lineno, line in enumerate(stream, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            doc_id = obj["doc_id"]
            cuis = obj["cuis"]
        except (ValueError, KeyError, TypeError) as exc:
            raise ParseError(f"malformed annotation: {exc}", row=lineno, source=source) from None
        if isinstance(doc_id, bool) or not isinstance(doc_id, int):
            raise ParseError(f"doc_id must be an integer, got {doc_id!r}", row=lineno, source=source)
        if not isinstance(cuis, list):
            raise ParseError("cuis must be a list", row=lineno, source=source)
        for c in cuis:
            if not is_cui(c):
                raise ParseError(f"malformed CUI {c!r}", row=lineno, source=source)
        if doc_id in seen:
            raise ParseError(f"duplicate annotation for doc_id {doc_id}", row=lineno, source=source)
        seen.add(doc_id)
        out.append(ConceptAnnotation(doc_id, Counter(cuis)))
    return out


def annotate(subjects, lexicon: ConceptLexicon) -> list[ConceptAnnotation]:
    """Run the dictionary mapper over every subject's summary."""
    return [
        ConceptAnnotation(s.hadm_id, map_concepts(stem_tokens(tokenize(s.summary_text)), lexicon))
        for s in subjects
    ]


def vectorize_cuis(
    annotations: Iterable[ConceptAnnotation],
    subjects,
    min_doc_count: int = 5,
    max_doc_fraction: float = 0.95,
) -> tuple[Vocabulary, list[SparseVector]]:
    """Bag-of-CUIs vectors aligned with ``subjects`` order.

    CUIs are terms: same df thresholds and tf-idf as words, no stemming and
    no stopwords.
    """
    by_doc = {a.doc_id: a for a in annotations}
    missing = [s.hadm_id for s in subjects if s.hadm_id not in by_doc]
    if missing:
        raise DataError(f"subjects without concept annotation: {missing}")
    docs = [by_doc[s.hadm_id].tokens() for s in subjects]
    vocab = build_vocabulary(docs, (), min_doc_count, max_doc_fraction, stem=False)
    return vocab, [vectorize_tfidf(d, vocab) for d in docs]
