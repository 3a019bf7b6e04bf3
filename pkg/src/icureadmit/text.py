"""Tokenization, vocabulary construction and tf-idf Bag-of-Words vectors."""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, Optional, Sequence

from .errors import ContractError, EmptyVocabularyError, ParseError
from .porter import porter_stem

_FRAGMENT = re.compile(r"[A-Za-z0-9]+")


def tokenize(text: str) -> list[str]:
    """Lowercase letters-only tokens of length >= 2.

    Text is split into maximal runs of ASCII letters and digits; runs that
    contain a digit are discarded whole, so ``2x`` and ``q4h`` vanish.
    """
    out = []
    for frag in _FRAGMENT.findall(text):
        if len(frag) < 2 or not frag.isalpha():
            continue
        out.append(frag.lower())
    return out


def load_stopwords(path=None) -> frozenset[str]:
    """Read a one-token-per-line stopword file; ``#`` starts a comment.

    Without a path the bundled PubMed stopword list is used.
    """
    if path is None:
        text = resources.files("icureadmit.data").joinpath("stopwords.txt").read_text("utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    words = set()
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip().lower()
        if line:
            words.add(line)
    return frozenset(words)


@dataclass(frozen=True)
class SparseVector:
    indices: tuple[int, ...]
    values: tuple[float, ...]
    dimension: int

    def __post_init__(self):
        if len(self.indices) != len(self.values):
            raise ContractError("indices and values differ in length")

    def norm(self) -> float:
        return math.sqrt(math.fsum(v * v for v in self.values))

    def to_dense(self):
        import numpy as np

        x = np.zeros(self.dimension)
        x[list(self.indices)] = self.values
        return x


@dataclass
class Vocabulary:
    """Ordered term index with document frequencies and idf weights.

    ``settings`` records how the vocabulary was built (thresholds, whether
    tokens are stemmed, the idf variant) and travels with the JSON file.
    """

    terms: list[str]
    doc_frequency: dict[str, int]
    idf: dict[str, float]
    corpus_size: int
    settings: dict = field(default_factory=dict)
    index_of: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        self.index_of = {t: i for i, t in enumerate(self.terms)}

    def __len__(self) -> int:
        return len(self.terms)

    @property
    def stem(self) -> bool:
        return self.settings.get("stem", True)

    @property
    def stopwords(self) -> frozenset[str]:
        cached = self.__dict__.get("_stopwords")
        if cached is None:
            cached = frozenset(self.settings.get("stopwords", ()))
            self.__dict__["_stopwords"] = cached
        return cached

    def normalize(self, token: str) -> Optional[str]:
        """Map a raw token to its term, or ``None`` if it is a stopword."""
        if token in self.stopwords:
            return None
        term = porter_stem(token) if self.stem else token
        return None if term in self.stopwords else term

    def to_json(self) -> str:
        doc = {
            "settings": self.settings,
            "corpus_size": self.corpus_size,
            "terms": [
                {"term": t, "df": self.doc_frequency[t], "idf": self.idf[t]} for t in self.terms
            ],
        }
        return json.dumps(doc, indent=1, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Vocabulary":
        doc = json.loads(text)
        terms = [e["term"] for e in doc["terms"]]
        return cls(
            terms=terms,
            doc_frequency={e["term"]: int(e["df"]) for e in doc["terms"]},
            idf={e["term"]: float(e["idf"]) for e in doc["terms"]},
            corpus_size=int(doc["corpus_size"]),
            settings=doc.get("settings", {}),
        )


def max_doc_count(corpus_size: int, max_doc_fraction: float) -> int:
    # Guard against products such as 0.95 * 60 = 56.99999999999999.
    return math.floor(max_doc_fraction * corpus_size + 1e-9)


def build_vocabulary(
    corpus: Sequence[Sequence[str]],
    stopwords: Iterable[str] = frozenset(),
    min_doc_count: int = 5,
    max_doc_fraction: float = 0.95,
    *,
    stem: bool = True,
) -> Vocabulary:
    """Document-frequency filtered vocabulary over raw token streams.

    Tokens are dropped if the raw token or its stem is a stopword, then
    counted by stem. A term survives when
    ``min_doc_count <= df <= floor(max_doc_fraction * N)``.
    ``idf = ln(N / df) + 1``. Terms are indexed in lexicographic order.
    """
    if not corpus:
        raise ContractError("cannot build a vocabulary from an empty corpus")
    if not 0 < max_doc_fraction <= 1:
        raise ContractError(f"max_doc_fraction must be in (0, 1], got {max_doc_fraction}")
    if min_doc_count < 1:
        raise ContractError(f"min_doc_count must be >= 1, got {min_doc_count}")

    stop = frozenset(stopwords)
    norm = porter_stem if stem else (lambda t: t)
    df: Counter = Counter()
    for doc in corpus:
        terms = set()
        for tok in doc:
            if tok in stop:
                continue
            t = norm(tok)
            if t in stop:
                continue
            terms.add(t)
        df.update(terms)

    n = len(corpus)
    upper = max_doc_count(n, max_doc_fraction)
    kept = sorted(t for t, c in df.items() if min_doc_count <= c <= upper)
    if not kept:
        raise EmptyVocabularyError(
            f"no term satisfies {min_doc_count} <= df <= {upper} over {n} documents"
        )
    settings = {
        "min_doc_count": min_doc_count,
        "max_doc_fraction": max_doc_fraction,
        "stem": stem,
        "stopwords": sorted(stop),
        "idf": "ln(N/df)+1",
        "normalization": "l2",
    }
    return Vocabulary(
        terms=kept,
        doc_frequency={t: df[t] for t in kept},
        idf={t: math.log(n / df[t]) + 1.0 for t in kept},
        corpus_size=n,
        settings=settings,
    )


def vectorize_tfidf(doc: Sequence[str], vocab: Vocabulary) -> SparseVector:
    """L2-normalized ``count * idf`` over in-vocabulary terms.

    Tokens are normalized the way the vocabulary was built (stopword
    filter, then stemming if enabled). A document with no in-vocabulary
    term gives the empty vector.
    """
    counts: Counter = Counter()
    for tok in doc:
        t = vocab.normalize(tok)
        j = None if t is None else vocab.index_of.get(t)
        if j is not None:
            counts[j] += 1
    if not counts:
        return SparseVector((), (), len(vocab))
    idx = sorted(counts)
    raw = [counts[j] * vocab.idf[vocab.terms[j]] for j in idx]
    norm = math.sqrt(math.fsum(v * v for v in raw))
    return SparseVector(tuple(idx), tuple(v / norm for v in raw), len(vocab))


def stem_tokens(tokens: Iterable[str]) -> list[str]:
    return [porter_stem(t) for t in tokens]


def read_vocabulary(path) -> Vocabulary:
    try:
        with open(path, encoding="utf-8") as fh:
            return Vocabulary.from_json(fh.read())
    except (ValueError, KeyError, TypeError) as exc:
        raise ParseError(f"bad vocabulary file: {exc}", source=path) from None


def bag_of_words(
    texts: Sequence[str],
    stopwords: Iterable[str],
    min_doc_count: int = 5,
    max_doc_fraction: float = 0.95,
    vocab: Optional[Vocabulary] = None,
) -> tuple[Vocabulary, list[SparseVector]]:
    """Tokenize, build (or reuse) a vocabulary and vectorize every text."""
    docs = [tokenize(t) for t in texts]
    if vocab is None:
        vocab = build_vocabulary(docs, stopwords, min_doc_count, max_doc_fraction)
    return vocab, [vectorize_tfidf(d, vocab) for d in docs]
