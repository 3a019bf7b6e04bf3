import math

import pytest
from hypothesis import given, settings, strategies as st

from icureadmit.errors import ContractError, EmptyVocabularyError
from icureadmit.text import (
    Vocabulary,
    build_vocabulary,
    load_stopwords,
    max_doc_count,
    tokenize,
    vectorize_tfidf,
)


def test_tokenize_examples():
    assert tokenize("Chest X-ray: clear.") == ["chest", "ray", "clear"]
    assert tokenize("") == []
    assert tokenize("BiPAP used 2x") == ["bipap", "used"]


def test_tokenize_drops_mixed_digit_runs():
    assert tokenize("q4h dosing, bp 120/80, K+ 3.9") == ["dosing", "bp"]
    assert tokenize("Café naïve") == ["caf", "na", "ve"]


@given(st.text())
def test_tokens_are_lowercase_letters(text):
    for tok in tokenize(text):
        assert len(tok) >= 2
        assert tok.isascii() and tok.isalpha() and tok == tok.lower()


def test_bundled_stopwords():
    stop = load_stopwords()
    assert {"the", "and", "of", "was"} <= stop
    assert "patient" not in stop


def test_stopword_file(tmp_path):
    p = tmp_path / "stop.txt"
    p.write_text("# comment\nFoo\n\nbar  # trailing\n")
    assert load_stopwords(p) == {"foo", "bar"}


def corpus_with_df(df_by_word, n):
    docs = [[] for _ in range(n)]
    for word, df in df_by_word.items():
        for i in range(df):
            docs[i].append(word)
    return docs


def test_df_thresholds():
    # "pine", "oak" and "elm" are their own Porter stems.
    docs = corpus_with_df({"pine": 4, "oak": 96, "elm": 50}, 100)
    vocab = build_vocabulary(docs)
    assert vocab.terms == ["elm"]
    assert vocab.idf["elm"] == pytest.approx(math.log(2) + 1, abs=1e-12)
    assert vocab.idf["elm"] == pytest.approx(1.6931, abs=1e-4)


def test_df_upper_bound_is_inclusive():
    assert max_doc_count(100, 0.95) == 95
    assert max_doc_count(6, 0.95) == 5
    vocab = build_vocabulary(corpus_with_df({"oak": 95, "elm": 5}, 100))
    assert vocab.terms == ["elm", "oak"]


def test_stopwords_checked_on_token_and_stem():
    docs = [["running", "the", "doing"]] * 6 + [[]] * 4
    vocab = build_vocabulary(docs, {"the", "run"})
    assert vocab.terms == ["do"]


def test_stems_are_counted_once_per_document():
    docs = [["nurse", "nurses", "nursing"]] * 5 + [[]] * 5
    vocab = build_vocabulary(docs)
    assert vocab.terms == ["nurs"]
    assert vocab.doc_frequency["nurs"] == 5


def test_empty_corpus_and_empty_vocabulary():
    with pytest.raises(ContractError):
        build_vocabulary([])
    with pytest.raises(EmptyVocabularyError):
        build_vocabulary([["pine"]] * 3)


def small_vocab(idf):
    terms = sorted(idf)
    return Vocabulary(terms, {t: 1 for t in terms}, dict(idf), 10, {"stem": False, "stopwords": []})


def test_vectorize_examples():
    vocab = small_vocab({"a": 1.0, "b": 2.0})
    v = vectorize_tfidf(["a", "a", "b"], vocab)
    assert v.indices == (0, 1)
    assert v.values == pytest.approx((2 / math.sqrt(8), 2 / math.sqrt(8)), abs=1e-12)
    assert vectorize_tfidf(["b"], vocab).values == (1.0,)
    empty = vectorize_tfidf(["zzz"], vocab)
    assert empty.indices == () and empty.dimension == 2


def test_vectorize_applies_vocabulary_normalization():
    docs = [["nurses", "the", "pump"]] * 5 + [["other"]] * 5
    vocab = build_vocabulary(docs, {"the"})
    v = vectorize_tfidf(["nursing", "the", "pumps"], vocab)
    assert [vocab.terms[j] for j in v.indices] == ["nurs", "pump"]


words = st.sampled_from(["heart", "lung", "renal", "liver", "sepsis", "the", "and", "failure"])
docs_strategy = st.lists(st.lists(words, max_size=12), min_size=1, max_size=30)


@given(docs_strategy, st.integers(1, 4), st.floats(0.05, 1.0))
def test_vocabulary_invariants(docs, min_count, max_frac):
    try:
        vocab = build_vocabulary(docs, {"the", "and"}, min_count, max_frac)
    except EmptyVocabularyError:
        return
    upper = math.floor(max_frac * len(docs) + 1e-9)
    assert vocab.terms == sorted(set(vocab.terms))
    assert [vocab.index_of[t] for t in vocab.terms] == list(range(len(vocab)))
    for t in vocab.terms:
        assert min_count <= vocab.doc_frequency[t] <= upper
        assert t not in {"the", "and"}
        assert vocab.idf[t] >= 1.0


@given(docs_strategy, st.lists(words, max_size=20), st.integers(1, 5))
def test_vector_invariants(docs, doc, k):
    try:
        vocab = build_vocabulary(docs, {"the"}, 1, 1.0)
    except EmptyVocabularyError:
        return
    v = vectorize_tfidf(doc, vocab)
    assert list(v.indices) == sorted(set(v.indices))
    assert all(0 <= j < len(vocab) for j in v.indices)
    assert all(x > 0 and math.isfinite(x) for x in v.values)
    if v.indices:
        assert abs(v.norm() - 1.0) < 1e-9
    repeated = vectorize_tfidf(doc * k, vocab)
    assert repeated.indices == v.indices
    assert repeated.values == pytest.approx(v.values, abs=1e-12)


@settings(max_examples=30)
@given(docs_strategy)
def test_serialization_deterministic(docs):
    try:
        a = build_vocabulary(docs, {"the"}, 1, 1.0)
    except EmptyVocabularyError:
        return
    b = build_vocabulary(list(docs), {"the"}, 1, 1.0)
    assert a.to_json() == b.to_json()
    back = Vocabulary.from_json(a.to_json())
    assert back.to_json() == a.to_json()
    assert back.index_of == a.index_of
