from pathlib import Path

import pytest
from hypothesis import given, strategies as st

from icureadmit.porter import measure, porter_stem

DATA = Path(__file__).parent / "data"


def load_vocabulary():
    words = (DATA / "porter_voc.txt").read_text().split()
    stems = (DATA / "porter_output.txt").read_text().split()
    return list(zip(words, stems))


@pytest.mark.parametrize(
    "word, stem",
    [("caresses", "caress"), ("sky", "sky"), ("relational", "relat"), ("ponies", "poni"),
     ("hopping", "hop"), ("generalizations", "gener"), ("electrical", "electr")],
)
def test_known_stems(word, stem):
    assert porter_stem(word) == stem


def test_measure():
    assert [measure(w) for w in ("tr", "ee", "tree", "y", "by")] == [0] * 5
    assert [measure(w) for w in ("trouble", "oats", "trees", "ivy")] == [1] * 4
    assert [measure(w) for w in ("troubles", "private", "oaten", "orrery")] == [2] * 4


def test_short_words_unchanged():
    for w in ("a", "is", "as", "be"):
        assert porter_stem(w) == w


def test_whole_vocabulary():
    pairs = load_vocabulary()
    assert len(pairs) == 23531
    wrong = [(w, s, porter_stem(w)) for w, s in pairs if porter_stem(w) != s]
    assert wrong == []


def test_restemming_is_not_always_stable():
    # The reference outputs themselves rule out idempotence: "abase" stems
    # to "abas", which stems again to "aba".
    assert porter_stem("abase") == "abas"
    assert porter_stem("abas") == "aba"


def test_repeated_stemming_reaches_fixed_point():
    for w, _ in load_vocabulary():
        s = w
        for _ in range(4):
            s = porter_stem(s)
        assert porter_stem(s) == s, w


@given(st.text(alphabet="abcdefghijklmnopqrstuvwxyz", min_size=1, max_size=20))
def test_total_and_never_longer(word):
    out = porter_stem(word)
    assert isinstance(out, str)
    assert len(out) <= len(word)
    assert out
