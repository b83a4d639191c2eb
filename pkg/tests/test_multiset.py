import pytest
from hypothesis import given
from hypothesis import strategies as st

from membrane_fssp.multiset import MAX_COUNT, CountOverflowError, Multiset

counts = st.dictionaries(st.sampled_from("abcdef"), st.integers(0, 50))


def test_zero_counts_dropped():
    assert Multiset({"a": 0, "b": 2}) == Multiset({"b": 2})
    assert len(Multiset({"a": 0})) == 0


def test_from_iterable():
    assert Multiset("abca") == Multiset({"a": 2, "b": 1, "c": 1})


def test_subtract_below_zero_is_an_error():
    with pytest.raises(ValueError):
        Multiset("a") - Multiset("aa")


def test_overflow_is_checked():
    big = Multiset({"a": MAX_COUNT})
    with pytest.raises(CountOverflowError):
        big + Multiset("a")
    with pytest.raises(CountOverflowError):
        Multiset({"a": 2**63}).scale(2)


def test_render_and_parse():
    ms = Multiset({"k": 1, "a": 1, "d": 3, "e": 2, "f": 1})
    text = ms.render("abcdefghklpq")
    assert text == "a d^3 e^2 f k"
    assert Multiset.parse(text.split()) == ms


def test_multiplicity():
    assert Multiset({"c": 3, "d": 3}).multiplicity(Multiset("cd")) == 3
    assert Multiset({"e": 11}).multiplicity(Multiset("eeeee")) == 2
    assert Multiset("a").multiplicity(Multiset("ab")) == 0


@given(counts, counts)
def test_add_then_subtract_roundtrips(x, y):
    a, b = Multiset(x), Multiset(y)
    assert (a + b) - b == a
    assert (a + b).contains(a)
    assert (a + b).size() == a.size() + b.size()


@given(counts)
def test_equal_multisets_hash_equal(x):
    assert hash(Multiset(x)) == hash(Multiset(dict(reversed(list(x.items())))))
