from fractions import Fraction as F

import pytest
from hypothesis import given, strategies as st

from sidedgames.strings import (
    antichain, block_roots, complement_leaves, conditional_measure, cylinder_leaves, format_rational,
    is_prefix, is_prefix_free, measure, parse_rational, strings_of_length, strings_upto, ternary_embed,
    ternary_lex_iter,
)

bits = st.text(alphabet="01", max_size=6)


def test_measure_examples():
    assert measure([]) == 0
    assert measure(["0", "01"]) == F(1, 2)
    assert measure(["00", "01", "1"]) == 1
    assert measure(["100", "101", "110"]) == F(3, 8)


def test_conditional_measure():
    assert conditional_measure(["00", "011"], "0") == F(3, 4)
    assert conditional_measure(["0"], "01") == 1
    assert conditional_measure(["1"], "0") == 0


def test_prefix_helpers():
    assert is_prefix("", "101") and is_prefix("10", "10") and not is_prefix("11", "10")
    assert is_prefix_free(["0", "10", "11"])
    assert not is_prefix_free(["0", "01"])
    assert antichain(["0", "01", "1", "110"]) == {"0", "1"}


def test_ternary_embedding():
    assert ternary_embed("") == ""
    assert ternary_embed("012") == "01110"
    assert block_roots(4) == ("00", "011", "010", "110", "1111", "1110", "100", "1011", "1010")
    with pytest.raises(ValueError):
        block_roots(3)


def test_enumerations():
    assert list(strings_of_length(2)) == ["00", "01", "10", "11"]
    assert list(strings_upto(1)) == ["", "0", "1"]
    assert cylinder_leaves("1", 3) == ("100", "101", "110", "111")
    assert complement_leaves("1", 2, already=["00"]) == ("01",)
    assert len(ternary_lex_iter(3)) == 27


def test_rational_format_roundtrip():
    assert format_rational(F(3, 6)) == "1/2"
    assert format_rational(2) == "2/1"
    assert parse_rational(" 3/4 ") == F(3, 4)


@given(st.lists(bits, max_size=12))
def test_antichain_keeps_measure(A):
    ac = antichain(A)
    assert is_prefix_free(ac)
    assert measure(ac) == measure(A)
    assert 0 <= measure(A) <= 1


@given(st.lists(bits, max_size=8), st.lists(bits, max_size=8))
def test_measure_subadditive_monotone(A, B):
    assert measure(A + B) <= measure(A) + measure(B)
    assert measure(A) <= measure(A + B)


@given(st.text(alphabet="012", max_size=5))
def test_embedding_is_prefix_free_image(alpha):
    # distinct ternary strings of one length land on an antichain
    n = len(alpha)
    image = [ternary_embed(a) for a in ternary_lex_iter(n)]
    assert is_prefix_free(image)
    assert measure(image) == 1
    assert ternary_embed(alpha) in image


@given(st.lists(bits, max_size=8), bits)
def test_conditional_measure_matches_definition(A, rho):
    cm = conditional_measure(A, rho)
    if any(rho.startswith(s) for s in A):
        assert cm == 1
    else:
        inside = [s for s in A if s.startswith(rho)]
        assert cm == measure(inside) * 2 ** len(rho)
