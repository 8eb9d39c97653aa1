from fractions import Fraction as F

import pytest
from hypothesis import given, settings, strategies as st

from sidedgames.simplexlp import (
    EQ, GE, LE, LinearProgram, SolverError, Status, brute_force_solve, check_dual_certificate, solve,
)


def test_small_optimum_with_certificate():
    lp = LinearProgram(2)
    lp.minimize({0: 1, 1: 1})
    lp.add({0: 1, 1: 2}, GE, 2)
    lp.add({0: 3, 1: 1}, GE, 3)
    res = solve(lp)
    assert res.status is Status.OPTIMAL
    assert res.value == F(7, 5)
    assert res.assignment == (F(4, 5), F(3, 5))
    check_dual_certificate(lp, res.duals, res.value)


def test_infeasible_and_unbounded():
    lp = LinearProgram(1)
    lp.add({0: 1}, LE, 1)
    lp.add({0: 1}, GE, 2)
    assert solve(lp).status is Status.INFEASIBLE
    lp = LinearProgram(1)
    lp.minimize({0: -1})
    assert solve(lp).status is Status.UNBOUNDED


def test_equality_and_degenerate_rows():
    lp = LinearProgram(3)
    lp.minimize({0: 1, 1: 2, 2: 3})
    lp.add({0: 1, 1: 1, 2: 1}, EQ, 1)
    lp.add({0: 1, 1: -1}, GE, 0)
    lp.add({0: 1}, LE, 0)
    res = solve(lp)
    assert res.value == 3 and res.assignment == (0, 0, 1)


def test_bad_certificate_is_caught():
    lp = LinearProgram(1)
    lp.minimize({0: 1})
    lp.add({0: 1}, GE, 1)
    with pytest.raises(SolverError):
        check_dual_certificate(lp, [F(1, 2)], F(1))


def test_json_roundtrip():
    lp = LinearProgram(2)
    lp.minimize({0: F(1, 3)})
    lp.add({0: 1, 1: 1}, GE, F(1, 2))
    again = LinearProgram.from_json(lp.to_json())
    assert again.dumps() == lp.dumps()
    assert solve(again).value == solve(lp).value


coef = st.integers(-3, 3)


@st.composite
def small_lps(draw):
    n = draw(st.integers(1, 3))
    lp = LinearProgram(n)
    lp.minimize({j: draw(st.integers(-2, 4)) for j in range(n)})
    for _ in range(draw(st.integers(1, 4))):
        lp.add({j: draw(coef) for j in range(n)}, draw(st.sampled_from([LE, GE, EQ])), draw(st.integers(-3, 4)))
    # keep the feasible region bounded so vertex enumeration is complete
    lp.add({j: 1 for j in range(n)}, LE, draw(st.integers(0, 6)))
    return lp


@given(small_lps())
@settings(max_examples=300, deadline=None)
def test_simplex_agrees_with_vertex_enumeration(lp):
    a, b = solve(lp), brute_force_solve(lp)
    assert a.status is b.status
    if a.status is Status.OPTIMAL:
        assert a.value == b.value
        assert lp.is_feasible_point(a.assignment)
        assert lp.value(a.assignment) == a.value
        check_dual_certificate(lp, a.duals, a.value)
