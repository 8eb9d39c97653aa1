import random
from fractions import Fraction as F

import pytest
from hypothesis import given, settings, strategies as st

from sidedgames import stats as S
from sidedgames.gales import GaleTree, GaleVector, dominates
from sidedgames.strings import cylinder_measure, measure, strings_of_length


def single(M):
    return GaleVector((M,))


def slow_variance(V, B):
    # direct double sum, no shared helpers
    B = list(B)
    w = [F(1, 2 ** len(s)) for s in B]
    tot = sum(w)
    out = F(0)
    for M in V:
        mean = sum(wi * M(s) for wi, s in zip(w, B)) / tot
        out += sum(wi * (M(s) - mean) ** 2 for wi, s in zip(w, B)) / tot
    return out


def test_cond_expectation_examples():
    M = GaleTree.from_mapping(2, {"0": 1, "11": 3})
    assert S.cond_expectation(single(M), ["0", "11"]) == (F(5, 3),)
    C = GaleTree.constant(2, F(7, 3))
    assert S.cond_expectation(single(C), ["0", "10", "11"]) == (F(7, 3),)
    mart = GaleTree.from_leaves(1, [F(1, 2), F(5, 2)])
    assert S.cond_expectation(single(mart), ["0", "1"]) == (mart(""),)
    with pytest.raises(ValueError):
        S.cond_expectation(single(C), [])


def test_cond_variance_examples():
    M = GaleTree.from_mapping(2, {"0": 1, "11": 3})
    assert S.cond_variance(single(M), ["0", "11"]) == F(8, 9)
    assert S.cond_variance(GaleVector((M, M)), ["0", "11"]) == F(16, 9)
    assert S.cond_variance(single(GaleTree.constant(2, 5)), ["0", "11"]) == 0


def test_martingale_completion_examples():
    M = S.martingale_completion([1, 3, 0, 2])
    assert (M("0"), M("1"), M("")) == (2, 1, F(3, 2))
    assert S.martingale_completion([1] * 8) == GaleTree.constant(3, 1)
    assert S.martingale_completion([2, 0])("") == 1
    with pytest.raises(ValueError):
        S.martingale_completion([1, -1])


def test_variance_budget_examples():
    chain = S.LevelChain(({""}, {"0", "1"}, set(strings_of_length(2))))
    assert S.variance_budget(single(GaleTree.constant(2, 1)), chain) == 0
    W = single(S.martingale_completion([1, 3, 0, 2]))
    assert S.variance_budget(W, chain) == S.cond_variance(W, strings_of_length(2)) - S.cond_variance(W, [""])
    one = S.LevelChain(({""}, {"0", "1"}))
    assert S.variance_budget(W, one) == S.level_budget(W, one, 0)


def test_level_chain_rejects_bad_chains():
    with pytest.raises(ValueError):
        S.LevelChain(({""}, {"0"}))
    with pytest.raises(ValueError):
        S.LevelChain(({"0", "1"}, {"0", "01", "1"}))


def test_sqrtvar_examples():
    V = GaleVector((GaleTree.constant(2, 1), GaleTree.constant(2, 0)))
    r = S.check_claim_sqrtvar(V)
    assert r.ok and r.deficit == 0 and r.variance == 0
    # deficit 1/2 needs variance at least 1/64 at C = 4
    assert (F(1, 2)) ** 2 <= 16 * F(1, 64)
    assert not (F(1, 2)) ** 2 <= 16 * F(1, 65)


def test_sqrtvar_reports_preconditions():
    V = GaleVector((GaleTree.constant(2, F(1, 2)), GaleTree.constant(2, 0)))
    with pytest.raises(S.PreconditionError) as e:
        S.check_claim_sqrtvar(V)
    assert "11" in str(e.value)


def test_budget_examples():
    chain = S.LevelChain(({""}, {"0", "1"}))
    V = GaleVector((GaleTree.constant(1, 1),))
    r = S.check_budget_bound(V, chain, 0, 1)
    assert r.ok and r.budget == 0 and r.bound == 8
    W = GaleVector((GaleTree.from_leaves(1, [0, 2]),))
    r = S.check_budget_bound(W, chain, 0, 1)
    assert r.ok and r.budget == 1
    with pytest.raises(S.PreconditionError):
        S.check_budget_bound(GaleVector((GaleTree.constant(1, 3),)), chain, 0, 1)


def test_budget_negative_control_finds_witness():
    rng = random.Random(0)
    hits = 0
    for t in range(300):
        inst = S.sample_budget_instance(rng, 3)
        if not S.check_budget_bound(inst.V, inst.chain, inst.eps, inst.k, constant=1).ok:
            hits += 1
    assert hits > 0


leaf_lists = st.lists(st.fractions(min_value=0, max_value=3, max_denominator=6), min_size=8, max_size=8)


@given(leaf_lists, st.integers(0, 2 ** 32))
@settings(max_examples=60, deadline=None)
def test_law_of_total_variance_exact(vals, seed):
    W = GaleVector((S.martingale_completion(vals),))
    chain = S.random_chain(random.Random(seed), 3, 4)
    for j in range(chain.steps):
        assert S.total_variance_gap(W, chain, j) == 0


@given(leaf_lists, st.lists(st.text(alphabet="01", min_size=1, max_size=3), min_size=1, max_size=5))
def test_variance_matches_slow_sum_and_pointwise_bound(vals, B):
    from sidedgames.strings import antichain
    B = sorted(antichain(B))
    V = GaleVector((GaleTree.from_leaves(3, vals), GaleTree.from_leaves(3, vals[::-1])))
    var = S.cond_variance(V, B)
    assert var == slow_variance(V, B)
    E = S.cond_expectation(V, B)
    mB = measure(B)
    for s in B:
        for M, e in zip(V, E):
            assert var >= cylinder_measure(s) / mB * (M(s) - e) ** 2


@given(st.integers(0, 2 ** 32))
@settings(max_examples=40, deadline=None)
def test_completion_dominated_by_supermartingale(seed):
    rng = random.Random(seed)
    M = S.random_supermartingale(rng, 3, F(rng.randint(1, 8), 4))
    W = S.completion_of(GaleVector((M,)))[0]
    assert dominates(M, W)


@given(st.integers(0, 2 ** 32))
@settings(max_examples=50, deadline=None)
def test_samplers_meet_preconditions(seed):
    rng = random.Random(seed)
    assert S.sqrtvar_problems(S.sample_sqrtvar_instance(rng)) == []
    inst = S.sample_budget_instance(rng, rng.randint(1, 3), max_depth=6)
    assert S.budget_problems(inst.V, inst.eps) == []
