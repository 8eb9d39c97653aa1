"""One test per acceptance criterion; a PASS/FAIL line per criterion is printed at the end of the run."""
import random
import time
from fractions import Fraction as F

import pytest

from sidedgames import alice as A
from sidedgames import baby as B
from sidedgames import referee as R
from sidedgames import stats as S
from sidedgames.construct import CatcherMember, ConstructionConfig, ScriptedMember, ZeroMember, construct, doubling_gale
from sidedgames.gales import SidePolicy
from sidedgames.referee import GameSpec
from sidedgames.simplexlp import Status, brute_force_solve
from sidedgames.strings import measure, strings_of_length, ternary_embed, ternary_lex_iter

import referee_fuzz as RF


class Timer:
    def __init__(self, limit):
        self.limit = limit

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0
        if exc[0] is None:
            assert self.elapsed < self.limit, f"took {self.elapsed:.1f} s, limit {self.limit} s"


def vertex_min_root(spec, A_, policies=None):
    """Independent oracle: every choice of catching prefixes, each LP by vertex enumeration."""
    from itertools import product
    from sidedgames.gales import GaleVector
    best = None
    zero = GaleVector.zero(spec.n, spec.k)
    for choice in product(*[[s[:j] for j in range(len(s) + 1)] for s in A_]):
        lp = B.MoveProblem(spec, zero, policies=policies, catches=tuple(choice)).build()
        res = brute_force_solve(lp)
        if res.status is Status.OPTIMAL and (best is None or res.value < best):
            best = res.value
    return best


def test_criterion_01_sided_lp_bounds():
    zero_sided = (SidePolicy.constant(2, 0),)
    single = GameSpec.partial_sided(1, 2, 1)
    pair = GameSpec.sided(1, 2)
    with Timer(1):
        got = (B.min_root_for(single, ["11"], policies=zero_sided)[0],
               B.min_root_for(single, ["01"], policies=zero_sided)[0],
               B.min_root_for(pair, ["11"])[0])
    assert got == (1, F(1, 2), F(1, 4))
    # the depth-2 single-component values are small enough for vertex enumeration
    assert vertex_min_root(single, ["11"], zero_sided) == 1
    assert vertex_min_root(single, ["01"], zero_sided) == F(1, 2)


def test_criterion_02_sqrtvar_claim():
    rng = random.Random(20240601)
    bad = []
    with Timer(30):
        for _ in range(10 ** 4):
            V = S.sample_sqrtvar_instance(rng)
            r = S.check_claim_sqrtvar(V, F(4))
            if not r.ok:
                bad.append(V)
    assert bad == []


def test_criterion_03_budget_claim_and_total_variance():
    rng = random.Random(20240602)
    bad, gaps = [], []
    with Timer(60):
        for t in range(10 ** 3):
            k = (1, 2, 3)[t % 3]
            inst = S.sample_budget_instance(rng, k, max_depth=10, max_levels=6)
            assert inst.V.depth <= 10 and inst.chain.steps <= 6
            r = S.check_budget_bound(inst.V, inst.chain, inst.eps, k, constant=F(8 * k))
            if not r.ok:
                bad.append(t)
            W = S.completion_of(inst.V)
            for j in range(inst.chain.steps):
                if S.total_variance_gap(W, inst.chain, j) != 0:
                    gaps.append((t, j))
    assert bad == [] and gaps == []


def test_criterion_04_variance_k1_exhaustive():
    spec = GameSpec.variance_partial(4, F(1, 10 ** 6), 4, 1)
    with Timer(60):
        rep = B.exhaustive_verdict(spec, A.variance_k1_strategy(4, 4), cost_bound=1, strict=True)
    assert rep.verdict is B.Verdict.ALICE_ALWAYS_WINS
    assert rep.branches > 1 and rep.max_cost < 1


def test_criterion_05_muchgale_defeat():
    lp_values, costs = {}, {}
    with Timer(30):
        for l in range(1, 4):
            for i in range(l):
                for n in range(l, 7):
                    spec = GameSpec.class_game(f"muchgale:{l}:{i}", 1, n)
                    target = [s for s in strings_of_length(n) if s[i] == "0"]
                    lp_values[l, i, n] = B.min_root_for(spec, target)[0]
                    res = A.play(spec, A.muchgale_strategy(l, i, n), B.lp_disjunctive())
                    assert res.won, (l, i, n)
                    costs[l, i, n] = res.cost
    assert all(v == 1 for v in lp_values.values()), lp_values
    off = {key: str(c) for key, c in costs.items() if c != F(1, 2)}
    assert off == {}, f"cost differs from 1/2 at {off}"


def _toy_contract(spec, handle, eps):
    for adv in [B.lp_disjunctive(), B.lp_leaf_catch()] + [B.random_adversary(s) for s in range(20)]:
        res = A.play(spec, handle, adv)
        assert res.won and res.cost <= eps


def test_criterion_06_nesting_law():
    c0, n0, eps0 = F(1, 2), 1, F(1, 2)
    c1, n1, eps1 = F(1, 4), 2, F(1, 4)
    outer, inner = A.single_leaf("1"), A.single_leaf("11")
    _toy_contract(GameSpec.sided(c0, n0), outer, eps0)
    _toy_contract(GameSpec.sided(c1, n1), inner, eps1)
    product_game = GameSpec.sided(c0 * c1, n0 + n1)
    nested = A.nest(outer, inner, c0, c1, n0, n1)
    runs = [B.lp_disjunctive(), B.lp_leaf_catch()] + [B.random_adversary(s) for s in range(20)]
    for adv in runs:
        res = A.play(product_game, nested, adv)
        assert res.won
        assert res.cost == measure(res.state.enumerated)
        assert res.cost <= eps0 * eps1


def test_criterion_07_lex_order_property():
    depth = 5
    n = 2 * (depth + 1)
    order = A.lex_variance_order(n)
    assert sorted(order) == list(strings_of_length(n))
    pos = {s: i for i, s in enumerate(order)}
    checked = 0
    for d in range(depth + 1):
        for alpha in ternary_lex_iter(d):
            rho = ternary_embed(alpha)
            block = [pos[s] for s in order if s.startswith(rho + "0") or s.startswith(rho + "11")]
            tau = [pos[s] for s in order if s.startswith(rho + "10")]
            assert max(block) < min(tau), alpha
            checked += 1
    assert checked == sum(3 ** d for d in range(depth + 1))


def test_criterion_08_pipeline_regression():
    handle, params = A.build_pipeline(F(1, 4), F(3, 4))
    assert params.violations() == []
    spec = params.game()
    first = A.play(spec, handle, B.lp_disjunctive())
    second = A.play(spec, handle, B.lp_disjunctive())
    assert first.won and first.cost <= params.cost_bound
    assert first.trace_text() == second.trace_text()
    assert A.replay(first.trace_text().splitlines()).trace_text() == first.trace_text()


def _certify(res, roster):
    cfg = res.config
    for s, per, total in res.certificates:
        assert total < 2, s
        assert total == sum(cfg.delta[j] * m.current.l1(s) for j, m in enumerate(roster))
    for k, Vk in enumerate(res.V):
        assert measure(Vk) <= F(1, 2 ** k)
        assert any(res.prefix.startswith(s) for s in Vk)
    assert len(res.prefix) == cfg.total_depth


def test_criterion_09_construction_driver():
    with Timer(120):
        cfg = ConstructionConfig([4, 4])
        roster = [CatcherMember(8), CatcherMember(8)]
        res = construct(cfg, roster)
        _certify(res, roster)
        assert res.problems() == []

        spoiler = ScriptedMember(8, [doubling_gale(8, "0000", F(1, 4), (0,))], start=1)
        roster = [spoiler, ZeroMember(8)]
        fixture = construct(ConstructionConfig([4, 4]), roster)
        _certify(fixture, roster)
        assert fixture.backtracks == 1
        assert [e.string for e in fixture.events if e.kind == "caught"] == ["0000"]


@pytest.mark.parametrize("kind", sorted(RF.CONFIGS))
def test_criterion_10_referee_conformance(kind):
    tally, disagreements, monotone = RF.run_fuzz(kind, 10 ** 3, seed=10)
    assert sum(tally.values()) == 10 ** 3
    assert disagreements == []
    assert monotone == []
