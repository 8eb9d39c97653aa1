import json
from fractions import Fraction as F

import pytest
from hypothesis import given, settings, strategies as st

from sidedgames.gales import GaleVector
from sidedgames.construct import (
    CatcherMember, ConstructionConfig, ScriptedMember, ThresholdViolation, ZeroMember,
    construct, default_ladder, doubling_gale,
)


def zero_roster(N, K=2):
    return [ZeroMember(N) for _ in range(K)]


def test_zero_roster_takes_first_candidate():
    cfg = ConstructionConfig([4, 4])
    res = construct(cfg, zero_roster(8))
    assert res.prefix == "00000000"
    assert res.backtracks == 0
    assert all(t == 0 for _, _, t in res.certificates)
    assert res.problems() == []


def test_scripted_catch_forces_one_backtrack():
    cfg = ConstructionConfig([4, 4])
    spoiler = ScriptedMember(8, [doubling_gale(8, "0000", F(1, 4), (0,))], start=1)
    res = construct(cfg, [spoiler, ZeroMember(8)])
    assert res.backtracks == 1
    assert [e.level for e in res.events if e.kind == "caught"] == [0]
    assert res.prefix.startswith("0001")
    assert res.problems() == []


def test_large_scaling_is_reported():
    with pytest.raises(ThresholdViolation):
        construct(ConstructionConfig([4, 4], delta=[F(3, 8), F(1, 32)]), zero_roster(8))
    # the tail term of the margin must carry the 2^(N_0) factor
    c, d = default_ladder(2)
    halfway = (c[1] - d[0]) / 2
    assert ConstructionConfig([4, 4], delta=[c[0] / 2, halfway]).margin_problems()


def test_default_ladder_is_increasing_and_below_two():
    for K in range(1, 6):
        c, d = default_ladder(K)
        seq = [x for p in zip(c, d) for x in p]
        assert all(x < y for x, y in zip(seq, seq[1:])) and 0 < seq[0] and seq[-1] < 2
        assert ConstructionConfig([3] * K).margin_problems() == []


def test_lp_catchers_end_to_end():
    res = construct(ConstructionConfig([4, 4]), [CatcherMember(8), CatcherMember(8)])
    assert res.problems() == []
    for k, sk in enumerate(res.chain):
        assert res.certificates[len(sk)][2] <= res.config.d[k]


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.text("01", min_size=1, max_size=6), st.integers(0, 2), st.integers(0, 6)),
                min_size=1, max_size=3))
def test_backtracking_soundness(scripts):
    snaps, acc = [], None
    for path, b, _ in scripts:
        V = doubling_gale(6, path, F(1, 4), (b,) if b < 2 else (0, 1))
        acc = V if acc is None else GaleVector(tuple(x + y for x, y in zip(acc, V)))
        snaps.append(acc)
    start = min(s for _, _, s in scripts)
    spoilers = [ScriptedMember(6, snaps, start=start)]
    res = construct(ConstructionConfig([3, 3]), spoilers + [ZeroMember(6)])
    assert res.problems() == []
    # once abandoned, nothing is enumerated below a candidate again
    abandoned = []
    for e in res.events:
        if e.kind == "caught":
            abandoned.append(e.string)
        elif e.kind == "enumerate":
            assert not any(e.string.startswith(a) and e.string != a for a in abandoned)


def test_bundle_json():
    spoiler = ScriptedMember(8, [doubling_gale(8, "0000", F(1, 4), (0,))], start=1)
    res = construct(ConstructionConfig([4, 4]), [spoiler, ZeroMember(8)])
    obj = json.loads(json.dumps(res.to_json()))
    assert obj["prefix"] == res.prefix
    assert obj["backtracks"] == 1
    assert obj["problems"] == []
    assert obj["roster"][0]["type"] == "scripted"
    assert len(obj["traces"]) >= 3
    assert all("/" in x or x.lstrip("-").isdigit() for x in obj["config"]["c"])
    assert [v["level"] for v in obj["V"]] == [0, 1]
