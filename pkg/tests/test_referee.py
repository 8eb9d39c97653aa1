from fractions import Fraction as F

import pytest
from hypothesis import given, settings, strategies as st

from sidedgames import referee as R
from sidedgames.gales import GaleTree, GaleVector, SidePolicy
from sidedgames.referee import GameSpec

import referee_fuzz as RF


def sided_example_vector(**changes):
    M1 = {"": F(1, 4), "1": F(1, 2), "11": 1, "10": 0, "0": 0, "00": 0, "01": 0}
    M1.update(changes)
    return GaleVector((GaleTree.constant(2, 0), GaleTree.from_mapping(2, M1)))


def sided_start():
    st_ = R.new_game(GameSpec.sided(F(1, 2), 2))
    return R.alice_move(st_, "11")


def test_new_game_and_spec_validation():
    assert R.new_game(GameSpec.sided(F(1, 2), 3)).round == 0
    assert R.new_game(GameSpec.variance_partial(4, F(1, 64), 4, 1)).turn == "alice"
    with pytest.raises(R.SpecError):
        GameSpec.sided(1, 2, d=F(1, 2))
    assert GameSpec.sided(F(1, 3), 2).d == 1


def test_alice_move_errors():
    s = sided_start()
    with pytest.raises(R.MoveError) as e:
        R.alice_move(s, "10")
    assert e.value.code == "OUT_OF_TURN"
    s = R.baby_move(s, sided_example_vector())
    with pytest.raises(R.MoveError) as e:
        R.alice_move(s, "11")
    assert e.value.code == "DUPLICATE"
    with pytest.raises(R.MoveError) as e:
        R.alice_move(s, "1")
    assert e.value.code == "WRONG_LENGTH"


def test_sided_example_accepted_and_ongoing():
    s = R.baby_move(sided_start(), sided_example_vector())
    assert s.status is R.ONGOING
    assert s.root_l1() == F(1, 4)


def test_sidedness_rejection():
    # raising 10 above 11 with the supermartingale rule intact
    V = sided_example_vector(**{"": F(3, 4), "1": F(3, 2), "10": 2, "11": 1})
    with pytest.raises(R.MoveRejected) as e:
        R.baby_move(sided_start(), V)
    assert e.value.rule == "SIDEDNESS"


def test_rule_one_is_checked_before_sidedness():
    # 10 -> 2 alone breaks 2 M(1) >= M(10) + M(11) first
    with pytest.raises(R.MoveRejected) as e:
        R.baby_move(sided_start(), sided_example_vector(**{"10": 2}))
    assert e.value.rule == "SUPERMARTINGALE"


def test_catching_rejection():
    V = GaleVector((GaleTree.constant(2, 0), GaleTree.constant(2, 0)))
    with pytest.raises(R.MoveRejected) as e:
        R.baby_move(sided_start(), V)
    assert e.value.rule == "CATCHING"


def test_game_over_after_win():
    s = R.new_game(GameSpec.sided(F(1, 2), 1))
    s = R.alice_move(s, "1")
    V = GaleVector((GaleTree.constant(1, 0), GaleTree.from_mapping(1, {"": F(1, 2), "1": 1})))
    s = R.baby_move(s, V)
    assert s.status.status is R.Status.ALICE_WON
    with pytest.raises(R.MoveError) as e:
        R.alice_move(s, "0")
    assert e.value.code == "GAME_OVER"


def test_dynamic_win_boundary():
    spec = GameSpec.dynamic_sided(1, 2)
    V = GaleVector((GaleTree.from_mapping(2, {"": F(3, 4), "0": F(3, 2), "00": F(3, 2), "01": F(3, 2)}),
                    GaleTree.constant(2, 0)))
    s = R.GameState(spec, ("00", "01"), (V,))
    # deficit 1/4 <= (1/1)(1 - 1/2)
    assert R.check_win(s).detail == "type-a"
    # deficit 3/4 exceeds 1/2
    s = R.GameState(spec, ("00", "01"), (V.scaled(F(1, 3)),))
    assert R.check_win(s).status is R.Status.ONGOING


def test_variance_type_b_not_from_constant():
    spec = GameSpec.variance_partial(F(1, 2), F(1, 64), 2, 1)
    s = R.alice_move(R.new_game(spec), "00")
    V = GaleVector((GaleTree.constant(2, 1),))
    s = R.baby_move(s, V, [SidePolicy()])
    assert s.status.detail != "type-b"


def test_sided_threshold_inclusive():
    spec = GameSpec.sided(F(1, 2), 1)
    s = R.GameState(spec, ("1",), (GaleVector((GaleTree.constant(1, 0), GaleTree.from_mapping(1, {"": F(1, 2), "1": 1}))),))
    assert R.check_win(s).status is R.Status.ALICE_WON


def test_winning_attention_examples():
    spec = GameSpec.dynamic_sided(1, 2)
    V = GaleVector((GaleTree.from_mapping(2, {"": F(3, 4), "0": 1, "00": 1, "01": 1, "1": F(1, 2), "10": F(1, 2), "11": F(1, 2)}),
                    GaleTree.constant(2, 0)))
    s = R.GameState(spec, ("00", "01", "10"), (V,))
    assert R.winning_attention(s, "0") is False  # nothing left below 0
    one = R.GameState(spec, ("00",), (V,))
    assert R.winning_attention(one, "0")
    # deficit 1/4 at the root, untouched fraction 3/4
    assert R.winning_attention(one, "")
    s = R.GameState(spec, ("00", "01", "10"), (V,))
    # root deficit 1/4 vs untouched 1/4: equality counts
    assert R.winning_attention(s, "")


def test_cost_examples():
    spec = GameSpec.sided(F(1, 2), 3)
    assert R.cost(R.new_game(spec)) == 0
    assert R.cost(R.GameState(spec, ("000", "001", "010"))) == F(3, 8)


def test_scaling_leaves_decisions_unchanged():
    spec = GameSpec.sided(F(1, 2), 2)
    big = spec.with_scale(3)
    V = sided_example_vector()
    s = R.baby_move(sided_start(), V)
    t = R.baby_move(R.alice_move(R.new_game(big), "11"), V.scaled(3))
    assert str(s.status) == str(t.status)
    bad = sided_example_vector(**{"10": 2})
    for state, W in ((sided_start(), bad), (R.alice_move(R.new_game(big), "11"), bad.scaled(3))):
        with pytest.raises(R.MoveRejected):
            R.baby_move(state, W)


@pytest.mark.parametrize("name", sorted(RF.CONFIGS))
def test_fuzzed_moves_agree_with_slow_validator(name):
    tally, dis, mono = RF.run_fuzz(name, 150, seed=7)
    assert not dis, dis[0][3:]
    assert not mono
    assert tally["ACCEPT"] > 0 and sum(tally.values()) - tally["ACCEPT"] > 0


@given(st.integers(0, 10 ** 6))
@settings(max_examples=15, deadline=None)
def test_winning_attention_at_root_implies_type_a(seed):
    import random
    from sidedgames import baby as B
    rng = random.Random(seed)
    spec = GameSpec.dynamic_sided(rng.choice([F(1, 2), 1, 2]), 3)
    s = R.new_game(spec)
    leaves = [f"{i:03b}" for i in range(8)]
    rng.shuffle(leaves)
    for leaf in leaves[: rng.randint(1, 6)]:
        if s.status.status is not R.Status.ONGOING:
            break
        s = R.alice_move(s, leaf)
        s = R.baby_move(s, B.respond(B.random_adversary(seed), s).vector)
        if R.winning_attention(s, "") and R.cost(s) < 1:
            assert R.check_win(s).detail == "type-a"
