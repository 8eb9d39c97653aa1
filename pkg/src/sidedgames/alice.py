"""Alice's strategies, the reductions that compose them, and the game harness."""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from fractions import Fraction
from itertools import product
from typing import Callable, Iterable, Sequence

from . import gales as G
from . import referee as R
from .gales import GaleTree, GaleVector, SidePolicy
from .referee import GameSpec, GameState, Kind
from .strings import (
    BitString,
    block_roots,
    complement_leaves,
    conditional_measure,
    cylinder_leaves,
    format_rational,
    measure,
    strings_of_length,
    strings_upto,
)


class _Pass:
    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self):
        return "PASS"

    def __deepcopy__(self, memo):
        return self


PASS = _Pass()


class CompositionError(RuntimeError):
    """A sub-strategy ended without delivering what its wrapper needs."""


class StrategyMismatch(ValueError):
    pass


class Strategy:
    def next_move(self, state: GameState):
        raise NotImplementedError


def _jsonable(v):
    if isinstance(v, Fraction):
        return format_rational(v)
    if isinstance(v, StrategyHandle):
        return v.describe()
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


@dataclass(frozen=True, eq=False)
class StrategyHandle:
    name: str
    params: dict
    build: Callable[[], Strategy] = field(repr=False)

    def fresh(self) -> Strategy:
        return self.build()

    def describe(self) -> dict:
        return {"name": self.name, "params": {k: _jsonable(v) for k, v in sorted(self.params.items())}}


def next_move(strategy: Strategy, state: GameState):
    if state.status.status is not R.Status.ONGOING:
        raise R.MoveError("GAME_OVER")
    if state.turn != "alice":
        raise R.MoveError("OUT_OF_TURN")
    return strategy.next_move(state)


# -- sub-game views --------------------------------------------------------

class SubGame:
    """A virtual game inside a cylinder of the real one.

    ``comps`` selects real components for the view; ``None`` entries are
    zero components.  Each record pairs a move of the sub-game with the
    index of the real snapshot that answers it (-1 for the empty start).
    """

    def __init__(self, spec: GameSpec, root: BitString = "", comps: Sequence[int | None] | None = None):
        self.spec = spec
        self.root = root
        self.comps = None if comps is None else tuple(comps)
        self.moves: list[tuple[BitString, int]] = []
        self._cache: dict[int, tuple] = {}

    def record(self, leaf: BitString, g: int) -> None:
        self.moves.append((leaf, g))

    @property
    def leaves(self) -> list[BitString]:
        return [s for s, _ in self.moves]

    def _snapshot(self, state: GameState, g: int):
        if g in self._cache:
            return self._cache[g]
        spec, n = self.spec, self.spec.n
        comps = self.comps if self.comps is not None else tuple(range(state.spec.k))
        zero = GaleTree.constant(n, 0)
        if g < 0:
            V = GaleVector(tuple(zero for _ in comps))
        else:
            W = state.history[g]
            V = GaleVector(tuple(zero if j is None else G.subtree(W[j], self.root, n) for j in comps))
        P = None
        if spec.kind in R.PARTIAL_FAMILY:
            if g < 0 or state.spec.kind not in R.PARTIAL_FAMILY:
                P = tuple(SidePolicy() for _ in comps)
            else:
                pols = state.policies[g]
                P = tuple(SidePolicy() if j is None else G.policy_subtree(pols[j], self.root, n) for j in comps)
        self._cache[g] = (V, P)
        return V, P

    def view(self, state: GameState) -> GameState:
        hist, pols = [], []
        for _, g in self.moves:
            V, P = self._snapshot(state, g)
            hist.append(V)
            if P is not None:
                pols.append(P)
        st = GameState(self.spec, tuple(self.leaves), tuple(hist), tuple(pols))
        if hist:
            st = replace(st, status=R.check_win(st))
        return st

    def current(self, state: GameState) -> GaleVector:
        return self._snapshot(state, len(state.history) - 1)[0]


def _won(st: GameState) -> bool:
    return st.status.status is R.Status.ALICE_WON


def _caught_above(state: GameState, rho: BitString, thr: Fraction, strict: bool = False) -> bool:
    V = state.latest
    if V is None:
        return False
    top = len(rho) if strict else len(rho) + 1
    return any(V.l1(rho[:j]) >= thr for j in range(top))


def _fresh(state: GameState, leaves: Iterable[BitString]) -> Iterable[BitString]:
    seen = state.enumerated_set
    return (s for s in leaves if s not in seen)


# -- elementary strategies ---------------------------------------------------

class ListStrategy(Strategy):
    """Enumerate a fixed list of leaves until the game is won."""

    def __init__(self, leaves: Sequence[BitString], stop_on_win: bool = True):
        self.leaves = list(leaves)
        self.stop_on_win = stop_on_win
        self.pos = 0

    def next_move(self, state):
        if self.stop_on_win and _won(state):
            return PASS
        seen = state.enumerated_set
        while self.pos < len(self.leaves) and self.leaves[self.pos] in seen:
            self.pos += 1
        if self.pos == len(self.leaves):
            return PASS
        self.pos += 1
        return self.leaves[self.pos - 1]


def single_leaf(leaf: BitString) -> StrategyHandle:
    """Enumerate one leaf and stop."""
    return StrategyHandle("single_leaf", {"leaf": leaf}, lambda: ListStrategy([leaf]))


def lex_until_win(n: int) -> StrategyHandle:
    """Enumerate leaves in lexicographic order until the game is won."""
    return StrategyHandle("lex_until_win", {"n": n}, lambda: ListStrategy(list(strings_of_length(n))))


def muchgale_strategy(l: int, i: int, n: int) -> StrategyHandle:
    if not 0 <= i < l <= n:
        raise ValueError("need i < l <= n")
    leaves = [s for s in strings_of_length(n) if s[i] == "0"]
    return StrategyHandle("muchgale", {"l": l, "i": i, "n": n}, lambda: ListStrategy(leaves, stop_on_win=False))


# -- k = 1 variance strategy ---------------------------------------------------

class VarianceK1(Strategy):
    def __init__(self, a: Fraction, m: int):
        self.a, self.m = Fraction(a), m
        self.plan = [s for s in cylinder_leaves("1", m) if s != "1" * m]
        self.mode = "scan"
        self.finish: list[BitString] = []

    def next_move(self, state):
        if state.spec.kind not in R.PARTIAL_FAMILY or state.spec.k != 1:
            raise StrategyMismatch("the k=1 variance strategy needs a one-component partial game")
        if _won(state):
            return PASS
        if self.mode == "scan":
            b = state.latest_policies[0].get("")
            if b is not None:
                self.mode = "finish"
                self.finish = cylinder_leaves(str(1 - b), self.m)
        if self.mode == "finish":
            for s in _fresh(state, self.finish):
                return s
            return PASS
        for s in _fresh(state, self.plan):
            return s
        return PASS


def variance_k1_strategy(a, m: int) -> StrategyHandle:
    a = Fraction(a)
    if m < 2 or Fraction(1, 2 ** (m - 1)) > 1 / (2 * a):
        raise ValueError("m too small for a")
    return StrategyHandle("variance_k1", {"a": a, "m": m}, lambda: VarianceK1(a, m))


# -- lexicographic variance strategy ---------------------------------------------

def attention_scan(state: GameState, order: str = "deep") -> BitString | None:
    """First node receiving winning attention, deepest or shallowest first."""
    n = state.spec.n
    lengths = range(n, -1, -1) if order == "deep" else range(n + 1)
    for d in lengths:
        for rho in strings_of_length(d):
            if R.winning_attention(state, rho):
                return rho
    return None


def lex_variance_order(n: int) -> list[BitString]:
    out = []
    for rho in block_roots(n):
        out.extend(cylinder_leaves(rho, n))
    return out


class LexVariance(Strategy):
    def __init__(self, a: Fraction, delta: Fraction, n: int):
        self.a, self.delta, self.n = a, delta, n
        self.order = lex_variance_order(n)
        self.finish: list[BitString] | None = None
        self.attention: BitString | None = None

    def next_move(self, state):
        if _won(state):
            return PASS
        if self.finish is None and state.latest is not None:
            rho = attention_scan(state, "deep")
            if rho is not None:
                self.attention = rho
                self.finish = complement_leaves(rho, self.n, state.enumerated_set)
        for s in _fresh(state, self.finish if self.finish is not None else self.order):
            return s
        return PASS


def lex_variance_strategy(a, delta, n: int) -> StrategyHandle:
    if n < 2 or n % 2:
        raise ValueError("n must be even and at least 2")
    a, delta = Fraction(a), Fraction(delta)
    return StrategyHandle("lex_variance", {"a": a, "delta": delta, "n": n}, lambda: LexVariance(a, delta, n))


# -- nesting -------------------------------------------------------------

class Nest(Strategy):
    def __init__(self, outer: StrategyHandle, inner: StrategyHandle, c0, c1, n0: int, n1: int):
        self.outer_h, self.inner_h = outer, inner
        self.c0, self.c1, self.n0, self.n1 = Fraction(c0), Fraction(c1), n0, n1
        self.outer = outer.fresh()
        self.outer_game: SubGame | None = None
        self.block: BitString | None = None
        self.inner = None
        self.inner_game: SubGame | None = None

    def next_move(self, state):
        if state.spec.n != self.n0 + self.n1:
            raise StrategyMismatch("depth does not match the nested strategy")
        if _won(state):
            return PASS
        scale = state.spec.scale
        if self.outer_game is None:
            self.outer_game = SubGame(GameSpec.sided(self.c0, self.n0, scale=scale * self.c1))
        thr = scale * self.c1
        while True:
            if self.block is not None:
                if _caught_above(state, self.block, thr):
                    self.outer_game.record(self.block, len(state.history) - 1)
                    self.block = None
                else:
                    view = self.inner_game.view(state)
                    mv = self.inner.next_move(view)
                    if mv is PASS:
                        raise CompositionError(f"inner strategy under {self.block} stopped before its goal")
                    self.inner_game.record(mv, len(state.enumerated))
                    return self.block + mv
            mv = self.outer.next_move(self.outer_game.view(state))
            if mv is PASS:
                return PASS
            self.block = mv
            self.inner = self.inner_h.fresh()
            self.inner_game = SubGame(GameSpec.sided(self.c1, self.n1, scale=scale), root=mv)


def nest(outer: StrategyHandle, inner: StrategyHandle, c0, c1, n0: int, n1: int) -> StrategyHandle:
    params = {"outer": outer, "inner": inner, "c0": Fraction(c0), "c1": Fraction(c1), "n0": n0, "n1": n1}
    return StrategyHandle("nest", params, lambda: Nest(outer, inner, c0, c1, n0, n1))


# -- dynamic goal to fixed goal ------------------------------------------------

class DynamicToFixed(Strategy):
    def __init__(self, dyn: StrategyHandle, a, delta, n_tilde: int, n_hat: int):
        self.dyn_h = dyn
        self.a, self.delta = Fraction(a), Fraction(delta)
        self.nt, self.nh = n_tilde, n_hat
        self.blocks = list(strings_of_length(n_tilde))
        self.pos = 0
        self.acc = Fraction(0)
        self.game: SubGame | None = None
        self.dyn = None
        self.finish: list[BitString] | None = None
        self.log: list[tuple[BitString, Fraction]] = []

    def _close(self, state, rho):
        frac = measure(self.game.leaves)
        inc = Fraction(1, 2 ** self.nt) * (1 - frac)
        assert inc < self.a * self.delta, "block increment reached a*delta"
        self.acc += inc
        self.log.append((rho, inc))
        self.pos += 1
        self.game = None
        if self.acc >= self.a * self.delta:
            rest = [s for r in self.blocks[self.pos:] for s in cylinder_leaves(r, self.nt + self.nh)]
            self.finish = rest

    def next_move(self, state):
        if state.spec.n != self.nt + self.nh:
            raise StrategyMismatch("depth does not match the dynamic-to-fixed wrapper")
        if _won(state):
            return PASS
        scale = state.spec.scale
        thr = state.spec.catch_threshold
        while self.finish is None and self.pos < len(self.blocks):
            rho = self.blocks[self.pos]
            if self.game is None:
                if _caught_above(state, rho, thr):
                    self.game = SubGame(GameSpec.dynamic_sided(self.a, self.nh, scale=scale), root=rho)
                    self._close(state, rho)
                    continue
                self.game = SubGame(GameSpec.dynamic_sided(self.a, self.nh, scale=scale), root=rho)
                self.dyn = self.dyn_h.fresh()
            elif _caught_above(state, rho, thr, strict=True):
                self._close(state, rho)
                continue
            view = self.game.view(state)
            if view.history and _won(view):
                self._close(state, rho)
                continue
            mv = self.dyn.next_move(view)
            if mv is PASS:
                raise CompositionError(f"dynamic strategy in block {rho} passed without winning")
            self.game.record(mv, len(state.enumerated))
            return rho + mv
        for s in _fresh(state, self.finish or ()):
            return s
        return PASS


def dynamic_to_fixed(dyn: StrategyHandle, a, delta, n_tilde: int, n_hat: int) -> StrategyHandle:
    a, delta = Fraction(a), Fraction(delta)
    if Fraction(1, 2 ** n_tilde) >= a * delta:
        raise ValueError("need 2^-n_tilde < a*delta")
    params = {"dyn": dyn, "a": a, "delta": delta, "n_tilde": n_tilde, "n_hat": n_hat}
    return StrategyHandle("dynamic_to_fixed", params, lambda: DynamicToFixed(dyn, a, delta, n_tilde, n_hat))


# -- restricted to dynamic -------------------------------------------------

class RestrictedToDynamic(Strategy):
    def __init__(self, restricted: StrategyHandle, a, delta, n_tilde: int, n_hat: int):
        self.r_h = restricted
        self.a, self.delta = Fraction(a), Fraction(delta)
        self.nt, self.nh = n_tilde, n_hat
        self.inner = restricted.fresh()
        self.game: SubGame | None = None
        self.block: list[BitString] | None = None
        self.block_root: BitString | None = None
        self.finish: list[BitString] | None = None
        self.attention: BitString | None = None

    def next_move(self, state):
        n = self.nt + self.nh
        if state.spec.n != n:
            raise StrategyMismatch("depth does not match the restriction wrapper")
        if _won(state):
            return PASS
        if self.game is None:
            scale = state.spec.scale * (1 - Fraction(1, 2 ** self.nh))
            self.game = SubGame(GameSpec.restricted_dynamic_sided(self.a, self.delta, self.nt, scale=scale))
        if self.finish is None and state.latest is not None:
            rho = attention_scan(state, "shallow")
            if rho is not None:
                self.attention = rho
                self.finish = complement_leaves(rho, n, state.enumerated_set)
        if self.finish is not None:
            for s in _fresh(state, self.finish):
                return s
            return PASS
        while True:
            if self.block is not None:
                for s in _fresh(state, self.block):
                    return s
                self.game.record(self.block_root, len(state.history) - 1)
                self.block = None
            mv = self.inner.next_move(self.game.view(state))
            if mv is PASS:
                return PASS
            reserved = mv + "0" * self.nh
            self.block_root = mv
            self.block = [s for s in cylinder_leaves(mv, n) if s != reserved]


def restricted_to_dynamic(restricted: StrategyHandle, a, delta, n_tilde: int, n_hat: int) -> StrategyHandle:
    params = {"restricted": restricted, "a": Fraction(a), "delta": Fraction(delta),
              "n_tilde": n_tilde, "n_hat": n_hat}
    return StrategyHandle("restricted_to_dynamic", params,
                          lambda: RestrictedToDynamic(restricted, a, delta, n_tilde, n_hat))


# -- variance game to restricted game ---------------------------------------------

class _Level:
    """One node of the l-level recursion: a variance game on 2^m below ``root``."""

    def __init__(self, owner: "VarianceToRestricted", root: BitString, level: int, k: int):
        self.owner, self.root, self.level = owner, root, level
        o = owner
        spec = GameSpec.variance_partial(o.a, o.Delta, o.m, k)
        self.game = SubGame(spec, root=root)
        self.strategy = o.var_h.fresh()
        self.mop_up = False
        self.child: _Level | None = None
        self.child_leaf: BitString | None = None

    def next_leaf(self, state: GameState) -> BitString | None:
        o = self.owner
        while True:
            if self.child is not None:
                s = self.child.next_leaf(state)
                if s is not None:
                    return s
                self.game.record(self.child_leaf, len(state.history) - 1)
                self.child = None
            mv = self._instruction(state)
            if mv is None:
                return None
            if self.level == 1:
                self.game.record(mv, len(state.enumerated))
                return self.root + mv
            self.child_leaf = mv
            self.child = _Level(o, self.root + mv, self.level - 1, state.spec.k)

    def _instruction(self, state) -> BitString | None:
        view = self.game.view(state)
        done = set(view.enumerated)
        if not self.mop_up:
            if view.history and _won(view):
                self.mop_up = True
            else:
                mv = self.strategy.next_move(view)
                if mv is PASS:
                    self.mop_up = True
                else:
                    return mv
        for s in strings_of_length(self.owner.m):
            if s not in done:
                return s
        return None


class VarianceToRestricted(Strategy):
    def __init__(self, var: StrategyHandle, a, Delta, m: int, l: int, delta_hat):
        if l < 1:
            raise ValueError("need at least one level")
        self.var_h = var
        self.a, self.Delta, self.delta_hat = Fraction(a), Fraction(Delta), Fraction(delta_hat)
        self.m, self.l = m, l
        self.top: _Level | None = None
        self.finish: list[BitString] | None = None
        self.attention: BitString | None = None

    def next_move(self, state):
        n = self.m * self.l
        if state.spec.n != n:
            raise StrategyMismatch("depth does not match the level recursion")
        if _won(state):
            return PASS
        if self.top is None:
            self.top = _Level(self, "", self.l, state.spec.k)
        if self.finish is None and state.latest is not None:
            rho = attention_scan(state, "shallow")
            if rho is not None:
                self.attention = rho
                self.finish = complement_leaves(rho, n, state.enumerated_set)
        if self.finish is not None:
            for s in _fresh(state, self.finish):
                return s
            return PASS
        s = self.top.next_leaf(state)
        return PASS if s is None else s


def variance_to_restricted(var: StrategyHandle, a, Delta, m: int, l: int, delta_hat) -> StrategyHandle:
    params = {"var": var, "a": Fraction(a), "Delta": Fraction(Delta), "m": m, "l": l,
              "delta_hat": Fraction(delta_hat)}
    return StrategyHandle("variance_to_restricted", params,
                          lambda: VarianceToRestricted(var, a, Delta, m, l, delta_hat))


# -- induction on the number of components -------------------------------------

class VarianceInduction(Strategy):
    def __init__(self, a, k: int, sub: StrategyHandle, c, Delta_hat, m: int):
        if k < 2 or m % 2:
            raise ValueError("need k >= 2 and even m")
        self.a, self.k, self.sub_h = Fraction(a), k, sub
        self.c, self.Dh, self.m = Fraction(c), Fraction(Delta_hat), m
        self.h = m // 2
        self.c0: Fraction | None = None
        self.phase = 0
        self.game: SubGame | None = None
        self.sub = None
        self.block: list[BitString] | None = None
        self.block_root: BitString | None = None
        self.treated: list[BitString] = []
        self.pending: list[BitString] = []
        self.skipped: list[int] = []

    def _sub_spec(self, scale) -> GameSpec:
        return GameSpec.partial_sided(self.c, self.h, self.k - 1, scale=scale)

    def _start_phase2(self):
        self.phase = 2
        done = set(self.treated)
        self.pending = [r for r in strings_of_length(self.h) if r not in done]
        self.game = None
        self.block = None

    def next_move(self, state):
        if state.spec.kind not in R.PARTIAL_FAMILY or state.spec.k != self.k or state.spec.n != self.m:
            raise StrategyMismatch("game shape does not match the induction strategy")
        if _won(state):
            return PASS
        unit = state.spec.scale
        if self.phase == 0:
            # the sub-strategy's opening move cannot depend on the scale
            self.game = SubGame(self._sub_spec(unit), comps=tuple(range(1, self.k)))
            self.sub = self.sub_h.fresh()
            mv = self.sub.next_move(self.game.view(state))
            if mv is PASS:
                raise CompositionError("sub-strategy passed on an empty game")
            self.block_root, self.block = mv, cylinder_leaves(mv, self.m)
            self.phase = 1
        if self.c0 is None and state.history:
            self.c0 = state.history[0][0](state.enumerated[0]) / unit
            scale = 1 - self.c0 - self.Dh
            if scale <= 0:
                self.skipped.append(1)
                self._start_phase2()
            else:
                self.game.spec = self._sub_spec(scale * unit)
        while self.phase == 1:
            if self.block is not None:
                for s in _fresh(state, self.block):
                    return s
                self.game.record(self.block_root, len(state.history) - 1)
                self.treated.append(self.block_root)
                self.block = None
            view = self.game.view(state)
            mv = PASS if (view.history and _won(view)) else self.sub.next_move(view)
            if mv is PASS:
                self._start_phase2()
                break
            self.block_root, self.block = mv, cylinder_leaves(mv, self.m)
        scale = self.c0 - self.Dh
        if scale <= 0:
            if 2 not in self.skipped:
                self.skipped.append(2)
            return PASS
        seen = state.enumerated_set
        while True:
            if self.game is not None:
                view = self.game.view(state)
                while not (view.history and _won(view)):
                    mv = self.sub.next_move(view)
                    if mv is PASS:
                        break
                    if self.block_root + mv in seen:
                        # already enumerated: the current snapshot answers it
                        self.game.record(mv, len(state.history) - 1)
                        view = self.game.view(state)
                        continue
                    self.game.record(mv, len(state.enumerated))
                    return self.block_root + mv
                self.game = None
            if not self.pending:
                return PASS
            self.block_root = self.pending.pop(0)
            comps = (0,) + (None,) * (self.k - 2)
            self.game = SubGame(self._sub_spec(scale * unit), root=self.block_root, comps=comps)
            self.sub = self.sub_h.fresh()


def induction_problems(a, k: int, c, sub_eps, Delta_hat, Delta, m: int) -> list[str]:
    """Unmet hypotheses of the induction step for a sub-strategy winning (c, m/2, k-1) at cost sub_eps."""
    a, c, eps, Dh, D = (Fraction(x) for x in (a, c, sub_eps, Delta_hat, Delta))
    out = []
    if k < 2:
        out.append("need k >= 2")
    if Fraction(1, 2 ** m) * (Dh / (2 * k)) ** 2 < D:
        out.append(f"2^-{m} (Delta_hat/2k)^2 < Delta = {D}")
    if 1 - c + 2 * Dh > (1 - 2 * eps) / a:
        out.append(f"1 - c + 2 Delta_hat = {1 - c + 2 * Dh} exceeds (1 - 2 eps)/a = {(1 - 2 * eps) / a}")
    return out


def variance_induction_strategy(a, k: int, sub: StrategyHandle, c, Delta_hat, m: int,
                                sub_eps=None, Delta=None) -> StrategyHandle:
    """With ``sub_eps`` and ``Delta`` given, the induction hypotheses are checked up front."""
    if sub_eps is not None and Delta is not None:
        problems = induction_problems(a, k, c, sub_eps, Delta_hat, Delta, m)
        if problems:
            raise ValueError("; ".join(problems))
    params = {"a": Fraction(a), "k": k, "sub": sub, "c": Fraction(c), "Delta_hat": Fraction(Delta_hat), "m": m}
    return StrategyHandle("variance_induction", params,
                          lambda: VarianceInduction(a, k, sub, c, Delta_hat, m))


class LexUntilThreshold(Strategy):
    """Partial-sided sub-strategy: lexicographic leaves until the root reaches c."""

    def next_move(self, state):
        if _won(state):
            return PASS
        for s in _fresh(state, strings_of_length(state.spec.n)):
            return s
        return PASS


def lex_until_threshold() -> StrategyHandle:
    return StrategyHandle("lex_until_threshold", {}, LexUntilThreshold)


# -- pipeline ----------------------------------------------------------------

class InfeasibleTarget(ValueError):
    def __init__(self, message: str, binding: str):
        super().__init__(message)
        self.binding = binding


@dataclass(frozen=True)
class PipelineParams:
    target_c: Fraction
    target_eps: Fraction
    a: Fraction
    delta: Fraction
    k_iter: int
    n_tilde: int
    n_hat: int
    a_restricted: Fraction
    delta_restricted: Fraction
    n_restricted: int
    n_reserve: int
    Delta_scale: Fraction
    n_total: int

    @property
    def level_c(self) -> Fraction:
        return 1 - 2 * self.delta

    @property
    def level_eps(self) -> Fraction:
        return 1 - self.a * self.delta

    @property
    def achieved_c(self) -> Fraction:
        return self.level_c ** self.k_iter

    @property
    def cost_bound(self) -> Fraction:
        return self.level_eps ** self.k_iter

    @property
    def dynamic_slack(self) -> Fraction:
        """Certified lower bound on 1 - cost of the dynamic layer."""
        if self.a <= 1:
            # won after the first answer in each block
            return 1 - Fraction(1, 2 ** self.n_hat)
        return Fraction(1, 2 ** self.n_hat)

    def violations(self) -> list[str]:
        out = []
        aL, dL = self.a / 2, 2 * self.delta
        if (1 - aL * dL) ** self.k_iter > self.target_eps:
            out.append("cost: (1 - a*delta)^k > eps")
        if (1 - dL) ** self.k_iter < self.target_c:
            out.append("threshold: (1 - delta)^k < c")
        if self.delta > self.dynamic_slack / (2 * self.a):
            out.append("delta > eps'/(2a)")
        if Fraction(1, 2 ** self.n_tilde) >= self.a * self.delta:
            out.append("2^-n_tilde >= a*delta")
        if self.Delta_scale != Fraction(1, 2 ** self.n_reserve):
            out.append("Delta_scale != 2^-n_reserve")
        if self.a_restricted != 2 * self.a:
            out.append("restricted a must be twice the dynamic a")
        if self.n_hat != self.n_restricted + self.n_reserve:
            out.append("dynamic depth must equal restricted depth plus reserve")
        if self.n_total != self.k_iter * (self.n_tilde + self.n_hat):
            out.append("total depth mismatch")
        return out

    def to_json(self) -> dict:
        out = {}
        for name in self.__dataclass_fields__:
            v = getattr(self, name)
            out[name] = format_rational(v) if isinstance(v, Fraction) else v
        out["achieved_c"] = format_rational(self.achieved_c)
        out["cost_bound"] = format_rational(self.cost_bound)
        return out

    @classmethod
    def from_json(cls, obj) -> "PipelineParams":
        from .strings import parse_rational
        kw = {}
        for name, f in cls.__dataclass_fields__.items():
            v = obj[name]
            kw[name] = int(v) if f.type in ("int", int) else parse_rational(v)
        return cls(**kw)

    def game(self) -> GameSpec:
        return GameSpec.sided(self.achieved_c, self.n_total)


def pipeline_strategy(p: PipelineParams) -> StrategyHandle:
    lex = lex_variance_strategy(p.a_restricted, p.delta_restricted, p.n_restricted)
    dyn = restricted_to_dynamic(lex, p.a_restricted, p.delta_restricted, p.n_restricted, p.n_reserve)
    level = dynamic_to_fixed(dyn, p.a, p.delta, p.n_tilde, p.n_hat)
    depth = p.n_tilde + p.n_hat
    out, c_out, d_out = level, p.level_c, depth
    for _ in range(p.k_iter - 1):
        out = nest(out, level, c_out, p.level_c, d_out, depth)
        c_out *= p.level_c
        d_out += depth
    return out


DEPTH_BUDGET = 14
A_GRID = (Fraction(1), Fraction(1, 2), Fraction(1, 4))
DELTA_GRID = tuple(Fraction(j, 32) for j in range(1, 16))


def build_pipeline(target_c, target_eps, depth_budget: int = DEPTH_BUDGET) -> tuple[StrategyHandle, PipelineParams]:
    """Search the parameter grid for the shallowest composed strategy meeting the target."""
    c, eps = Fraction(target_c), Fraction(target_eps)
    if not 0 < c < 1 or eps <= 0:
        raise ValueError("need 0 < c < 1 and eps > 0")
    best = None
    binding = "threshold: (1 - delta)^k < c"
    for a, delta, k in product(A_GRID, DELTA_GRID, range(1, 8)):
        n_res, n_r = 1, 2
        n_hat = n_r + n_res
        nt = 1
        while Fraction(1, 2 ** nt) >= a * delta:
            nt += 1
        p = PipelineParams(c, eps, a, delta, k, nt, n_hat, 2 * a, Fraction(1, 4), n_r, n_res,
                           Fraction(1, 2 ** n_res), k * (nt + n_hat))
        bad = p.violations()
        if bad:
            binding = bad[0]
            continue
        if p.n_total > depth_budget:
            binding = f"depth {p.n_total} exceeds budget {depth_budget}"
            continue
        key = (p.n_total, k, -delta, -a)
        if best is None or key < best[0]:
            best = (key, p)
    if best is None:
        if c > eps:
            binding = ("threshold above cost: with a <= 1 the level cost 1 - a*delta exceeds the level "
                       "threshold 1 - 2*delta, and larger a needs the lexicographic strategy beyond the depth budget")
        raise InfeasibleTarget(f"no parameters for c={c}, eps={eps} within depth {depth_budget}", binding)
    p = best[1]
    return pipeline_strategy(p), p


# -- harness -----------------------------------------------------------------

@dataclass
class PlayResult:
    state: GameState
    records: list[dict]
    failure: str | None = None

    @property
    def won(self) -> bool:
        return self.state.status.status is R.Status.ALICE_WON and self.failure is None

    @property
    def cost(self) -> Fraction:
        return R.cost(self.state)

    def trace_text(self) -> str:
        return "".join(R.dump_record(r) + "\n" for r in self.records)


def trace_header(spec: GameSpec, alice: StrategyHandle | dict, baby: dict) -> dict:
    desc = alice.describe() if isinstance(alice, StrategyHandle) else alice
    return {"type": "header", "game": spec.to_json(), "alice": desc, "baby": baby}


def play(spec: GameSpec, alice: StrategyHandle, adversary, max_rounds: int | None = None) -> PlayResult:
    from . import baby as B

    state = R.new_game(spec)
    strat = alice.fresh()
    records = [trace_header(spec, alice, adversary.describe())]
    failure = None
    limit = max_rounds if max_rounds is not None else 1 << spec.n
    while state.status.status is R.Status.ONGOING:
        if state.round >= limit:
            failure = "round limit reached"
            break
        mv = strat.next_move(state)
        if mv is PASS:
            failure = "strategy passed without a win"
            break
        state = R.alice_move(state, mv)
        records.append(R.alice_record(state))
        try:
            move = B.respond(adversary, state)
        except B.NoValidMove:
            state = R.forfeit(state, B.NO_VALID_MOVE)
            records.append(R.baby_record(state, None))
            break
        try:
            state = R.baby_move(state, move.vector, move.policies)
        except R.MoveRejected as e:
            state = R.forfeit(state, e.rule)
            records.append(R.baby_record(state, None))
            break
        records.append(R.baby_record(state, move.vector, move.policies))
    return PlayResult(state, records, failure)


def replay(lines: Iterable[str]) -> PlayResult:
    """Re-validate a recorded trace and rebuild its records."""
    recs = [json.loads(x) for x in lines if x.strip()]
    if not recs or recs[0].get("type") != "header":
        raise ValueError("trace has no header")
    head = recs[0]
    spec = GameSpec.from_json(head["game"])
    state = R.new_game(spec)
    out = [head]
    for rec in recs[1:]:
        if rec["mover"] == "alice":
            state = R.alice_move(state, rec["move"])
            out.append(R.alice_record(state))
        elif rec.get("vector") is None:
            reason = rec["status"].split("(", 1)[1].rstrip(")") if "(" in rec["status"] else "NO_VALID_MOVE"
            state = R.forfeit(state, reason)
            out.append(R.baby_record(state, None))
        else:
            V = GaleVector.from_json(rec["vector"])
            P = tuple(SidePolicy.from_json(p) for p in rec["policies"]) if rec.get("policies") is not None else None
            state = R.baby_move(state, V, P)
            out.append(R.baby_record(state, V, P))
    return PlayResult(state, out)
