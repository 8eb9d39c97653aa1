"""Game definitions, move validation and win detection."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from enum import Enum
from fractions import Fraction
from typing import Iterable, Sequence

from . import gales as G
from .gales import GaleTree, GaleVector, SidePolicy
from .stats import cond_variance
from .strings import BitString, conditional_measure, format_rational, measure, parse_rational


class Kind(Enum):
    SIDED = "SIDED"
    DYNAMIC_SIDED = "DYNAMIC_SIDED"
    RESTRICTED_DYNAMIC_SIDED = "RESTRICTED_DYNAMIC_SIDED"
    PARTIAL_SIDED = "PARTIAL_SIDED"
    DYNAMIC_PARTIAL = "DYNAMIC_PARTIAL"
    RESTRICTED_DYNAMIC_PARTIAL = "RESTRICTED_DYNAMIC_PARTIAL"
    VARIANCE_PARTIAL = "VARIANCE_PARTIAL"
    CLASS_GAME = "CLASS_GAME"
    VARIANCE_CLASS_GAME = "VARIANCE_CLASS_GAME"


SIDED_FAMILY = {Kind.SIDED, Kind.DYNAMIC_SIDED, Kind.RESTRICTED_DYNAMIC_SIDED}
PARTIAL_FAMILY = {Kind.PARTIAL_SIDED, Kind.DYNAMIC_PARTIAL, Kind.RESTRICTED_DYNAMIC_PARTIAL, Kind.VARIANCE_PARTIAL}
CLASS_FAMILY = {Kind.CLASS_GAME, Kind.VARIANCE_CLASS_GAME}
FIXED_GOAL = {Kind.SIDED, Kind.PARTIAL_SIDED, Kind.CLASS_GAME}
DYNAMIC_GOAL = {Kind.DYNAMIC_SIDED, Kind.RESTRICTED_DYNAMIC_SIDED, Kind.DYNAMIC_PARTIAL, Kind.RESTRICTED_DYNAMIC_PARTIAL}
VARIANCE_GOAL = {Kind.VARIANCE_PARTIAL, Kind.VARIANCE_CLASS_GAME}
RESTRICTED = {Kind.RESTRICTED_DYNAMIC_SIDED, Kind.RESTRICTED_DYNAMIC_PARTIAL}
LEAF_CATCH = RESTRICTED | VARIANCE_GOAL


class SpecError(ValueError):
    pass


def _q(x) -> Fraction | None:
    return None if x is None else Fraction(x)


@dataclass(frozen=True)
class GameSpec:
    kind: Kind
    n: int
    k: int = 2
    c: Fraction | None = None
    d: Fraction | None = None
    a: Fraction | None = None
    delta: Fraction | None = None
    Delta: Fraction | None = None
    class_id: str | None = None
    scale: Fraction = Fraction(1)

    def __post_init__(self):
        for name in ("c", "d", "a", "delta", "Delta", "scale"):
            object.__setattr__(self, name, _q(getattr(self, name)))
        self.validate()

    def validate(self) -> None:
        K = self.kind
        if self.n < 1:
            raise SpecError("depth must be at least 1")
        if self.k < 1:
            raise SpecError("need at least one component")
        if self.scale <= 0:
            raise SpecError("scale must be positive")
        if K in SIDED_FAMILY and self.k != 2:
            raise SpecError("sided games use exactly two components")
        if K in FIXED_GOAL:
            if self.c is None or self.c < 0:
                raise SpecError("threshold c must be a nonnegative rational")
            if self.d is None:
                raise SpecError("catching threshold d missing")
            if K is Kind.SIDED and self.c > self.d:
                raise SpecError("need c <= d")
        if K in DYNAMIC_GOAL | VARIANCE_GOAL and (self.a is None or self.a <= 0):
            raise SpecError("a must be positive")
        if K in RESTRICTED and (self.delta is None or self.delta <= 0):
            raise SpecError("delta must be positive")
        if K in VARIANCE_GOAL and (self.Delta is None or self.Delta <= 0):
            raise SpecError("Delta must be positive")
        if K in CLASS_FAMILY:
            if not self.class_id:
                raise SpecError("class games need a class id")
            G.class_by_id(self.class_id)

    @property
    def depth(self) -> int:
        return self.n

    @property
    def catch_threshold(self) -> Fraction:
        base = self.d if self.kind is Kind.SIDED else Fraction(1)
        return self.scale * base

    def with_scale(self, scale) -> "GameSpec":
        return replace(self, scale=Fraction(scale))

    # -- constructors -------------------------------------------------------
    @classmethod
    def sided(cls, c, n, d=1, scale=1):
        return cls(Kind.SIDED, n, 2, c=c, d=d, scale=scale)

    @classmethod
    def dynamic_sided(cls, a, n, scale=1):
        return cls(Kind.DYNAMIC_SIDED, n, 2, a=a, scale=scale)

    @classmethod
    def restricted_dynamic_sided(cls, a, delta, n, scale=1):
        return cls(Kind.RESTRICTED_DYNAMIC_SIDED, n, 2, a=a, delta=delta, scale=scale)

    @classmethod
    def partial_sided(cls, c, n, k, scale=1):
        return cls(Kind.PARTIAL_SIDED, n, k, c=c, d=1, scale=scale)

    @classmethod
    def dynamic_partial(cls, a, n, k, scale=1):
        return cls(Kind.DYNAMIC_PARTIAL, n, k, a=a, scale=scale)

    @classmethod
    def restricted_dynamic_partial(cls, a, delta, n, k, scale=1):
        return cls(Kind.RESTRICTED_DYNAMIC_PARTIAL, n, k, a=a, delta=delta, scale=scale)

    @classmethod
    def variance_partial(cls, a, Delta, m, k, scale=1):
        return cls(Kind.VARIANCE_PARTIAL, m, k, a=a, Delta=Delta, scale=scale)

    @classmethod
    def class_game(cls, class_id, c, n, k=1, scale=1):
        return cls(Kind.CLASS_GAME, n, k, c=c, d=1, class_id=class_id, scale=scale)

    @classmethod
    def variance_class_game(cls, class_id, a, Delta, m, k=1, scale=1):
        return cls(Kind.VARIANCE_CLASS_GAME, m, k, a=a, Delta=Delta, class_id=class_id, scale=scale)

    def to_json(self) -> dict:
        out = {"kind": self.kind.value, "n": self.n, "k": self.k, "scale": format_rational(self.scale)}
        for name in ("c", "d", "a", "delta", "Delta"):
            v = getattr(self, name)
            if v is not None:
                out[name] = format_rational(v)
        if self.class_id:
            out["class_id"] = self.class_id
        return out

    @classmethod
    def from_json(cls, obj) -> "GameSpec":
        kw = {name: parse_rational(obj[name]) for name in ("c", "d", "a", "delta", "Delta") if name in obj}
        return cls(Kind(obj["kind"]), int(obj["n"]), int(obj.get("k", 2)), class_id=obj.get("class_id"),
                   scale=parse_rational(obj.get("scale", "1")), **kw)


class Status(Enum):
    ONGOING = "ONGOING"
    ALICE_WON = "ALICE_WON"
    INVALID_BABY = "INVALID_BABY"
    EXHAUSTED = "EXHAUSTED"


@dataclass(frozen=True)
class Outcome:
    status: Status
    detail: str | None = None

    def __str__(self):
        return self.status.value if self.detail is None else f"{self.status.value}({self.detail})"


ONGOING = Outcome(Status.ONGOING)


class MoveError(ValueError):
    """An illegal Alice move or a move made out of turn."""

    def __init__(self, code: str, message: str = ""):
        self.code = code
        super().__init__(f"{code}: {message}" if message else code)


class MoveRejected(ValueError):
    """A Baby move that breaks one of the rules; the state is unchanged."""

    def __init__(self, rule: str, witness=None):
        self.rule = rule
        self.witness = witness
        super().__init__(f"{rule} at {witness!r}" if witness is not None else rule)


@dataclass(frozen=True)
class GameState:
    spec: GameSpec
    enumerated: tuple[BitString, ...] = ()
    history: tuple[GaleVector, ...] = ()
    policies: tuple[tuple[SidePolicy, ...], ...] = ()
    status: Outcome = ONGOING

    @property
    def round(self) -> int:
        return len(self.history)

    @property
    def turn(self) -> str:
        return "alice" if len(self.enumerated) == len(self.history) else "baby"

    @property
    def latest(self) -> GaleVector | None:
        return self.history[-1] if self.history else None

    @property
    def latest_policies(self) -> tuple[SidePolicy, ...]:
        if self.policies:
            return self.policies[-1]
        return tuple(SidePolicy() for _ in range(self.spec.k))

    @property
    def enumerated_set(self) -> frozenset[BitString]:
        return frozenset(self.enumerated)

    def previous(self) -> GaleVector:
        return self.latest if self.latest is not None else GaleVector.zero(self.spec.n, self.spec.k)

    def root_l1(self) -> Fraction:
        return self.latest.l1("") if self.latest is not None else Fraction(0)


def new_game(spec: GameSpec) -> GameState:
    spec.validate()
    return GameState(spec)


def alice_move(state: GameState, sigma: BitString) -> GameState:
    if state.status.status is not Status.ONGOING:
        raise MoveError("GAME_OVER")
    if state.turn != "alice":
        raise MoveError("OUT_OF_TURN", "Baby has not answered yet")
    if len(sigma) != state.spec.n or not all(c in "01" for c in sigma):
        raise MoveError("WRONG_LENGTH", repr(sigma))
    if sigma in state.enumerated_set:
        raise MoveError("DUPLICATE", repr(sigma))
    return replace(state, enumerated=state.enumerated + (sigma,))


def cost(state: GameState) -> Fraction:
    return measure(state.enumerated)


def _caught(total: GaleTree, sigma: BitString, thr: Fraction) -> bool:
    return any(total(sigma[:j]) >= thr for j in range(len(sigma) + 1))


def caught_strings(state: GameState, V: GaleVector | None = None) -> frozenset[BitString]:
    V = state.latest if V is None else V
    if V is None:
        return frozenset()
    total = V.total()
    thr = state.spec.catch_threshold
    if state.spec.kind in LEAF_CATCH:
        return frozenset(s for s in state.enumerated if total(s) >= thr)
    return frozenset(s for s in state.enumerated if _caught(total, s, thr))


def _class_rules(spec: GameSpec):
    return G.class_rules(spec.class_id)


def validate_baby_move(state: GameState, V: GaleVector, P: Sequence[SidePolicy] | None = None) -> None:
    """Raise ``MoveRejected`` naming the first broken rule."""
    spec = state.spec
    if state.status.status is not Status.ONGOING:
        raise MoveError("GAME_OVER")
    if state.turn != "baby":
        raise MoveError("OUT_OF_TURN", "Alice has not moved yet")
    if V.k != spec.k or V.depth != spec.n:
        raise MoveRejected("SHAPE", (V.k, V.depth))
    # (1)
    for j, M in enumerate(V):
        chk = G.is_supermartingale(M)
        if not chk:
            raise MoveRejected("SUPERMARTINGALE", (j, chk.witness))
    # (2)
    if spec.kind in SIDED_FAMILY:
        for j, M in enumerate(V):
            for s in G.internal_nodes(spec.n):
                if not G.is_sided_at(M, s, j):
                    raise MoveRejected("SIDEDNESS", (j, s))
    elif spec.kind in PARTIAL_FAMILY:
        if P is None or len(P) != spec.k:
            raise MoveRejected("POLICY_RETRACTION", "missing policies")
        prev = state.latest_policies
        for j in range(spec.k):
            if any(len(s) >= spec.n for s in P[j].assignments):
                raise MoveRejected("POLICY_RETRACTION", (j, "policy reaches a leaf"))
            if not P[j].extends(prev[j]):
                raise MoveRejected("POLICY_RETRACTION", j)
        for j, M in enumerate(V):
            if not G.is_p_sided(M, P[j]):
                raise MoveRejected("SIDEDNESS", j)
    else:
        rules = _class_rules(spec)
        for j, M in enumerate(V):
            past = tuple(h[j] for h in state.history)
            if not rules.snapshot_ok(M) or not rules.transition_ok(past, M):
                raise MoveRejected("CLASS", j)
    # (3)
    prev = state.previous()
    for j, (M, M0) in enumerate(zip(V, prev)):
        if not G.dominates(M, M0):
            raise MoveRejected("DOMINATION", j)
    # (4)
    total = V.total()
    thr = spec.catch_threshold
    if spec.kind in LEAF_CATCH:
        rule = "RESTRICTION_I" if spec.kind in RESTRICTED else "CATCHING"
        for s in state.enumerated:
            if total(s) < thr:
                raise MoveRejected(rule, s)
    else:
        for s in state.enumerated:
            if not _caught(total, s, thr):
                raise MoveRejected("CATCHING", s)
    # (5)
    if spec.kind in RESTRICTED:
        cap = spec.scale * (1 + spec.delta)
        for s, v in total.items():
            if v > cap:
                raise MoveRejected("RESTRICTION_II", s)


def baby_move(state: GameState, V: GaleVector, P: Sequence[SidePolicy] | None = None) -> GameState:
    validate_baby_move(state, V, P)
    before = caught_strings(state) if state.latest is not None else frozenset()
    policies = state.policies
    if state.spec.kind in PARTIAL_FAMILY:
        policies = policies + (tuple(P),)
    new = replace(state, history=state.history + (V,), policies=policies)
    after = caught_strings(new)
    assert before <= after, "a caught string was released"
    return replace(new, status=check_win(new))


def forfeit(state: GameState, reason: str) -> GameState:
    return replace(state, status=Outcome(Status.INVALID_BABY, reason))


def deficit_ok(spec: GameSpec, root: Fraction, spent: Fraction) -> bool:
    """scale - root <= scale * (1/a) * (1 - spent)."""
    return spec.scale - root <= spec.scale * (1 - spent) / spec.a


def check_win(state: GameState) -> Outcome:
    spec = state.spec
    V = state.latest
    if V is None:
        return ONGOING
    root = V.l1("")
    won = None
    if spec.kind in FIXED_GOAL:
        if root >= spec.scale * spec.c:
            won = "threshold"
    else:
        if deficit_ok(spec, root, cost(state)):
            won = "type-a"
        elif spec.kind in VARIANCE_GOAL and state.enumerated:
            if cond_variance(V, state.enumerated) >= spec.scale ** 2 * spec.Delta:
                won = "type-b"
    if won:
        return Outcome(Status.ALICE_WON, won)
    if len(state.enumerated) == 1 << spec.n:
        return Outcome(Status.EXHAUSTED)
    return ONGOING


def winning_attention(state: GameState, rho: BitString, V: GaleVector | None = None) -> bool:
    spec = state.spec
    V = state.latest if V is None else V
    if V is None:
        return False
    frac = conditional_measure(state.enumerated, rho)
    if frac >= 1:
        return False
    return spec.scale - V.l1(rho) <= spec.scale * (1 - frac) / spec.a


# -- traces ------------------------------------------------------------------

def vector_digest(V: GaleVector, P: Sequence[SidePolicy] | None = None) -> str:
    payload = {"gales": V.to_json(), "policies": [p.to_json() for p in P] if P else None}
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def alice_record(state: GameState) -> dict:
    return {
        "round": state.round,
        "mover": "alice",
        "move": state.enumerated[-1],
        "cost": format_rational(cost(state)),
        "root_l1": format_rational(state.root_l1()),
        "status": str(state.status),
    }


def baby_record(state: GameState, V: GaleVector | None, P=None, full: bool = True) -> dict:
    rec = {
        "round": state.round - (1 if V is not None else 0),
        "mover": "baby",
        "move": vector_digest(V, P) if V is not None else None,
        "cost": format_rational(cost(state)),
        "root_l1": format_rational(state.root_l1()),
        "status": str(state.status),
    }
    if full and V is not None:
        rec["vector"] = V.to_json()
        if P is not None:
            rec["policies"] = [p.to_json() for p in P]
    return rec


def dump_record(rec: dict) -> str:
    return json.dumps(rec, sort_keys=True, separators=(",", ":"))
