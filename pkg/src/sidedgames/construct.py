"""Desk-scale driver for building a prefix on which every roster gale stays bounded.

Each level k plays a sided game with thresholds (c_k, d_k) inside the
cylinder of the previous level's candidate, against the scaled sum of
roster members 0..k.  Candidates are taken as uncatchable until a catch
shows up, at which point the deeper work is dropped and the level game
continues with the catch as Baby's answer.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from . import gales as G
from . import referee as R
from .alice import PASS, StrategyHandle
from .baby import MoveProblem
from .gales import GaleTree, GaleVector
from .referee import GameSpec, GameState
from .simplexlp import LE, Status, solve
from .strings import BitString, format_rational, measure, strings_of_length, strings_upto


class ConstructionError(RuntimeError):
    pass


class ThresholdViolation(ConstructionError):
    """The ladder leaves no room for the roster tail."""


# -- roster ------------------------------------------------------------------

class RosterMember:
    """A source of raw gale pairs (0-sided, 1-sided) whose roots stay at most 1."""

    name = "member"

    def __init__(self, depth: int):
        self.depth = depth
        self.current = GaleVector.zero(depth, 2)

    def observe(self, sigma: BitString) -> None:
        """Called after every enumeration anywhere in the construction."""

    def describe(self) -> dict:
        return {"type": self.name}


class ZeroMember(RosterMember):
    name = "zero"


class ScriptedMember(RosterMember):
    """Replays given snapshots, advancing one snapshot per enumeration.

    Snapshots whose root exceeds 1 are scaled down together by one factor,
    which is recorded.
    """

    name = "scripted"

    def __init__(self, depth: int, snapshots: Sequence[GaleVector], start: int = 0):
        super().__init__(depth)
        snaps = list(snapshots)
        for V in snaps:
            if V.depth != depth or V.k != 2:
                raise ValueError("scripted snapshot has the wrong shape")
            for j, M in enumerate(V):
                if not G.is_supermartingale(M) or not G.is_i_sided(M, j):
                    raise ValueError(f"scripted component {j} is not a {j}-sided supermartingale")
        for a, b in zip(snaps, snaps[1:]):
            if not all(G.dominates(y, x) for x, y in zip(a, b)):
                raise ValueError("scripted snapshots are not nondecreasing")
        top = max((V.l1("") for V in snaps), default=Fraction(0))
        self.prescale = Fraction(1) if top <= 1 else 1 / top
        self.snapshots = [V.scaled(self.prescale) for V in snaps]
        self.start = start
        self.ticks = 0

    def observe(self, sigma: BitString) -> None:
        self.ticks += 1
        t = self.ticks - self.start
        if t >= 1 and self.snapshots:
            self.current = self.snapshots[min(t, len(self.snapshots)) - 1]

    def describe(self) -> dict:
        return {"type": self.name, "snapshots": len(self.snapshots), "start": self.start,
                "prescale": format_rational(self.prescale)}


class CatcherMember(RosterMember):
    """Raises capital 1 on each enumerated string as cheaply as it can.

    The move is an exact LP over one-sided increments; once the raw root
    would exceed 1 the member stops growing.
    """

    name = "lp_catcher"

    def __init__(self, depth: int):
        super().__init__(depth)
        self.solves = 0

    def observe(self, sigma: BitString) -> None:
        prev = self.current
        if any(prev.l1(sigma[:j]) >= 1 for j in range(len(sigma) + 1)):
            return
        spec = GameSpec.sided(0, self.depth)
        prob = MoveProblem(spec, prev, catches=(sigma,))
        lp = prob.build()
        lp.add({prob.var(j, ""): 1 for j in range(2)}, LE, 1 - prev.l1(""))
        res = solve(lp)
        self.solves += 1
        if res.status is Status.OPTIMAL:
            self.current = prob.vector_from(res.assignment)


# -- configuration ----------------------------------------------------------------

def default_ladder(K: int) -> tuple[list[Fraction], list[Fraction]]:
    """d_k = (3/2) 3^(k-K+1) and c_k = d_k / 2.

    Inside a level-k cylinder the combined root stays below c_k, so at most
    c_k / d_k = 1/2 of the cylinder can be caught and a lexicographic level
    strategy capped at measure 1/2 always finds a candidate.
    """
    d = [Fraction(3, 2) / 3 ** (K - 1 - k) for k in range(K)]
    c = [x / 2 for x in d]
    return c, d


@dataclass
class ConstructionConfig:
    depths: list[int]
    c: list[Fraction] | None = None
    d: list[Fraction] | None = None
    delta: list[Fraction] | None = None
    cost_cap: Fraction = Fraction(1, 2)

    def __post_init__(self):
        K = len(self.depths)
        if K < 1 or any(n < 1 for n in self.depths):
            raise ValueError("need at least one level of positive depth")
        if self.c is None or self.d is None:
            c, d = default_ladder(K)
            self.c = self.c or c
            self.d = self.d or d
        self.c = [Fraction(x) for x in self.c]
        self.d = [Fraction(x) for x in self.d]
        if self.delta is None:
            self.delta = default_scalings(self.c, self.d, self.depths)
        self.delta = [Fraction(x) for x in self.delta]
        self.cost_cap = Fraction(self.cost_cap)

    @property
    def K(self) -> int:
        return len(self.depths)

    def offsets(self) -> list[int]:
        out, s = [], 0
        for n in self.depths:
            s += n
            out.append(s)
        return out

    @property
    def total_depth(self) -> int:
        return sum(self.depths)

    def margin_problems(self) -> list[str]:
        out = []
        K, c, d, dl = self.K, self.c, self.d, self.delta
        if len(c) != K or len(d) != K or len(dl) != K:
            return ["ladder lengths do not match the number of levels"]
        seq = [x for pair in zip(c, d) for x in pair]
        if not (0 < seq[0] and all(x < y for x, y in zip(seq, seq[1:])) and seq[-1] < 2):
            out.append("thresholds must satisfy 0 < c_0 < d_0 < c_1 < ... < 2")
        if any(x <= 0 for x in dl):
            out.append("scalings must be positive")
        if dl[0] >= c[0]:
            out.append(f"delta_0 = {dl[0]} is not below c_0 = {c[0]}")
        N = self.offsets()
        for k in range(K - 1):
            tail = dl[k + 1] * 2 ** N[k]
            if d[k] + tail >= c[k + 1]:
                out.append(f"margin at level {k}: d_{k} + delta_{k + 1} * 2^{N[k]} = {d[k] + tail} >= c_{k + 1} = {c[k + 1]}")
        return out

    def to_json(self) -> dict:
        return {
            "depths": self.depths,
            "c": [format_rational(x) for x in self.c],
            "d": [format_rational(x) for x in self.d],
            "delta": [format_rational(x) for x in self.delta],
            "cost_cap": format_rational(self.cost_cap),
        }


def default_scalings(c: Sequence[Fraction], d: Sequence[Fraction], depths: Sequence[int]) -> list[Fraction]:
    """delta_0 = c_0/2 and delta_{k+1} = (c_{k+1} - d_k) 2^(-N_k - 1)."""
    out = [Fraction(c[0]) / 2]
    N = 0
    for k in range(len(depths) - 1):
        N += depths[k]
        out.append((Fraction(c[k + 1]) - Fraction(d[k])) / 2 ** (N + 1))
    return out


# -- level strategies ---------------------------------------------------------------

class LexLevel:
    """Lexicographic leaves inside the level cylinder, stopping at the cost cap."""

    def __init__(self, cap: Fraction):
        self.cap = cap

    def next_move(self, state: GameState):
        if state.status.status is R.Status.ALICE_WON:
            return PASS
        n = state.spec.n
        seen = state.enumerated_set
        for s in strings_of_length(n):
            if s not in seen:
                if measure(list(seen) + [s]) > self.cap:
                    return None
                return s
        return None


def lex_level(cap=Fraction(1, 2)) -> StrategyHandle:
    cap = Fraction(cap)
    return StrategyHandle("lex_level", {"cap": cap}, lambda: LexLevel(cap))


@dataclass
class _Level:
    k: int
    root: BitString
    spec: GameSpec
    strategy: object
    leaves: list[BitString] = field(default_factory=list)
    answers: list[GaleVector] = field(default_factory=list)
    candidate: BitString | None = None


@dataclass
class Event:
    kind: str
    level: int
    string: BitString
    detail: str = ""

    def to_json(self) -> dict:
        return {"event": self.kind, "level": self.level, "string": self.string, "detail": self.detail}


class Construction:
    def __init__(self, config: ConstructionConfig, roster: Sequence[RosterMember],
                 strategies: Sequence[StrategyHandle] | None = None, max_steps: int = 10000):
        problems = config.margin_problems()
        if problems:
            raise ThresholdViolation("; ".join(problems))
        if len(roster) != config.K:
            raise ValueError("need one roster member per level")
        N = config.total_depth
        if any(m.depth != N for m in roster):
            raise ValueError("roster members must have the total depth")
        self.config = config
        self.roster = list(roster)
        self.handles = list(strategies) if strategies else [lex_level(config.cost_cap)] * config.K
        self.max_steps = max_steps
        self.V: list[list[BitString]] = [[] for _ in range(config.K)]
        self.abandoned: list[BitString] = []
        self.events: list[Event] = []
        self.levels: list[_Level] = []
        self.games: list[_Level] = []
        self.steps = 0
        self._open(0, "")

    # combined capital seen by level k
    def combined(self, k: int) -> GaleVector:
        out = None
        for j in range(k + 1):
            V = self.roster[j].current.scaled(self.config.delta[j])
            out = V if out is None else GaleVector(tuple(a + b for a, b in zip(out, V)))
        return out

    def _open(self, k: int, root: BitString) -> None:
        cfg = self.config
        spec = GameSpec.sided(cfg.c[k], cfg.depths[k], d=cfg.d[k])
        lv = _Level(k, root, spec, self.handles[k].fresh())
        self.levels.append(lv)
        self.games.append(lv)

    def _view(self, lv: _Level) -> GameState:
        st = GameState(lv.spec, tuple(lv.leaves[: len(lv.answers)]), tuple(lv.answers))
        if lv.answers:
            st = GameState(st.spec, st.enumerated, st.history, status=R.check_win(st))
        return st

    @property
    def chain(self) -> list[BitString]:
        return [lv.candidate for lv in self.levels if lv.candidate is not None]

    @property
    def complete(self) -> bool:
        return len(self.levels) == self.config.K and self.levels[-1].candidate is not None

    def _caught_level(self) -> int | None:
        """Shallowest level whose candidate now has a catching point in its own segment."""
        for lv in self.levels:
            if lv.candidate is None:
                return None
            total = self.combined(lv.k)
            for j in range(len(lv.root), len(lv.candidate) + 1):
                if total.l1(lv.candidate[:j]) >= lv.spec.catch_threshold:
                    return lv.k
        return None

    def step(self) -> None:
        if self.complete and self._caught_level() is None:
            raise ConstructionError("construction already complete")
        self.steps += 1
        if self.steps > self.max_steps:
            raise ConstructionError("step limit reached")
        k = self._caught_level()
        if k is not None:
            lv = self.levels[k]
            # Baby's answer to the level game is the catching snapshot, restricted to the cylinder
            lv.answers.append(G.vector_subtree(self.combined(k), lv.root, lv.spec.n))
            self.events.append(Event("caught", k, lv.candidate))
            for deeper in self.levels[k + 1:]:
                if deeper.candidate is not None:
                    self.events.append(Event("discard", deeper.k, deeper.candidate))
            self.abandoned.append(lv.candidate)
            lv.candidate = None
            del self.levels[k + 1:]
        lv = self.levels[-1]
        view = self._view(lv)
        mv = lv.strategy.next_move(view)
        if mv is PASS:
            raise ConstructionError(
                f"level {lv.k} strategy reports a win although the combined root stays below c_{lv.k}")
        if mv is None:
            raise ConstructionError(f"level {lv.k} strategy exhausted its cost budget")
        sigma = lv.root + mv
        assert not any(sigma.startswith(a) for a in self.abandoned if len(a) < len(sigma)), \
            "re-enumerated below an abandoned candidate"
        lv.leaves.append(mv)
        lv.candidate = sigma
        self.V[lv.k].append(sigma)
        self.events.append(Event("enumerate", lv.k, sigma))
        for m in self.roster:
            m.observe(sigma)
        if lv.k + 1 < self.config.K:
            self._open(lv.k + 1, sigma)

    def run(self) -> "ConstructionResult":
        while not self.complete or self._caught_level() is not None:
            self.step()
        return self.result()

    # -- certificates ---------------------------------------------------------
    def result(self) -> "ConstructionResult":
        prefix = self.chain[-1]
        cfg = self.config
        table = []
        for m in range(len(prefix) + 1):
            s = prefix[:m]
            per = [cfg.delta[j] * self.roster[j].current.l1(s) for j in range(cfg.K)]
            table.append((s, per, sum(per, Fraction(0))))
        return ConstructionResult(cfg, prefix, self.chain, table, [list(v) for v in self.V],
                                  self.events, [m.describe() for m in self.roster],
                                  [h.describe() for h in self.handles],
                                  [game_trace(g) for g in self.games])


def game_trace(lv: _Level) -> dict:
    moves = []
    for i, leaf in enumerate(lv.leaves):
        ans = lv.answers[i].to_json() if i < len(lv.answers) else None
        moves.append({"leaf": leaf, "answer": ans})
    return {"level": lv.k, "root": lv.root, "c": format_rational(lv.spec.c),
            "d": format_rational(lv.spec.d), "n": lv.spec.n, "moves": moves}


@dataclass
class ConstructionResult:
    config: ConstructionConfig
    prefix: BitString
    chain: list[BitString]
    certificates: list[tuple[BitString, list[Fraction], Fraction]]
    V: list[list[BitString]]
    events: list[Event]
    roster: list[dict]
    strategies: list[dict]
    traces: list[dict] = field(default_factory=list)

    @property
    def backtracks(self) -> int:
        return sum(1 for e in self.events if e.kind == "caught")

    def problems(self) -> list[str]:
        out = []
        for s, _, total in self.certificates:
            if total >= 2:
                out.append(f"certificate at {s!r} is {total}")
        for k, Vk in enumerate(self.V):
            if measure(Vk) > Fraction(1, 2 ** k):
                out.append(f"m(V_{k}) = {measure(Vk)} exceeds 2^-{k}")
            if not any(self.prefix.startswith(s) for s in Vk):
                out.append(f"prefix not in [V_{k}]")
        start = 0
        for k, sk in enumerate(self.chain):
            for m in range(start, len(sk) + 1):
                partial = sum(self.certificates[m][1][: k + 1], Fraction(0))
                if partial >= self.config.d[k]:
                    out.append(f"levels <= {k} reach d_{k} at {sk[:m]!r}")
            start = len(sk)
        return out

    def to_json(self) -> dict:
        return {
            "config": self.config.to_json(),
            "prefix": self.prefix,
            "chain": self.chain,
            "certificates": [
                {"string": s, "levels": [format_rational(x) for x in per], "total": format_rational(t)}
                for s, per, t in self.certificates
            ],
            "V": [{"level": k, "strings": v, "measure": format_rational(measure(v))} for k, v in enumerate(self.V)],
            "events": [e.to_json() for e in self.events],
            "backtracks": self.backtracks,
            "roster": self.roster,
            "strategies": self.strategies,
            "problems": self.problems(),
            "traces": self.traces,
        }


def construct(config: ConstructionConfig, roster: Sequence[RosterMember],
              strategies: Sequence[StrategyHandle] | None = None) -> ConstructionResult:
    return Construction(config, roster, strategies).run()


def doubling_gale(depth: int, path: BitString, root: Fraction, comps_used=(0, 1)) -> GaleVector:
    """A sided pair that doubles along ``path``: component b bets all-in on bit b."""
    comps = []
    for b in (0, 1):
        if b not in comps_used:
            comps.append(GaleTree.constant(depth, 0))
            continue
        vals = {}
        for s in strings_upto(depth):
            v = Fraction(root)
            for j, bit in enumerate(s):
                if j < len(path) and int(path[j]) == b:
                    v = v * 2 if bit == path[j] else Fraction(0)
            vals[s] = v
        comps.append(GaleTree.from_mapping(depth, vals))
    # only bets on bits equal to b, so component b is b-sided
    return GaleVector(tuple(comps))
