"""Baby's side: exact best responses, heuristics, replays and exhaustive search."""
from __future__ import annotations

import copy
import json
import random
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence

from . import gales as G
from . import referee as R
from .gales import GaleTree, GaleVector, SidePolicy, index_of, string_at
from .referee import GameSpec, GameState, Kind
from .simplexlp import EQ, GE, LE, LinearProgram, Status, solve
from .strings import BitString, conditional_measure, measure


class AdvKind(Enum):
    LP_LEAF_CATCH = "LP_LEAF_CATCH"
    LP_DISJUNCTIVE = "LP_DISJUNCTIVE"
    LAZY_MINIMAL = "LAZY_MINIMAL"
    SCRIPTED = "SCRIPTED"
    RANDOM = "RANDOM"
    EXHAUSTIVE = "EXHAUSTIVE"


class NoValidMove(Exception):
    """No rule-abiding move exists for the requested choices."""


class BudgetExhausted(Exception):
    pass


NO_VALID_MOVE = "NO_VALID_MOVE"


@dataclass(frozen=True)
class Move:
    vector: GaleVector
    policies: tuple[SidePolicy, ...] | None = None


# -- the linear program of one Baby move ---------------------------------------

# policy modes for partial games at nodes outside the current policy
FREE, EQUAL = "free", "equal"


@dataclass
class MoveProblem:
    """Constraints of one Baby move expressed over increments X = M - previous."""

    spec: GameSpec
    prev: GaleVector
    past: tuple[GaleVector, ...] = ()
    policies: tuple[SidePolicy, ...] | None = None
    undefined_mode: str = FREE
    forced: Mapping[tuple[int, BitString], int | None] = field(default_factory=dict)
    catches: tuple[BitString, ...] = ()
    cuts: tuple[tuple[BitString, Fraction], ...] = ()
    objective: Mapping[int, Fraction] | None = None

    def __post_init__(self):
        self.n = self.spec.n
        self.k = self.spec.k
        self.width = (1 << (self.n + 1)) - 1

    def var(self, j: int, s: BitString) -> int:
        return j * self.width + index_of(s)

    def _orientation(self, j: int, s: BitString):
        """Required favoured child at s for component j: 0, 1, 'eq' or None."""
        spec = self.spec
        if spec.kind in R.SIDED_FAMILY:
            return j
        if spec.kind in R.PARTIAL_FAMILY:
            if (j, s) in self.forced:
                b = self.forced[(j, s)]
                return "eq" if b is None else b
            b = self.policies[j].get(s) if self.policies else None
            if b is not None:
                return b
            return "eq" if self.undefined_mode == EQUAL else None
        if isinstance(G.class_rules(spec.class_id), G.KastergaleRules):
            sides = G.favoured_sides(tuple(h[j] for h in self.past), s)
            return next(iter(sides)) if sides else None
        return None

    def build(self) -> LinearProgram:
        n, k, P = self.n, self.k, self.prev
        lp = LinearProgram(k * self.width)
        internal = list(G.internal_nodes(n))
        rules = G.class_rules(self.spec.class_id) if self.spec.kind in R.CLASS_FAMILY else None
        for j in range(k):
            M = P[j]
            for s in internal:
                x, x0, x1 = self.var(j, s), self.var(j, s + "0"), self.var(j, s + "1")
                slack = 2 * M(s) - M(s + "0") - M(s + "1")
                lp.add({x: 2, x0: -1, x1: -1}, GE, -slack)
                o = self._orientation(j, s)
                if o == "eq":
                    lp.add({x0: 1, x1: -1}, EQ, M(s + "1") - M(s + "0"))
                elif o in (0, 1):
                    hi, lo = s + str(o), s + str(1 - o)
                    lp.add({self.var(j, hi): 1, self.var(j, lo): -1}, GE, M(lo) - M(hi))
                if isinstance(rules, G.MuchgaleRules) and len(s) % rules.l == rules.i:
                    for b in "01":
                        lp.add({x: 1, self.var(j, s + b): -1}, GE, M(s + b) - M(s))
        thr = self.spec.catch_threshold
        for s in self.catches:
            need = thr - P.l1(s)
            if need > 0:
                lp.add({self.var(j, s): 1 for j in range(k)}, GE, need)
        for s, value in self.cuts:
            need = value - P.l1(s)
            if need > 0:
                lp.add({self.var(j, s): 1 for j in range(k)}, GE, need)
        if self.spec.kind in R.RESTRICTED:
            cap = self.spec.scale * (1 + self.spec.delta)
            for s, _ in P[0].items():
                room = cap - P.l1(s)
                if room < 0:
                    raise NoValidMove("previous move already breaks the cap")
                lp.add({self.var(j, s): 1 for j in range(k)}, LE, room)
        if self.objective is None:
            lp.minimize({self.var(j, ""): 1 for j in range(k)})
        else:
            lp.minimize(self.objective)
        return lp

    def vector_from(self, x: Sequence[Fraction]) -> GaleVector:
        comps = []
        for j in range(self.k):
            base = self.prev[j].values
            off = j * self.width
            comps.append(GaleTree(self.n, tuple(b + x[off + i] for i, b in enumerate(base))))
        return GaleVector(tuple(comps))

    def solve(self) -> tuple[Fraction, GaleVector] | None:
        res = solve(self.build())
        if res.status is not Status.OPTIMAL:
            return None
        V = self.vector_from(res.assignment)
        return V.l1(""), V


def committed_policies(spec: GameSpec, V: GaleVector, prev: Sequence[SidePolicy]) -> tuple[SidePolicy, ...]:
    """Extend each policy at exactly the nodes where ``V`` has unequal children."""
    out = []
    for j, M in enumerate(V):
        d = dict(prev[j].assignments)
        for s in G.internal_nodes(spec.n):
            if s in d:
                continue
            a, b = M(s + "0"), M(s + "1")
            if a != b:
                d[s] = 0 if a > b else 1
        out.append(SidePolicy(d))
    return tuple(out)


# -- exact minimisation over catching points -----------------------------------

@dataclass
class SearchStats:
    lps: int = 0
    nodes: int = 0


def min_root_disjunctive(base: MoveProblem, pending: Sequence[BitString], budget: int = 100000,
                         stats: SearchStats | None = None) -> tuple[Fraction, GaleVector] | None:
    """Minimum combined root over all choices of catching points for ``pending``.

    Branches top-down on each candidate catching node: either the node is
    used as a catching point, or it is not and every pending leaf below it
    is caught strictly deeper.  In the second case the supermartingale
    property of the combined capital gives the valid cut
    ``l1(node) >= threshold * m(pending below node | node)``.
    """
    stats = stats if stats is not None else SearchStats()
    thr = base.spec.catch_threshold
    pending = sorted(set(pending))
    best: list = [None]

    def caught(V: GaleVector, s: BitString) -> bool:
        return any(V.l1(s[:j]) >= thr for j in range(len(s) + 1))

    def rec(catches: tuple, cuts: tuple, cut_nodes: frozenset):
        stats.nodes += 1
        if stats.lps >= budget:
            raise BudgetExhausted(f"LP budget {budget} exhausted")
        stats.lps += 1
        prob = copy.copy(base)
        prob.catches = base.catches + catches
        prob.cuts = base.cuts + cuts
        sol = prob.solve()
        if sol is None:
            return
        value, V = sol
        if best[0] is not None and value >= best[0][0]:
            return
        open_leaves = [s for s in pending if not caught(V, s)]
        if not open_leaves:
            best[0] = sol
            return
        sigma = open_leaves[0]
        tau = next(sigma[:j] for j in range(len(sigma) + 1) if sigma[:j] not in cut_nodes)
        rec(catches + (tau,), cuts, cut_nodes)
        if len(tau) < base.n:
            below = [s for s in pending if s.startswith(tau)]
            cut = (tau, thr * conditional_measure(below, tau))
            rec(catches, cuts + (cut,), cut_nodes | {tau})

    rec((), (), frozenset())
    return best[0]


# -- adversaries ---------------------------------------------------------------

@dataclass(frozen=True)
class AdversaryHandle:
    kind: AdvKind
    seed: int = 0
    budget: int = 100000
    script: tuple = ()

    def describe(self) -> dict:
        out = {"kind": self.kind.value, "seed": self.seed}
        if self.kind is AdvKind.EXHAUSTIVE:
            out["budget"] = self.budget
        return out


def lp_leaf_catch() -> AdversaryHandle:
    return AdversaryHandle(AdvKind.LP_LEAF_CATCH)


def lp_disjunctive(budget: int = 100000) -> AdversaryHandle:
    return AdversaryHandle(AdvKind.LP_DISJUNCTIVE, budget=budget)


def lazy_minimal() -> AdversaryHandle:
    return AdversaryHandle(AdvKind.LAZY_MINIMAL)


def random_adversary(seed: int) -> AdversaryHandle:
    return AdversaryHandle(AdvKind.RANDOM, seed=seed)


def exhaustive(budget: int = 100000) -> AdversaryHandle:
    return AdversaryHandle(AdvKind.EXHAUSTIVE, budget=budget)


def scripted(records: Iterable[Mapping]) -> AdversaryHandle:
    moves = []
    for rec in records:
        if rec.get("mover") != "baby" or rec.get("vector") is None:
            continue
        V = GaleVector.from_json(rec["vector"])
        P = tuple(SidePolicy.from_json(p) for p in rec["policies"]) if rec.get("policies") is not None else None
        moves.append(Move(V, P))
    return AdversaryHandle(AdvKind.SCRIPTED, script=tuple(moves))


def _base_problem(state: GameState, **kw) -> MoveProblem:
    spec = state.spec
    return MoveProblem(spec, state.previous(), state.history,
                       policies=state.latest_policies if spec.kind in R.PARTIAL_FAMILY else None, **kw)


def _already_caught(state: GameState, sigma: BitString) -> bool:
    if state.latest is None:
        return False
    thr = state.spec.catch_threshold
    V = state.latest
    if state.spec.kind in R.LEAF_CATCH:
        return V.l1(sigma) >= thr
    return any(V.l1(sigma[:j]) >= thr for j in range(len(sigma) + 1))


def _finish(state: GameState, V: GaleVector, mode_relaxed: bool = True) -> Move:
    spec = state.spec
    if spec.kind in R.PARTIAL_FAMILY:
        return Move(V, committed_policies(spec, V, state.latest_policies))
    return Move(V)


def _keep(state: GameState) -> Move:
    return Move(state.latest, state.latest_policies if state.spec.kind in R.PARTIAL_FAMILY else None)


def _catch_options(state: GameState, sigma: BitString) -> list[BitString]:
    if state.spec.kind in R.LEAF_CATCH:
        return [sigma]
    return [sigma[:j] for j in range(len(sigma) + 1)]


def respond(adv: AdversaryHandle, state: GameState, forced=None) -> Move:
    """Baby's reply to the newest enumeration; raises ``NoValidMove``."""
    if state.turn != "baby":
        raise R.MoveError("OUT_OF_TURN")
    kind = adv.kind
    if kind is AdvKind.SCRIPTED:
        if state.round >= len(adv.script):
            raise NoValidMove("script exhausted")
        return adv.script[state.round]
    sigma = state.enumerated[-1]
    forced = forced or {}
    if _already_caught(state, sigma) and not forced:
        return _keep(state)
    if kind is AdvKind.LAZY_MINIMAL:
        return _lazy_minimal(state, sigma)
    if kind is AdvKind.RANDOM:
        return _random_move(adv, state, sigma)
    if kind is AdvKind.LP_LEAF_CATCH:
        sol = _base_problem(state, catches=(sigma,), forced=forced).solve()
        if sol is None:
            raise NoValidMove(f"cannot catch {sigma} at the leaf")
        return _finish(state, sol[1])
    # LP_DISJUNCTIVE and EXHAUSTIVE share the exact disjunctive minimum
    base = _base_problem(state, forced=forced)
    if state.spec.kind in R.LEAF_CATCH:
        base.catches = (sigma,)
        sol = base.solve()
    else:
        sol = min_root_disjunctive(base, [sigma], budget=adv.budget)
    if sol is None:
        raise NoValidMove(f"cannot catch {sigma}")
    return _finish(state, sol[1])


def _lazy_minimal(state: GameState, sigma: BitString) -> Move:
    spec = state.spec
    prob = _base_problem(state, catches=(sigma,))
    width = prob.width
    # smallest total increase; ties broken toward shallow nodes by tiny weights
    prob.objective = {j * width + i: Fraction(1) for j in range(spec.k) for i in range(width)}
    if spec.kind in R.PARTIAL_FAMILY:
        strict = copy.copy(prob)
        strict.undefined_mode = EQUAL
        a = strict.solve()
        b = prob.solve()
        if a is not None and (b is None or _objective(prob, a[1]) <= _objective(prob, b[1])):
            return Move(a[1], tuple(state.latest_policies))
        if b is None:
            raise NoValidMove(f"cannot catch {sigma}")
        return _finish(state, b[1])
    sol = prob.solve()
    if sol is None:
        raise NoValidMove(f"cannot catch {sigma}")
    return _finish(state, sol[1])


def _objective(prob: MoveProblem, V: GaleVector) -> Fraction:
    return sum((V[j].values[i] - prob.prev[j].values[i] for j in range(prob.k) for i in range(prob.width)),
               Fraction(0))


def _random_move(adv: AdversaryHandle, state: GameState, sigma: BitString) -> Move:
    rng = random.Random(adv.seed * 1_000_003 + state.round)
    options = _catch_options(state, sigma)
    rng.shuffle(options)
    for tau in options:
        prob = _base_problem(state, catches=(tau,))
        prob.objective = {v: Fraction(rng.randint(1, 9)) for v in range(prob.k * prob.width)}
        sol = prob.solve()
        if sol is not None:
            return _finish(state, sol[1])
    raise NoValidMove(f"cannot catch {sigma}")


# -- global minimum for a fixed enumerated set ----------------------------------

def min_root_for(spec: GameSpec, A: Iterable[BitString], budget: int = 100000,
                 stats: SearchStats | None = None,
                 policies: Sequence[SidePolicy] | None = None) -> tuple[Fraction, GaleVector] | None:
    """Least combined root of any single legal move catching all of ``A``.

    Policies of partial games are left free (the most permissive choice)
    unless ``policies`` pins them.
    """
    A = sorted(set(A))
    if spec.kind in R.PARTIAL_FAMILY and policies is None:
        policies = tuple(SidePolicy() for _ in range(spec.k))
    base = MoveProblem(spec, GaleVector.zero(spec.n, spec.k), policies=tuple(policies) if policies else None)
    if spec.kind in R.LEAF_CATCH:
        base.catches = tuple(A)
        return base.solve()
    return min_root_disjunctive(base, A, budget=budget, stats=stats)


# -- exhaustive soundness search ----------------------------------------------

class Verdict(Enum):
    ALICE_ALWAYS_WINS = "ALICE_ALWAYS_WINS"
    COUNTEREXAMPLE = "COUNTEREXAMPLE"
    BUDGET_EXHAUSTED = "BUDGET_EXHAUSTED"


@dataclass
class VerdictReport:
    verdict: Verdict
    branches: int
    max_cost: Fraction
    trace: list | None = None
    note: str = ("Baby's replies are round-greedy: each branch fixes the discrete choices and "
                 "minimises the root given the previous move; this is not a global optimum over rounds.")

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "branches": self.branches,
            "max_cost": f"{self.max_cost.numerator}/{self.max_cost.denominator}",
            "trace": self.trace,
            "note": self.note,
        }


def _menu(state: GameState) -> list[dict]:
    """Policy choices for this round: only p_0 at the root is branched on."""
    if state.spec.kind not in R.PARTIAL_FAMILY:
        return [{}]
    if "" in state.latest_policies[0]:
        return [{}]
    return [{(0, ""): None}, {(0, ""): 0}, {(0, ""): 1}]


def exhaustive_verdict(spec: GameSpec, alice, budget: int = 20000, cost_bound: Fraction | None = None,
                       strict: bool = True) -> VerdictReport:
    """Enumerate Baby's catching-point and root-policy choices against ``alice``.

    ``alice`` is a strategy handle with ``fresh()``.  Every branch must end
    with Alice winning at a cost below ``cost_bound`` (default 1, strict).
    """
    from .alice import PASS

    bound = Fraction(1) if cost_bound is None else Fraction(cost_bound)
    counter = {"branches": 0, "lps": 0}
    max_cost = [Fraction(0)]

    def within(c: Fraction) -> bool:
        return c < bound if strict else c <= bound

    def fail(trace, why):
        return VerdictReport(Verdict.COUNTEREXAMPLE, counter["branches"], max_cost[0], trace + [{"reason": why}])

    def dfs(state: GameState, strat, trace: list):
        if state.status.status is R.Status.ALICE_WON:
            counter["branches"] += 1
            c = R.cost(state)
            max_cost[0] = max(max_cost[0], c)
            return None if within(c) else fail(trace, f"cost {c} over bound")
        if state.status.status is R.Status.INVALID_BABY:
            counter["branches"] += 1
            return None
        if state.status.status is R.Status.EXHAUSTED:
            counter["branches"] += 1
            return fail(trace, "all leaves enumerated without a win")
        mv = strat.next_move(state)
        if mv is PASS:
            counter["branches"] += 1
            return fail(trace, "strategy passed without a win")
        st = R.alice_move(state, mv)
        trace = trace + [{"alice": mv}]
        sigma = mv
        found_any = False
        for forced in _menu(st):
            for tau in _catch_options(st, sigma):
                if counter["lps"] >= budget:
                    raise BudgetExhausted
                counter["lps"] += 1
                prob = _base_problem(st, catches=(tau,), forced=forced)
                try:
                    sol = prob.solve()
                except NoValidMove:
                    sol = None
                if sol is None:
                    continue
                V = sol[1]
                move = _finish(st, V)
                P = move.policies
                if P is not None and forced:
                    for (j, s), b in forced.items():
                        if b is not None:
                            P = tuple(p.with_(s, b) if i == j else p for i, p in enumerate(P))
                try:
                    nxt = R.baby_move(st, V, P)
                except R.MoveRejected:
                    continue
                found_any = True
                choice = {"catch": tau, "root_policy": None if not forced else forced[(0, "")],
                          "root_l1": f"{nxt.root_l1().numerator}/{nxt.root_l1().denominator}",
                          "status": str(nxt.status)}
                bad = dfs(nxt, copy.deepcopy(strat), trace + [choice])
                if bad is not None:
                    return bad
        if not found_any:
            counter["branches"] += 1
        return None

    try:
        bad = dfs(R.new_game(spec), alice.fresh(), [])
    except BudgetExhausted:
        return VerdictReport(Verdict.BUDGET_EXHAUSTED, counter["branches"], max_cost[0])
    if bad is not None:
        return bad
    return VerdictReport(Verdict.ALICE_ALWAYS_WINS, counter["branches"], max_cost[0])
