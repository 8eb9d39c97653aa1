"""Conditional expectation and variance of gale vectors over prefix-free sets."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .gales import GaleTree, GaleVector, is_i_sided, is_supermartingale
from .strings import BitString, cylinder_measure, is_prefix_free, measure, strings_of_length

DEFAULT_SQRTVAR_C = Fraction(4)


def budget_constant(k: int) -> Fraction:
    return Fraction(8 * k)


class PreconditionError(ValueError):
    """Raised when a claim check is handed an instance outside its hypotheses."""

    def __init__(self, violations: Sequence[str]):
        self.violations = tuple(violations)
        super().__init__("; ".join(self.violations))


def _check_set(V: GaleVector, B: Iterable[BitString]) -> list[BitString]:
    members = sorted(set(B))
    if not members:
        raise ValueError("conditioning set is empty")
    if any(len(s) > V.depth for s in members):
        raise ValueError("conditioning set reaches below the gale depth")
    if not is_prefix_free(members):
        raise ValueError("conditioning set is not prefix-free")
    return members


def cond_expectation(V: GaleVector, B: Iterable[BitString]) -> tuple[Fraction, ...]:
    members = _check_set(V, B)
    mB = measure(members)
    return tuple(
        sum((M(s) * cylinder_measure(s) for s in members), Fraction(0)) / mB for M in V
    )


def cond_variance(V: GaleVector, B: Iterable[BitString]) -> Fraction:
    members = _check_set(V, B)
    mB = measure(members)
    E = cond_expectation(V, members)
    total = Fraction(0)
    for s in members:
        w = cylinder_measure(s)
        total += w * sum(((M(s) - e) ** 2 for M, e in zip(V, E)), Fraction(0))
    return total / mB


def martingale_completion(leaves: Mapping[BitString, Fraction] | Sequence[Fraction], depth: int | None = None) -> GaleTree:
    """Average leaf values upward into a martingale."""
    if isinstance(leaves, Mapping):
        if depth is None:
            depth = len(next(iter(leaves)))
        seq = [Fraction(leaves[s]) for s in strings_of_length(depth)]
    else:
        seq = [Fraction(v) for v in leaves]
        depth = (len(seq) - 1).bit_length() if depth is None else depth
    if any(v < 0 for v in seq):
        raise ValueError("leaf values must be nonnegative")
    return GaleTree.from_leaves(depth, seq)


def completion_of(V: GaleVector) -> GaleVector:
    base = (1 << V.depth) - 1
    return GaleVector(tuple(GaleTree.from_leaves(V.depth, M.values[base:]) for M in V))


@dataclass(frozen=True)
class LevelChain:
    levels: tuple[frozenset[BitString], ...]

    def __post_init__(self):
        lv = tuple(frozenset(x) for x in self.levels)
        object.__setattr__(self, "levels", lv)
        problems = chain_problems(lv)
        if problems:
            raise ValueError("; ".join(problems))

    @property
    def steps(self) -> int:
        return len(self.levels) - 1

    @property
    def max_length(self) -> int:
        return max(len(s) for level in self.levels for s in level)

    def children(self, level: int, rho: BitString) -> list[BitString]:
        """Members of the next level lying under ``rho``."""
        return sorted(s for s in self.levels[level + 1] if s.startswith(rho))


def chain_problems(levels: Sequence[frozenset[BitString]]) -> list[str]:
    out = []
    if not levels:
        return ["chain has no levels"]
    for j, lv in enumerate(levels):
        if not is_prefix_free(lv):
            out.append(f"level {j} is not prefix-free")
        if measure(lv) != 1:
            out.append(f"level {j} does not cover the space")
        if j and not all(any(s.startswith(r) for r in levels[j - 1]) for s in lv):
            out.append(f"level {j} does not refine level {j - 1}")
    return out


def level_budget(V: GaleVector, chain: LevelChain, level: int) -> Fraction:
    total = Fraction(0)
    for rho in chain.levels[level]:
        total += cylinder_measure(rho) * cond_variance(V, chain.children(level, rho))
    return total


def variance_budget(V: GaleVector, chain: LevelChain) -> Fraction:
    if chain.max_length > V.depth:
        raise ValueError("chain reaches below the gale depth")
    return sum((level_budget(V, chain, j) for j in range(chain.steps)), Fraction(0))


def total_variance_gap(V: GaleVector, chain: LevelChain, level: int) -> Fraction:
    """Var(V | next level) - Var(V | this level) - level budget; zero for martingales."""
    return (
        cond_variance(V, chain.levels[level + 1])
        - cond_variance(V, chain.levels[level])
        - level_budget(V, chain, level)
    )


def sqrtvar_problems(V: GaleVector) -> list[str]:
    out = []
    if V.k != 2:
        return ["need exactly two components"]
    if V.depth < 2:
        return ["need depth at least 2"]
    for j in range(2):
        if not is_supermartingale(V[j]):
            out.append(f"component {j} is not a supermartingale")
        if not is_i_sided(V[j], j):
            out.append(f"component {j} is not {j}-sided")
    if V.l1("11") < 1:
        out.append("combined capital at 11 is below 1")
    if V.l1("0") < 1:
        out.append("combined capital at 0 is below 1")
    return out


@dataclass(frozen=True)
class SqrtVarResult:
    ok: bool
    deficit: Fraction
    variance: Fraction
    C: Fraction


def check_claim_sqrtvar(V: GaleVector, bound_C: Fraction = DEFAULT_SQRTVAR_C) -> SqrtVarResult:
    problems = sqrtvar_problems(V)
    if problems:
        raise PreconditionError(problems)
    C = Fraction(bound_C)
    deficit = 1 - V.l1("")
    var = cond_variance(V, ("0", "11"))
    ok = deficit <= 0 or deficit * deficit <= C * C * var
    return SqrtVarResult(ok, deficit, var, C)


def budget_problems(V: GaleVector, eps: Fraction) -> list[str]:
    out = []
    base = (1 << V.depth) - 1
    leaf_mass = sum(
        (sum((M.values[base + j] for M in V), Fraction(0)) for j in range(1 << V.depth)),
        Fraction(0),
    ) / (1 << V.depth)
    if leaf_mass < 1 - eps:
        out.append("leaf integral below 1 - eps")
    if V.l1("") > 1:
        out.append("root capital above 1")
    for j, M in enumerate(V):
        if not is_supermartingale(M):
            out.append(f"component {j} is not a supermartingale")
        if max(M.values) > 2:
            out.append(f"component {j} exceeds 2")
    return out


@dataclass(frozen=True)
class BudgetResult:
    ok: bool
    budget: Fraction
    bound: Fraction


def check_budget_bound(V: GaleVector, chain: LevelChain, eps: Fraction, k: int | None = None,
                       constant: Fraction | None = None) -> BudgetResult:
    eps = Fraction(eps)
    k = V.k if k is None else k
    problems = budget_problems(V, eps)
    if problems:
        raise PreconditionError(problems)
    Ck = budget_constant(k) if constant is None else Fraction(constant)
    budget = variance_budget(V, chain)
    bound = Ck * (1 + chain.steps * eps)
    return BudgetResult(budget <= bound, budget, bound)


# -- instance samplers ------------------------------------------------------------
# Every sampler returns instances that satisfy the corresponding check's
# preconditions, so a check failure is a genuine counterexample.

def _grid(rng, den: int, lo: int = 0, hi: int | None = None) -> Fraction:
    return Fraction(rng.randint(lo, den if hi is None else hi), den)


def random_supermartingale(rng, depth: int, root: Fraction, side: int | None = None,
                           cap: Fraction | None = None, den: int = 8, bold: bool = False) -> GaleTree:
    """Top-down random bets with random savings; ``side`` forces the favoured child.

    With a cap the stake is reduced so the favoured child lands at most on
    the cap.  Bold gales bet everything and save nothing.
    """
    arr = [Fraction(0)] * ((1 << (depth + 1)) - 1)
    arr[0] = Fraction(root)
    for idx in range((1 << depth) - 1):
        v = arr[idx]
        t = Fraction(1) if bold else _grid(rng, den)
        fav = side if side is not None else rng.randint(0, 1)
        keep = Fraction(1) if bold else 1 - _grid(rng, den, 0, den // 4)
        if cap is not None and v and v * (1 + t) * keep > cap:
            t = max(Fraction(0), cap / (v * keep) - 1)
            if v * keep > cap:
                keep = cap / v
        arr[2 * idx + 1 + fav] = v * (1 + t) * keep
        arr[2 * idx + 2 - fav] = v * (1 - t) * keep
    return GaleTree(depth, tuple(arr))


def sample_sqrtvar_instance(rng, depth: int | None = None) -> GaleVector:
    """A 0-sided/1-sided pair rescaled so that both {0} and {11} carry capital at least 1."""
    while True:
        n = depth if depth is not None else rng.randint(2, 4)
        comps = tuple(random_supermartingale(rng, n, _grid(rng, 8, 1), side=j) for j in range(2))
        V = GaleVector(comps)
        low = min(V.l1("0"), V.l1("11"))
        if low > 0:
            return V.scaled(1 / low)


def random_chain(rng, depth: int, levels: int) -> LevelChain:
    out = [frozenset({""})]
    for _ in range(levels - 1):
        nxt = set()
        for rho in out[-1]:
            room = depth - len(rho)
            if room and rng.random() < 0.7:
                step = rng.randint(1, min(2, room))
                nxt.update(rho + s for s in strings_of_length(step))
            else:
                nxt.add(rho)
        out.append(frozenset(nxt))
    return LevelChain(tuple(out))


@dataclass(frozen=True)
class BudgetInstance:
    V: GaleVector
    chain: LevelChain
    eps: Fraction
    k: int


def sample_budget_instance(rng, k: int, max_depth: int = 10, max_levels: int = 6) -> BudgetInstance:
    n = rng.randint(1, max_depth)
    roots = [_grid(rng, 16, 1) for _ in range(k)]
    total = sum(roots)
    roots = [r / total * _grid(rng, 8, 4) for r in roots]
    bold = rng.random() < 0.25
    if bold:
        roots = [r / sum(roots) for r in roots]
    V = GaleVector(tuple(random_supermartingale(rng, n, r, cap=Fraction(2), bold=bold) for r in roots))
    base = (1 << n) - 1
    leaf_mass = sum((sum((M.values[base + j] for M in V), Fraction(0)) for j in range(1 << n)),
                    Fraction(0)) / (1 << n)
    eps = max(Fraction(0), 1 - leaf_mass)
    chain = random_chain(rng, n, rng.randint(1, max_levels))
    return BudgetInstance(V, chain, eps, k)
