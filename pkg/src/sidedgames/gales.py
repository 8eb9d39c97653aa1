"""Finite-depth supermartingale snapshots and the betting-class predicates."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence

from .strings import BitString, format_rational, parse_rational, strings_upto


def index_of(s: BitString) -> int:
    """Position of ``s`` in the dense breadth-first layout."""
    return (1 << len(s)) - 1 + (int(s, 2) if s else 0)


def string_at(idx: int) -> BitString:
    length = (idx + 1).bit_length() - 1
    off = idx + 1 - (1 << length)
    return format(off, f"0{length}b") if length else ""


@dataclass(frozen=True)
class GaleTree:
    """Capital values on every binary string of length <= depth."""

    depth: int
    values: tuple[Fraction, ...]

    def __post_init__(self):
        if len(self.values) != (1 << (self.depth + 1)) - 1:
            raise ValueError("values must cover every string of length <= depth")
        if any(v < 0 for v in self.values):
            raise ValueError("capital must be nonnegative")

    @classmethod
    def from_mapping(cls, depth: int, vals: Mapping[BitString, Fraction | int], default=0) -> "GaleTree":
        arr = [Fraction(default)] * ((1 << (depth + 1)) - 1)
        for s, v in vals.items():
            if len(s) > depth:
                raise ValueError(f"{s!r} deeper than {depth}")
            arr[index_of(s)] = Fraction(v)
        return cls(depth, tuple(arr))

    @classmethod
    def constant(cls, depth: int, value: Fraction | int = 0) -> "GaleTree":
        return cls(depth, (Fraction(value),) * ((1 << (depth + 1)) - 1))

    @classmethod
    def from_leaves(cls, depth: int, leaves: Sequence[Fraction | int]) -> "GaleTree":
        """Martingale whose leaf values are given in lexicographic order."""
        if len(leaves) != 1 << depth:
            raise ValueError("need one value per leaf")
        arr = [Fraction(0)] * ((1 << (depth + 1)) - 1)
        base = (1 << depth) - 1
        for j, v in enumerate(leaves):
            arr[base + j] = Fraction(v)
        for idx in range(base - 1, -1, -1):
            arr[idx] = (arr[2 * idx + 1] + arr[2 * idx + 2]) / 2
        return cls(depth, tuple(arr))

    def __call__(self, s: BitString) -> Fraction:
        return self.values[index_of(s)]

    def items(self):
        for idx, v in enumerate(self.values):
            yield string_at(idx), v

    def scaled(self, c: Fraction | int) -> "GaleTree":
        c = Fraction(c)
        return GaleTree(self.depth, tuple(c * v for v in self.values))

    def __add__(self, other: "GaleTree") -> "GaleTree":
        _same_depth(self, other)
        return GaleTree(self.depth, tuple(a + b for a, b in zip(self.values, other.values)))

    def replace(self, updates: Mapping[BitString, Fraction | int]) -> "GaleTree":
        arr = list(self.values)
        for s, v in updates.items():
            arr[index_of(s)] = Fraction(v)
        return GaleTree(self.depth, tuple(arr))

    def to_json(self) -> dict:
        return {"depth": self.depth, "values": {s: format_rational(v) for s, v in self.items()}}

    @classmethod
    def from_json(cls, obj: Mapping) -> "GaleTree":
        depth = int(obj["depth"])
        vals = obj["values"]
        missing = [s for s in strings_upto(depth) if s not in vals]
        if missing:
            raise ValueError(f"missing values for {missing[:3]}")
        return cls.from_mapping(depth, {s: parse_rational(v) for s, v in vals.items()})


def _same_depth(a: GaleTree, b: GaleTree):
    if a.depth != b.depth:
        raise ValueError(f"depth mismatch {a.depth} != {b.depth}")


def internal_nodes(depth: int) -> Iterable[BitString]:
    return strings_upto(depth - 1) if depth > 0 else ()


@dataclass(frozen=True)
class SupermartingaleCheck:
    ok: bool
    martingale: bool
    witness: BitString | None = None

    def __bool__(self):
        return self.ok


def is_supermartingale(M: GaleTree) -> SupermartingaleCheck:
    fair = True
    v = M.values
    for idx in range((1 << M.depth) - 1):
        lhs, rhs = 2 * v[idx], v[2 * idx + 1] + v[2 * idx + 2]
        if lhs < rhs:
            return SupermartingaleCheck(False, False, string_at(idx))
        if lhs != rhs:
            fair = False
    return SupermartingaleCheck(True, fair)


def is_sided_at(M: GaleTree, s: BitString, i: int) -> bool:
    if len(s) >= M.depth:
        raise ValueError("sidedness is only defined at internal nodes")
    return M(s + str(i)) >= M(s + str(1 - i))


def is_i_sided(M: GaleTree, i: int) -> bool:
    return all(is_sided_at(M, s, i) for s in internal_nodes(M.depth))


@dataclass(frozen=True)
class SidePolicy:
    """Partial map from internal strings to the favoured next bit."""

    assignments: Mapping[BitString, int] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "assignments", dict(self.assignments))
        for s, b in self.assignments.items():
            if b not in (0, 1):
                raise ValueError(f"policy bit at {s!r} must be 0 or 1")

    def get(self, s: BitString) -> int | None:
        return self.assignments.get(s)

    def __contains__(self, s: BitString) -> bool:
        return s in self.assignments

    def __len__(self):
        return len(self.assignments)

    def extends(self, other: "SidePolicy") -> bool:
        return all(self.assignments.get(s) == b for s, b in other.assignments.items())

    def with_(self, s: BitString, b: int) -> "SidePolicy":
        d = dict(self.assignments)
        d[s] = b
        return SidePolicy(d)

    def __eq__(self, other):
        return isinstance(other, SidePolicy) and self.assignments == other.assignments

    def __hash__(self):
        return hash(frozenset(self.assignments.items()))

    def to_json(self) -> dict:
        return {s: b for s, b in sorted(self.assignments.items())}

    @classmethod
    def from_json(cls, obj: Mapping) -> "SidePolicy":
        return cls({s: int(b) for s, b in obj.items()})

    @classmethod
    def constant(cls, depth: int, i: int) -> "SidePolicy":
        return cls({s: i for s in internal_nodes(depth)})


def is_p_sided(M: GaleTree, p: SidePolicy) -> bool:
    for s in internal_nodes(M.depth):
        b = p.get(s)
        if b is None:
            if M(s + "0") != M(s + "1"):
                return False
        elif M(s + str(b)) < M(s + str(1 - b)):
            return False
    return True


def is_li_betting(M: GaleTree, l: int, i: int) -> bool:
    if not 0 <= i < l:
        raise ValueError("need 0 <= i < l")
    for s in internal_nodes(M.depth):
        if len(s) % l == i and M(s) < max(M(s + "0"), M(s + "1")):
            return False
    return True


def dominates(M: GaleTree, M0: GaleTree) -> bool:
    _same_depth(M, M0)
    return all(a >= b for a, b in zip(M.values, M0.values))


@dataclass(frozen=True)
class GaleVector:
    components: tuple[GaleTree, ...]

    def __post_init__(self):
        comps = tuple(self.components)
        object.__setattr__(self, "components", comps)
        if not comps:
            raise ValueError("need at least one component")
        if len({c.depth for c in comps}) != 1:
            raise ValueError("components must share one depth")

    @property
    def depth(self) -> int:
        return self.components[0].depth

    @property
    def k(self) -> int:
        return len(self.components)

    def __getitem__(self, j: int) -> GaleTree:
        return self.components[j]

    def __iter__(self):
        return iter(self.components)

    def l1(self, s: BitString) -> Fraction:
        return l1_at(self, s)

    def total(self) -> GaleTree:
        out = self.components[0]
        for c in self.components[1:]:
            out = out + c
        return out

    def scaled(self, c) -> "GaleVector":
        return GaleVector(tuple(m.scaled(c) for m in self.components))

    @classmethod
    def zero(cls, depth: int, k: int) -> "GaleVector":
        return cls(tuple(GaleTree.constant(depth, 0) for _ in range(k)))

    def to_json(self) -> list:
        return [c.to_json() for c in self.components]

    @classmethod
    def from_json(cls, obj) -> "GaleVector":
        return cls(tuple(GaleTree.from_json(c) for c in obj))


def l1_at(V: GaleVector, s: BitString) -> Fraction:
    return sum((c(s) for c in V.components), Fraction(0))


@dataclass(frozen=True)
class ApproxSequence:
    snapshots: tuple[GaleTree, ...]

    def __post_init__(self):
        snaps = tuple(self.snapshots)
        object.__setattr__(self, "snapshots", snaps)
        if not snaps:
            raise ValueError("an approximation sequence is nonempty")
        if len({m.depth for m in snaps}) != 1:
            raise ValueError("snapshots must share one depth")

    def append(self, M: GaleTree) -> "ApproxSequence":
        return ApproxSequence(self.snapshots + (M,))

    def scaled(self, c) -> "ApproxSequence":
        return ApproxSequence(tuple(m.scaled(c) for m in self.snapshots))


def is_nondecreasing(S: ApproxSequence) -> bool:
    return all(dominates(b, a) for a, b in zip(S.snapshots, S.snapshots[1:]))


def kaster_consistent(S: ApproxSequence) -> bool:
    if not all(is_supermartingale(m) for m in S.snapshots):
        return False
    if not is_nondecreasing(S):
        return False
    depth = S.snapshots[0].depth
    for s in internal_nodes(depth):
        left = right = False
        for m in S.snapshots:
            a, b = m(s + "0"), m(s + "1")
            left |= a > b
            right |= b > a
        if left and right:
            return False
    return True


def muchgale_member(S: ApproxSequence, l: int, i: int) -> bool:
    return (
        all(is_supermartingale(m) and is_li_betting(m, l, i) for m in S.snapshots)
        and is_nondecreasing(S)
    )


ClassPredicate = Callable[[ApproxSequence], bool]


def favoured_sides(snapshots: Sequence[GaleTree], s: BitString) -> set[int]:
    """Children of ``s`` that some snapshot strictly prefers."""
    out = set()
    for m in snapshots:
        a, b = m(s + "0"), m(s + "1")
        if a > b:
            out.add(0)
        elif b > a:
            out.add(1)
    return out


class ClassRules:
    """Per-snapshot and cross-snapshot constraints of a betting class.

    Membership of a whole sequence is ``snapshot_ok`` for every snapshot,
    ``transition_ok`` for every prefix, and monotone growth.
    """

    def snapshot_ok(self, M: GaleTree) -> bool:
        return bool(is_supermartingale(M))

    def transition_ok(self, past: Sequence[GaleTree], M: GaleTree) -> bool:
        return True

    def member(self, S: ApproxSequence) -> bool:
        snaps = S.snapshots
        return (
            all(self.snapshot_ok(m) for m in snaps)
            and all(self.transition_ok(snaps[:j], snaps[j]) for j in range(len(snaps)))
            and is_nondecreasing(S)
        )

    def __call__(self, S: ApproxSequence) -> bool:
        return self.member(S)


class KastergaleRules(ClassRules):
    class_id = "kastergale"

    def transition_ok(self, past, M):
        for s in internal_nodes(M.depth):
            sides = favoured_sides(tuple(past) + (M,), s)
            if len(sides) > 1:
                return False
        return True


class MuchgaleRules(ClassRules):
    def __init__(self, l: int, i: int):
        if not 0 <= i < l:
            raise ValueError("need 0 <= i < l")
        self.l, self.i = l, i
        self.class_id = f"muchgale:{l}:{i}"

    def snapshot_ok(self, M):
        return bool(is_supermartingale(M)) and is_li_betting(M, self.l, self.i)


def class_rules(class_id: str) -> ClassRules:
    """Parse ``"kastergale"`` or ``"muchgale:l:i"``."""
    if class_id == "kastergale":
        return KastergaleRules()
    parts = class_id.split(":")
    if parts[0] == "muchgale" and len(parts) == 3:
        return MuchgaleRules(int(parts[1]), int(parts[2]))
    raise ValueError(f"unknown class {class_id!r}")


def kastergale_class() -> ClassPredicate:
    return kaster_consistent


def muchgale_class(l: int, i: int) -> ClassPredicate:
    return lambda S: muchgale_member(S, l, i)


def class_by_id(class_id: str) -> ClassPredicate:
    return class_rules(class_id).member


def _subsequences(n: int, limit: int = 64):
    # all nonempty index subsets, capped so that long sequences stay cheap
    count = 0
    for mask in range(1, 1 << n):
        yield [j for j in range(n) if mask >> j & 1]
        count += 1
        if count >= limit:
            return


@dataclass(frozen=True)
class MetaReport:
    subsequence_closed: bool
    scale_closed: bool
    nondecreasing: bool
    failures: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return not self.failures


SCALINGS = (Fraction(1, 2), Fraction(2), Fraction(3))


def class_meta_checks(S: ApproxSequence, member: ClassPredicate) -> MetaReport:
    failures = []
    sub_ok = True
    for idxs in _subsequences(len(S.snapshots)):
        if not member(ApproxSequence(tuple(S.snapshots[j] for j in idxs))):
            sub_ok = False
            failures.append(f"subsequence {idxs} leaves the class")
            break
    scale_ok = True
    for c in SCALINGS:
        if not member(S.scaled(c)):
            scale_ok = False
            failures.append(f"scaling by {c} leaves the class")
    nd = is_nondecreasing(S)
    if not nd:
        failures.append("snapshots are not nondecreasing")
    return MetaReport(sub_ok, scale_ok, nd, tuple(failures))


def graft(M: GaleTree, rho: BitString, depth: int) -> GaleTree:
    """Place ``M`` under ``rho`` inside a tree of the given depth.

    Strings not extending ``rho`` keep the value at the graft root, so
    the result bets only inside ``[rho]``.
    """
    if len(rho) + M.depth < depth:
        raise ValueError("grafted tree too shallow")
    vals = {}
    for s in strings_upto(depth):
        if s.startswith(rho):
            vals[s] = M(s[len(rho):])
        else:
            vals[s] = M("")
    return GaleTree.from_mapping(depth, vals)


def subtree(M: GaleTree, rho: BitString, depth: int) -> GaleTree:
    """Values of ``M`` on ``rho * s`` for ``|s| <= depth``, re-rooted at ``rho``."""
    if len(rho) + depth > M.depth:
        raise ValueError("subtree reaches below the gale depth")
    arr = []
    base = int(rho, 2) if rho else 0
    for k in range(depth + 1):
        start = (1 << (len(rho) + k)) - 1 + (base << k)
        arr.extend(M.values[start:start + (1 << k)])
    return GaleTree(depth, tuple(arr))


def vector_subtree(V: GaleVector, rho: BitString, depth: int, comps: Sequence[int] | None = None) -> GaleVector:
    idx = range(V.k) if comps is None else comps
    return GaleVector(tuple(subtree(V[j], rho, depth) for j in idx))


def policy_subtree(p: SidePolicy, rho: BitString, depth: int) -> SidePolicy:
    return SidePolicy({s[len(rho):]: b for s, b in p.assignments.items()
                       if s.startswith(rho) and len(s) - len(rho) < depth})
