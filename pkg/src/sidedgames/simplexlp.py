"""Exact rational two-phase simplex with Bland's rule.

Variables are all nonnegative; the objective is minimized.  Constraint
rows are kept as sparse dictionaries because the gale programs built by
the adversaries touch only a handful of variables per row.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from itertools import combinations
from typing import Mapping, Sequence

from .strings import format_rational, parse_rational

LE, GE, EQ = "<=", ">=", "="
RELATIONS = (LE, GE, EQ)


def _as_coeffs(coeffs, n: int) -> dict[int, Fraction]:
    if isinstance(coeffs, Mapping):
        items = coeffs.items()
    else:
        if len(coeffs) != n:
            raise ValueError(f"coefficient vector has length {len(coeffs)}, expected {n}")
        items = enumerate(coeffs)
    out = {}
    for j, a in items:
        if not 0 <= j < n:
            raise ValueError(f"variable index {j} out of range")
        a = Fraction(a)
        if a:
            out[j] = out.get(j, Fraction(0)) + a
    return {j: a for j, a in out.items() if a}


@dataclass(frozen=True)
class Constraint:
    coeffs: Mapping[int, Fraction]
    relation: str
    rhs: Fraction

    def lhs(self, x: Sequence[Fraction]) -> Fraction:
        return sum((a * x[j] for j, a in self.coeffs.items()), Fraction(0))

    def holds(self, x: Sequence[Fraction]) -> bool:
        v = self.lhs(x)
        if self.relation == LE:
            return v <= self.rhs
        if self.relation == GE:
            return v >= self.rhs
        return v == self.rhs


@dataclass
class LinearProgram:
    num_vars: int
    constraints: list[Constraint] = field(default_factory=list)
    objective: dict[int, Fraction] = field(default_factory=dict)
    names: list[str] | None = None

    def add(self, coeffs, relation: str, rhs) -> None:
        if relation not in RELATIONS:
            raise ValueError(f"unknown relation {relation!r}")
        self.constraints.append(Constraint(_as_coeffs(coeffs, self.num_vars), relation, Fraction(rhs)))

    def minimize(self, coeffs) -> None:
        self.objective = _as_coeffs(coeffs, self.num_vars)

    def value(self, x: Sequence[Fraction]) -> Fraction:
        return sum((c * x[j] for j, c in self.objective.items()), Fraction(0))

    def is_feasible_point(self, x: Sequence[Fraction]) -> bool:
        return len(x) == self.num_vars and all(v >= 0 for v in x) and all(c.holds(x) for c in self.constraints)

    def to_json(self) -> dict:
        return {
            "num_vars": self.num_vars,
            "names": self.names,
            "objective": {str(j): format_rational(c) for j, c in sorted(self.objective.items())},
            "constraints": [
                {
                    "coeffs": {str(j): format_rational(a) for j, a in sorted(c.coeffs.items())},
                    "relation": c.relation,
                    "rhs": format_rational(c.rhs),
                }
                for c in self.constraints
            ],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)

    @classmethod
    def from_json(cls, obj: Mapping) -> "LinearProgram":
        lp = cls(int(obj["num_vars"]), names=obj.get("names"))
        lp.minimize({int(j): parse_rational(c) for j, c in obj.get("objective", {}).items()})
        for c in obj.get("constraints", []):
            lp.add({int(j): parse_rational(a) for j, a in c["coeffs"].items()}, c["relation"], parse_rational(c["rhs"]))
        return lp


class Status(Enum):
    OPTIMAL = "OPTIMAL"
    INFEASIBLE = "INFEASIBLE"
    UNBOUNDED = "UNBOUNDED"


@dataclass(frozen=True)
class LPResult:
    status: Status
    value: Fraction | None = None
    assignment: tuple[Fraction, ...] | None = None
    duals: tuple[Fraction, ...] | None = None
    pivots: int = 0

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL

    def to_json(self) -> dict:
        out = {"status": self.status.value, "pivots": self.pivots}
        if self.optimal:
            out["value"] = format_rational(self.value)
            out["assignment"] = [format_rational(v) for v in self.assignment]
            out["duals"] = [format_rational(v) for v in self.duals]
        return out


class SolverError(RuntimeError):
    """The solver produced an answer that failed its own exact verification."""


class _Tableau:
    def __init__(self, lp: LinearProgram):
        n = lp.num_vars
        self.n = n
        self.rows: list[dict[int, Fraction]] = []
        self.rhs: list[Fraction] = []
        self.basis: list[int] = []
        self.row_sign: list[int] = []
        self.ident_col: list[int] = []
        self.artificial: set[int] = set()
        col = n
        for c in lp.constraints:
            coeffs, rel, b = dict(c.coeffs), c.relation, c.rhs
            sign = 1
            if b < 0 or (b == 0 and rel == GE):
                sign = -1
                coeffs = {j: -a for j, a in coeffs.items()}
                b = -b
                rel = {LE: GE, GE: LE, EQ: EQ}[rel]
            row = dict(coeffs)
            if rel == LE:
                row[col] = Fraction(1)
                basic = col
                col += 1
            else:
                if rel == GE:
                    row[col] = Fraction(-1)
                    col += 1
                row[col] = Fraction(1)
                basic = col
                self.artificial.add(col)
                col += 1
            self.rows.append(row)
            self.rhs.append(b)
            self.basis.append(basic)
            self.row_sign.append(sign)
            self.ident_col.append(basic)
        self.ncols = col
        self.cost = {j: c for j, c in lp.objective.items()}
        # reduced cost rows, kept in step with every pivot
        self.d2: dict[int, Fraction] = dict(self.cost)
        self.z2 = Fraction(0)
        self.d1: dict[int, Fraction] = {}
        self.z1 = Fraction(0)
        for i, basic in enumerate(self.basis):
            if basic in self.artificial:
                for j, a in self.rows[i].items():
                    if j != basic:
                        self.d1[j] = self.d1.get(j, Fraction(0)) - a
                self.z1 -= self.rhs[i]
        self.d1 = {j: v for j, v in self.d1.items() if v}
        self.pivots = 0

    def pivot(self, r: int, c: int) -> None:
        prow = self.rows[r]
        p = prow[c]
        if p != 1:
            inv = 1 / p
            for j in prow:
                prow[j] *= inv
            self.rhs[r] *= inv
        prow[c] = Fraction(1)
        items = list(prow.items())
        pb = self.rhs[r]
        for i, row in enumerate(self.rows):
            if i == r:
                continue
            f = row.get(c)
            if not f:
                continue
            for j, a in items:
                v = row.get(j, 0) - f * a
                if v:
                    row[j] = v
                else:
                    row.pop(j, None)
            self.rhs[i] -= f * pb
        self.d1, self.z1 = self._update_obj(self.d1, self.z1, c, items, pb)
        self.d2, self.z2 = self._update_obj(self.d2, self.z2, c, items, pb)
        self.basis[r] = c
        self.pivots += 1

    @staticmethod
    def _update_obj(d, z, c, items, pb):
        f = d.get(c)
        if not f:
            return d, z
        for j, a in items:
            v = d.get(j, 0) - f * a
            if v:
                d[j] = v
            else:
                d.pop(j, None)
        return d, z - f * pb

    def run(self, d_name: str, allowed) -> str:
        """Bland's rule iterations on the named reduced-cost row."""
        while True:
            d = getattr(self, d_name)
            enter = None
            for j in sorted(d):
                if d[j] < 0 and allowed(j):
                    enter = j
                    break
            if enter is None:
                return "optimal"
            best = None
            for i, row in enumerate(self.rows):
                a = row.get(enter)
                if a is not None and a > 0:
                    ratio = self.rhs[i] / a
                    key = (ratio, self.basis[i])
                    if best is None or key < best[0]:
                        best = (key, i)
            if best is None:
                return "unbounded"
            self.pivot(best[1], enter)


def solve(lp: LinearProgram) -> LPResult:
    t = _Tableau(lp)
    if t.artificial:
        t.run("d1", lambda j: True)
        if t.z1 != 0:
            return LPResult(Status.INFEASIBLE, pivots=t.pivots)
        # push zero-level artificials out of the basis where possible
        for i, b in enumerate(t.basis):
            if b in t.artificial:
                for j in sorted(t.rows[i]):
                    if j not in t.artificial and t.rows[i][j] != 0:
                        t.pivot(i, j)
                        break
    status = t.run("d2", lambda j: j not in t.artificial)
    if status == "unbounded":
        return LPResult(Status.UNBOUNDED, pivots=t.pivots)
    x = [Fraction(0)] * t.n
    for i, b in enumerate(t.basis):
        if b < t.n:
            x[b] = t.rhs[i]
    value = lp.value(x)
    duals = tuple(-t.row_sign[i] * (t.d2.get(t.ident_col[i], Fraction(0)) - t.cost.get(t.ident_col[i], 0))
                  for i in range(len(t.rows)))
    _verify(lp, x, value, duals)
    return LPResult(Status.OPTIMAL, value, tuple(x), duals, t.pivots)


def _verify(lp: LinearProgram, x, value, duals) -> None:
    if not lp.is_feasible_point(x):
        bad = [k for k, c in enumerate(lp.constraints) if not c.holds(x)]
        raise SolverError(f"assignment violates constraints {bad[:5]}")
    check_dual_certificate(lp, duals, value)


def check_dual_certificate(lp: LinearProgram, y: Sequence[Fraction], value: Fraction) -> None:
    """Raise unless ``y`` is dual feasible with objective equal to ``value``."""
    reduced = dict(lp.objective)
    bty = Fraction(0)
    for c, yi in zip(lp.constraints, y):
        if c.relation == GE and yi < 0 or c.relation == LE and yi > 0:
            raise SolverError("dual sign condition fails")
        for j, a in c.coeffs.items():
            reduced[j] = reduced.get(j, Fraction(0)) - yi * a
        bty += yi * c.rhs
    if any(v < 0 for v in reduced.values()):
        raise SolverError("dual feasibility fails")
    if bty != value:
        raise SolverError(f"duality gap {value - bty}")


# -- brute-force oracle -------------------------------------------------------

def _solve_square(rows: list[list[Fraction]], rhs: list[Fraction]) -> list[Fraction] | None:
    n = len(rows)
    m = [list(r) + [b] for r, b in zip(rows, rhs)]
    for col in range(n):
        piv = next((r for r in range(col, n) if m[r][col] != 0), None)
        if piv is None:
            return None
        m[col], m[piv] = m[piv], m[col]
        p = m[col][col]
        m[col] = [v / p for v in m[col]]
        for r in range(n):
            if r != col and m[r][col] != 0:
                f = m[r][col]
                m[r] = [a - f * b for a, b in zip(m[r], m[col])]
    return [m[r][n] for r in range(n)]


def _dense(lp: LinearProgram):
    n = lp.num_vars
    out = []
    for c in lp.constraints:
        out.append(([c.coeffs.get(j, Fraction(0)) for j in range(n)], c.relation, c.rhs))
    return out


def _vertices(n: int, cons) -> list[list[Fraction]]:
    """All vertices of {x >= 0} intersected with ``cons`` (dense rows)."""
    hyper = [(row, b) for row, _, b in cons]
    hyper += [([Fraction(int(i == j)) for i in range(n)], Fraction(0)) for j in range(n)]
    found = []
    seen = set()
    for idxs in combinations(range(len(hyper)), n):
        x = _solve_square([hyper[i][0] for i in idxs], [hyper[i][1] for i in idxs])
        if x is None:
            continue
        key = tuple(x)
        if key in seen:
            continue
        if all(v >= 0 for v in x) and all(
            Constraint({j: a for j, a in enumerate(row) if a}, rel, b).holds(x) for row, rel, b in cons
        ):
            seen.add(key)
            found.append(x)
    return found


def brute_force_solve(lp: LinearProgram) -> LPResult:
    """Vertex enumeration; for tiny programs only."""
    n = lp.num_vars
    cons = _dense(lp)
    verts = _vertices(n, cons)
    if not verts:
        return LPResult(Status.INFEASIBLE)
    # recession directions normalised to the simplex sum(d) = 1
    rec = [(row, rel, Fraction(0)) for row, rel, _ in cons]
    rec.append(([Fraction(1)] * n, EQ, Fraction(1)))
    obj = [lp.objective.get(j, Fraction(0)) for j in range(n)]
    for d in _vertices(n, rec):
        if sum((a * b for a, b in zip(obj, d)), Fraction(0)) < 0:
            return LPResult(Status.UNBOUNDED)
    best = min(verts, key=lambda x: (lp.value(x), tuple(x)))
    return LPResult(Status.OPTIMAL, lp.value(best), tuple(best))
