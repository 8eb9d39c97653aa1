"""Binary and ternary strings, cylinder measure, and the ternary embedding.

Binary strings are plain ``str`` objects over ``"01"`` and ternary strings
are ``str`` objects over ``"012"``.  The empty string is ``""``.
"""
from __future__ import annotations

from fractions import Fraction
from itertools import product
from typing import Iterable, Iterator

BitString = str
TernaryString = str


def is_bitstring(s: str) -> bool:
    return all(c in "01" for c in s)


def is_prefix(a: BitString, b: BitString) -> bool:
    """True iff ``a`` is a (not necessarily proper) prefix of ``b``."""
    return b.startswith(a)


def is_prefix_free(members: Iterable[BitString]) -> bool:
    ms = sorted(set(members))
    # in sorted order a prefix sits right before its extensions
    return all(not ms[i + 1].startswith(ms[i]) for i in range(len(ms) - 1))


def antichain(A: Iterable[BitString]) -> frozenset[BitString]:
    """Minimal elements of ``A`` under the prefix order.

    The result covers the same union of cylinders as ``A``.
    """
    out: list[str] = []
    for s in sorted(set(A)):
        if out and s.startswith(out[-1]):
            continue
        out.append(s)
    return frozenset(out)


def cylinder_measure(s: BitString) -> Fraction:
    return Fraction(1, 2 ** len(s))


def measure(A: Iterable[BitString]) -> Fraction:
    """Measure of the union of the cylinders ``[s]`` for ``s`` in ``A``."""
    return sum((cylinder_measure(s) for s in antichain(A)), Fraction(0))


def conditional_measure(A: Iterable[BitString], rho: BitString) -> Fraction:
    """m(A ∩ [rho]) / m(rho)."""
    inside = []
    for s in A:
        if s.startswith(rho):
            inside.append(s)
        elif rho.startswith(s):
            return Fraction(1)
    return measure(inside) / cylinder_measure(rho)


def strings_of_length(n: int) -> Iterator[BitString]:
    for t in product("01", repeat=n):
        yield "".join(t)


def strings_upto(n: int) -> Iterator[BitString]:
    """All strings of length <= n, shortest first, lexicographic within a length."""
    for k in range(n + 1):
        yield from strings_of_length(k)


def cylinder_leaves(rho: BitString, n: int) -> tuple[BitString, ...]:
    if len(rho) > n:
        raise ValueError(f"|{rho!r}| exceeds depth {n}")
    return tuple(rho + t for t in strings_of_length(n - len(rho)))


def complement_leaves(rho: BitString, n: int, already: Iterable[BitString] = ()) -> tuple[BitString, ...]:
    if len(rho) > n:
        raise ValueError(f"|{rho!r}| exceeds depth {n}")
    done = set(already)
    return tuple(s for s in strings_of_length(n) if not s.startswith(rho) and s not in done)


_EMBED = {"0": "0", "1": "11", "2": "10"}


def ternary_embed(alpha: TernaryString) -> BitString:
    return "".join(_EMBED[d] for d in alpha)


def ternary_lex_iter(depth: int) -> tuple[TernaryString, ...]:
    return tuple("".join(t) for t in product("012", repeat=depth))


def block_roots(n: int) -> tuple[BitString, ...]:
    """Embedded roots e(alpha) for alpha of length n/2 in lexicographic order."""
    if n % 2:
        raise ValueError("block depth must be even")
    return tuple(ternary_embed(a) for a in ternary_lex_iter(n // 2))


def parse_rational(text: str) -> Fraction:
    return Fraction(text.strip())


def format_rational(q: Fraction | int) -> str:
    q = Fraction(q)
    return f"{q.numerator}/{q.denominator}"
