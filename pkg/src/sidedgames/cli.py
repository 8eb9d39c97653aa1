"""Command-line entry point.

Exit codes:
  0  success: Alice won within her contract cost, claims held, construction certified
  1  negative result: Alice lost or overspent, a claim was violated, a counterexample was found
  2  usage or configuration error (bad ids, malformed config or rationals)
  3  threshold or target violation (construction margin check, infeasible pipeline target)
  4  search budget exhausted
  5  replay mismatch or invalid trace
"""
from __future__ import annotations

import argparse
import json
import random
import sys
from fractions import Fraction
from pathlib import Path

from . import alice as A
from . import baby as B
from . import construct as C
from . import referee as R
from . import stats as S
from .gales import GaleVector
from .simplexlp import LinearProgram, brute_force_solve, solve
from .strings import format_rational, parse_rational

EXIT_OK = 0
EXIT_NEGATIVE = 1
EXIT_USAGE = 2
EXIT_THRESHOLD = 3
EXIT_BUDGET = 4
EXIT_REPLAY = 5

DEFAULT_DELTA_SMALL = Fraction(1, 10 ** 6)


class UsageError(ValueError):
    pass


# -- config ----------------------------------------------------------------------

def parse_config(text: str) -> dict[str, str]:
    """UTF-8 ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"config line {lineno}: expected key = value")
        key, value = (x.strip() for x in line.split("=", 1))
        out[key] = value
    return out


def gather_params(args) -> dict[str, str]:
    params = {}
    if getattr(args, "config", None):
        params.update(parse_config(Path(args.config).read_text(encoding="utf-8")))
    for item in getattr(args, "params", None) or []:
        if "=" not in item:
            raise UsageError(f"parameter {item!r} is not key=value")
        k, v = item.split("=", 1)
        params[k.strip()] = v.strip()
    return params


class Params:
    def __init__(self, raw: dict[str, str]):
        self.raw = raw

    def q(self, key, default=None) -> Fraction:
        if key not in self.raw:
            if default is None:
                raise UsageError(f"missing parameter {key!r}")
            return Fraction(default)
        try:
            return parse_rational(self.raw[key])
        except (ValueError, ZeroDivisionError) as e:
            raise UsageError(f"parameter {key!r}: {e}") from None

    def int(self, key, default=None) -> int:
        if key not in self.raw:
            if default is None:
                raise UsageError(f"missing parameter {key!r}")
            return default
        try:
            return int(self.raw[key])
        except ValueError:
            raise UsageError(f"parameter {key!r} is not an integer") from None

    def str(self, key, default=None) -> str:
        if key not in self.raw:
            if default is None:
                raise UsageError(f"missing parameter {key!r}")
            return default
        return self.raw[key]

    def has(self, key) -> bool:
        return key in self.raw


# -- ids --------------------------------------------------------------------------

def build_game(p: Params) -> R.GameSpec:
    try:
        kind = R.Kind(p.str("game").upper().replace("-", "_"))
    except ValueError:
        raise UsageError(f"unknown game kind {p.str('game')!r}") from None
    kw = {name: p.q(name) for name in ("c", "d", "a", "delta", "Delta") if p.has(name)}
    if kind in R.FIXED_GOAL and "d" not in kw:
        kw["d"] = Fraction(1)
    k = p.int("k", 2 if kind in R.SIDED_FAMILY else 1)
    n = p.int("n") if p.has("n") else p.int("m")
    try:
        return R.GameSpec(kind, n, k, class_id=p.raw.get("class"), scale=p.q("scale", 1), **kw)
    except R.SpecError as e:
        raise UsageError(str(e)) from None


def build_alice(name: str, p: Params) -> tuple[A.StrategyHandle, R.GameSpec, Fraction, bool]:
    """Strategy handle, its natural game, its contract cost and whether the bound is strict."""
    if name == "single-leaf":
        leaf = p.str("leaf")
        return A.single_leaf(leaf), _game_or(p, lambda: R.GameSpec.sided(p.q("c", 1), len(leaf))), p.q("cost_bound", 1), False
    if name == "lex":
        n = p.int("n")
        return A.lex_until_win(n), _game_or(p, lambda: R.GameSpec.sided(p.q("c"), n)), p.q("cost_bound", 1), False
    if name == "muchgale":
        l, i, n = p.int("l"), p.int("i"), p.int("n")
        spec = _game_or(p, lambda: R.GameSpec.class_game(f"muchgale:{l}:{i}", 1, n))
        return A.muchgale_strategy(l, i, n), spec, p.q("cost_bound", Fraction(1, 2)), False
    if name == "variance-k1":
        a, m = p.q("a"), p.int("m")
        spec = _game_or(p, lambda: R.GameSpec.variance_partial(a, p.q("Delta", DEFAULT_DELTA_SMALL), m, 1))
        return A.variance_k1_strategy(a, m), spec, p.q("cost_bound", 1), True
    if name == "lex-variance":
        a, delta, n = p.q("a"), p.q("delta"), p.int("n")
        spec = _game_or(p, lambda: R.GameSpec.restricted_dynamic_sided(a, delta, n))
        return A.lex_variance_strategy(a, delta, n), spec, p.q("cost_bound", 1), True
    if name == "pipeline":
        try:
            handle, params = A.build_pipeline(p.q("c"), p.q("eps"), p.int("depth_budget", A.DEPTH_BUDGET))
        except A.InfeasibleTarget as e:
            raise ThresholdError(str(e)) from None
        return handle, _game_or(p, params.game), p.q("cost_bound", params.cost_bound), False
    raise UsageError(f"unknown strategy id {name!r}")


def _game_or(p: Params, default):
    return build_game(p) if p.has("game") else default()


def build_baby(name: str, seed: int, budget: int) -> B.AdversaryHandle:
    table = {
        "lp": lambda: B.lp_disjunctive(budget),
        "leaf": B.lp_leaf_catch,
        "lazy": B.lazy_minimal,
        "random": lambda: B.random_adversary(seed),
        "exhaustive": lambda: B.exhaustive(budget),
    }
    if name not in table:
        raise UsageError(f"unknown adversary id {name!r}")
    return table[name]()


class ThresholdError(ValueError):
    pass


# -- commands --------------------------------------------------------------------

def _emit(obj, out: str | None) -> None:
    text = json.dumps(obj, sort_keys=True, indent=2) + "\n"
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_play(args) -> int:
    p = Params(gather_params(args))
    handle, spec, bound, strict = build_alice(args.alice, p)
    if args.baby == "exhaustive":
        try:
            rep = B.exhaustive_verdict(spec, handle, budget=args.budget, cost_bound=bound, strict=strict)
        except B.BudgetExhausted as e:
            _emit({"verdict": "BUDGET_EXHAUSTED", "reason": str(e)}, args.report)
            return EXIT_BUDGET
        obj = rep.to_json()
        obj.update({"game": spec.to_json(), "alice": handle.describe()})
        _emit(obj, args.report)
        if rep.verdict is B.Verdict.BUDGET_EXHAUSTED:
            return EXIT_BUDGET
        return EXIT_OK if rep.verdict is B.Verdict.ALICE_ALWAYS_WINS else EXIT_NEGATIVE
    adv = build_baby(args.baby, args.seed, args.budget)
    try:
        res = A.play(spec, handle, adv)
    except B.BudgetExhausted as e:
        _emit({"verdict": "BUDGET_EXHAUSTED", "reason": str(e)}, args.report)
        return EXIT_BUDGET
    if args.out:
        Path(args.out).write_text(res.trace_text(), encoding="utf-8")
    within = res.cost < bound if strict else res.cost <= bound
    ok = res.won and within
    _emit({
        "verdict": "ALICE_WON" if ok else "ALICE_FAILED",
        "status": str(res.state.status),
        "failure": res.failure,
        "cost": format_rational(res.cost),
        "cost_bound": format_rational(bound),
        "root_l1": format_rational(res.state.root_l1()),
        "rounds": res.state.round,
        "seed": args.seed,
    }, args.report)
    return EXIT_OK if ok else EXIT_NEGATIVE


def _instance_json(V: GaleVector, **extra) -> dict:
    out = {"vector": V.to_json()}
    out.update(extra)
    return out


def cmd_verify_claims(args) -> int:
    rng = random.Random(args.seed)
    violations = []
    samples = args.samples
    if args.which == "sqrtvar":
        Cbound = parse_rational(args.constant) if args.constant else S.DEFAULT_SQRTVAR_C
        for t in range(samples):
            V = S.sample_sqrtvar_instance(rng)
            r = S.check_claim_sqrtvar(V, Cbound)
            if not r.ok:
                violations.append(_instance_json(V, sample=t, deficit=format_rational(r.deficit),
                                                 variance=format_rational(r.variance)))
                break
        detail = {"C": format_rational(Cbound)}
    elif args.which == "budget":
        const = parse_rational(args.constant) if args.constant else None
        for t in range(samples):
            inst = S.sample_budget_instance(rng, (1, 2, 3)[t % 3])
            r = S.check_budget_bound(inst.V, inst.chain, inst.eps, inst.k, constant=const)
            if not r.ok:
                violations.append(_instance_json(
                    inst.V, sample=t, k=inst.k, eps=format_rational(inst.eps),
                    chain=[sorted(lv) for lv in inst.chain.levels],
                    budget=format_rational(r.budget), bound=format_rational(r.bound)))
                break
        detail = {"constant": args.constant or "8k"}
    else:
        for t in range(samples):
            inst = S.sample_budget_instance(rng, (1, 2, 3)[t % 3])
            W = S.completion_of(inst.V)
            for j in range(inst.chain.steps):
                gap = S.total_variance_gap(W, inst.chain, j)
                if gap != 0:
                    violations.append(_instance_json(W, sample=t, level=j, gap=format_rational(gap),
                                                     chain=[sorted(lv) for lv in inst.chain.levels]))
                    break
            if violations:
                break
        detail = {}
    report = {"claim": args.which, "samples": samples, "seed": args.seed,
              "violations": len(violations), "counterexample": violations[0] if violations else None,
              "passed": not violations}
    report.update(detail)
    _emit(report, args.report)
    return EXIT_OK if not violations else EXIT_NEGATIVE


def parse_roster(text: str, depth: int) -> list[C.RosterMember]:
    out = []
    for item in (x.strip() for x in text.split(",")):
        if item == "zero":
            out.append(C.ZeroMember(depth))
        elif item == "lp":
            out.append(C.CatcherMember(depth))
        elif item.startswith("doubling:"):
            # doubling:PATH:ROOT[:START]
            parts = item.split(":")
            if len(parts) not in (3, 4):
                raise UsageError(f"bad roster entry {item!r}")
            path, root = parts[1], parse_rational(parts[2])
            start = int(parts[3]) if len(parts) == 4 else 0
            comp = (int(path[0]),) if path and len(set(path)) == 1 else (0, 1)
            out.append(C.ScriptedMember(depth, [C.doubling_gale(depth, path, root, comp)], start=start))
        else:
            raise UsageError(f"unknown roster entry {item!r}")
    return out


def cmd_construct(args) -> int:
    p = Params(gather_params(args))
    depths = [int(x) for x in p.str("depths", "4,4").split(",")]

    def qlist(key):
        return [parse_rational(x) for x in p.str(key).split(",")] if p.has(key) else None

    cfg = C.ConstructionConfig(depths, qlist("c"), qlist("d"), qlist("delta"), p.q("cost_cap", Fraction(1, 2)))
    problems = cfg.margin_problems()
    if problems:
        _emit({"error": "THRESHOLD_VIOLATION", "problems": problems, "config": cfg.to_json()}, args.out)
        return EXIT_THRESHOLD
    roster = parse_roster(p.str("roster", ",".join(["zero"] * cfg.K)), cfg.total_depth)
    if len(roster) != cfg.K:
        raise UsageError("roster needs one entry per level")
    try:
        res = C.construct(cfg, roster)
    except C.ConstructionError as e:
        _emit({"error": "CONSTRUCTION_FAILED", "reason": str(e)}, args.out)
        return EXIT_NEGATIVE
    bundle = res.to_json()
    _emit(bundle, args.out)
    return EXIT_OK if not bundle["problems"] else EXIT_NEGATIVE


def cmd_lp_solve(args) -> int:
    lp = LinearProgram.from_json(json.loads(Path(args.lp).read_text(encoding="utf-8")))
    res = solve(lp)
    out = res.to_json()
    if args.check:
        ref = brute_force_solve(lp)
        out["vertex_check"] = ref.status.value if not ref.optimal else format_rational(ref.value)
        agree = ref.status is res.status and (not res.optimal or ref.value == res.value)
        out["agree"] = agree
        _emit(out, args.report)
        return EXIT_OK if agree else EXIT_NEGATIVE
    _emit(out, args.report)
    return EXIT_OK


def cmd_replay(args) -> int:
    text = Path(args.trace).read_text(encoding="utf-8")
    try:
        res = A.replay(text.splitlines())
    except (ValueError, KeyError, R.MoveError, R.MoveRejected) as e:
        _emit({"error": "INVALID_TRACE", "reason": f"{type(e).__name__}: {e}"}, args.report)
        return EXIT_REPLAY
    identical = res.trace_text() == text
    _emit({
        "status": str(res.state.status),
        "cost": format_rational(res.cost),
        "root_l1": format_rational(res.state.root_l1()),
        "identical": identical,
    }, args.report)
    return EXIT_OK if identical else EXIT_REPLAY


# -- parser ------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sidedgames", description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="key = value file; rationals as p/q")
        sp.add_argument("-p", "--param", dest="params", action="append", metavar="KEY=VALUE")

    sp = sub.add_parser("play", help="play a strategy against an adversary")
    sp.add_argument("alice", help="single-leaf | lex | muchgale | variance-k1 | lex-variance | pipeline")
    sp.add_argument("baby", help="lp | leaf | lazy | random | exhaustive")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--budget", type=int, default=100000, help="LP solve budget for search adversaries")
    sp.add_argument("--out", help="trace file (JSON lines)")
    sp.add_argument("--report", help="write the verdict here instead of stdout")
    common(sp)
    sp.set_defaults(func=cmd_play)

    sp = sub.add_parser("verify-claims", help="sample instances and check a variance claim")
    sp.add_argument("which", choices=["sqrtvar", "budget", "total-variance"])
    sp.add_argument("--samples", type=int, default=1000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--constant", help="override C (sqrtvar) or C(k) (budget), as p/q")
    sp.add_argument("--report")
    sp.set_defaults(func=cmd_verify_claims)

    sp = sub.add_parser("construct", help="run the level-by-level construction")
    sp.add_argument("--out")
    common(sp)
    sp.set_defaults(func=cmd_construct)

    sp = sub.add_parser("lp-solve", help="solve an LP given as JSON (debugging aid)")
    sp.add_argument("lp")
    sp.add_argument("--check", action="store_true", help="compare with vertex enumeration")
    sp.add_argument("--report")
    sp.set_defaults(func=cmd_lp_solve)

    sp = sub.add_parser("replay", help="re-validate a saved trace")
    sp.add_argument("trace")
    sp.add_argument("--report")
    sp.set_defaults(func=cmd_replay)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if not 0 <= getattr(args, "seed", 0) < 2 ** 64:
        ap.error("seed must fit in 64 bits")
    try:
        return args.func(args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ThresholdError as e:
        _emit({"error": "INFEASIBLE_TARGET", "reason": str(e)}, None)
        return EXIT_THRESHOLD
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
