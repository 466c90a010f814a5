"""Command-line entry point: ``latinforge <command> ...``.

Exit codes for ``verify``: 0 pass, 1 fail, 2 budget exhausted.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import constructions as cons
from .completion import (
    greedy_trim,
    is_propagation_minimal,
    propagate,
    verify_critical_set,
    format_report,
)
from .core import CapacityError, GroupSpec, LatinError, elementary_abelian_square, read_pls, read_square, write_pls
from .cover import (
    CoverInstance,
    SolverParams,
    add_cardinality_constraints,
    add_rc_symmetry,
    build_hierarchical_cover,
    build_trade_cover,
    export_lp,
    import_lp,
    intercalate_instance,
    l9_trade_instance,
    write_solution,
)
from .trades import TradeBudgetExceeded, enumerate_trades_bounded, read_trades, write_trades

LONG_BUDGET = 2 ** 62


def _emit(text: str, out: str | None) -> None:
    if out and out != "-":
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _read(path: str | None) -> str:
    if path is None or path == "-":
        return sys.stdin.read()
    return Path(path).read_text()


def _load_square(arg: str):
    if arg.startswith("group:"):
        m, n = (int(x) for x in arg[len("group:"):].split(":"))
        return elementary_abelian_square(GroupSpec(m, n))
    return read_square(_read(arg))


def _load_set(arg: str):
    if arg.startswith("bundled:"):
        return cons.load_bundled({"c29": "c29_l9.pls", "c121": "c121_l16.pls"}.get(
            arg[len("bundled:"):], arg[len("bundled:"):]))
    return read_pls(_read(arg))


def _budget(text: str) -> int:
    return LONG_BUDGET if text == "long" else int(float(text))


# --- commands --------------------------------------------------------------


def cmd_gen(args) -> int:
    try:
        square = elementary_abelian_square(GroupSpec(args.m, args.n))
    except CapacityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    _emit(write_pls(square, [f"L({args.m}^{args.n})"]), args.out)
    return 0


def cmd_trades(args) -> int:
    square = _load_square(args.square)
    try:
        trades = enumerate_trades_bounded(
            square, args.max_size, args.max_rows, args.max_cols, args.max_symbols, args.budget
        )
    except TradeBudgetExceeded as exc:
        print(f"budget exhausted: {len(exc.partial)} trades so far", file=sys.stderr)
        _emit(write_trades(exc.partial), args.out)
        return 2
    _emit(write_trades(trades), args.out)
    print(f"{len(trades)} trades", file=sys.stderr)
    return 0


def cmd_verify(args) -> int:
    square = _load_square(args.square)
    c_set = _load_set(args.set)
    report = verify_critical_set(square, c_set, args.budget, jobs=args.jobs)
    text = format_report(report, c_set)
    if args.report:
        Path(args.report).write_text(text)
    sys.stdout.write(text.split("\n# witnesses")[0].rstrip("\n") + "\n")
    if report.passed:
        return 0
    return 2 if report.budget_exhausted else 1


def _build_instance(args) -> CoverInstance:
    if args.hier:
        rhs = [int(x) for x in args.rhs.split(",")] if args.rhs else None
        level = args.max_level or args.n - 1
        inst = build_hierarchical_cover(GroupSpec(2, args.n), level, rhs)
    elif args.l9:
        inst = l9_trade_instance(rc=args.rc, exactly_three=args.exact3)
    elif args.intercalates:
        inst = intercalate_instance(GroupSpec(args.m, args.n))
    elif args.trades:
        square = _load_square(args.square)
        inst = build_trade_cover(square, read_trades(_read(args.trades)))
        if args.rc:
            inst = add_rc_symmetry(inst)
    else:
        raise LatinError("choose one of --hier, --l9, --intercalates, --trades")
    if args.card:
        inst = add_cardinality_constraints(inst, args.card)
    return inst


def cmd_ip(args) -> int:
    if args.ip_command == "build":
        _emit(export_lp(_build_instance(args)), args.out)
        return 0
    inst = import_lp(_read(args.input))
    if args.ip_command == "export":
        _emit(export_lp(inst), args.out)
        return 0
    if args.ip_command == "solve-ls":
        from .solvers import local_search

        params = SolverParams(args.seed, args.noise, args.max_flips, args.restarts, args.target)
        res = local_search(inst, params, tabu=args.tabu, jobs=args.jobs)
        for rec in res.restarts:
            print(f"{inst.name} {rec.objective} {str(rec.feasible).lower()} {rec.seed} {rec.flips}",
                  file=sys.stderr)
        best = res.best
        print(f"best {best.objective} feasible {str(best.feasible).lower()} "
              f"restart {best.stats['restart']}", file=sys.stderr)
        _emit(write_solution(best, inst.name, solver="local-search", seed=args.seed,
                             restart=best.stats["restart"]), args.out)
        return 0 if best.feasible else 1
    if args.ip_command == "solve-bb":
        from .solvers import branch_and_bound, prove_lower_bound

        if args.prove_to is not None:
            bound, marks = prove_lower_bound(
                inst, args.prove_to, args.budget,
                progress=lambda cp: print(f"checkpoint bound {cp.bound} nodes {cp.nodes}",
                                          file=sys.stderr, flush=True),
            )
            print(f"{inst.name} proved-lower-bound {bound} nodes {marks[-1].nodes}")
            return 0 if bound >= args.prove_to else 2
        res = branch_and_bound(inst, args.budget, args.upper)
        print(f"{inst.name} nodes {res.nodes} root-bound {res.root_bound} "
              f"lower-bound {res.lower_bound} optimal {str(res.optimal).lower()}", file=sys.stderr)
        if res.solution is None:
            print("no solution found", file=sys.stderr)
            return 2
        _emit(write_solution(res.solution, inst.name, solver="branch-and-bound",
                             lower_bound=res.lower_bound, optimal=str(res.optimal).lower(),
                             nodes=res.nodes), args.out)
        return 0 if res.optimal else 2
    raise AssertionError(args.ip_command)


def cmd_construct(args) -> int:
    n = args.n
    what = args.what
    if what == "svr":
        p = cons.svr_set(n).set
    elif what == "t1":
        p = cons.theorem1_set(n).set
    elif what == "dfk-start":
        p = cons.dfk_trim_start(n)
    else:
        square = elementary_abelian_square(GroupSpec(2, n))
        start = cons.dfk_trim_start(n)
        first = cons.svr_set(n).set if args.svr_first else None
        p = greedy_trim(square, start, test=args.test, first=first)
        complete = propagate(p).is_complete()
        print(f"trimmed {len(start)} -> {len(p)} propagation-complete {str(complete).lower()} "
              f"minimal {str(is_propagation_minimal(p)).lower()}", file=sys.stderr)
    print(f"{what} n={n} size {len(p)}", file=sys.stderr)
    _emit(write_pls(p, [f"{what} n={n} size {len(p)}"]), args.out)
    return 0


def cmd_reproduce(args) -> int:
    from .reproduce import run_tier

    return run_tier(args.tier)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="latinforge", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="write the Cayley table of Z_m^n")
    p.add_argument("-m", type=int, required=True)
    p.add_argument("-n", type=int, required=True)
    p.add_argument("-o", "--out")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("trades", help="enumerate minimal trades within bounds")
    p.add_argument("square", help="PLS file or group:M:N")
    p.add_argument("--max-size", type=int, required=True)
    p.add_argument("--max-rows", type=int)
    p.add_argument("--max-cols", type=int)
    p.add_argument("--max-symbols", type=int)
    p.add_argument("--budget", type=_budget, default=10 ** 7)
    p.add_argument("-o", "--out")
    p.set_defaults(func=cmd_trades)

    p = sub.add_parser("verify", help="verify a critical set")
    p.add_argument("square", help="PLS file or group:M:N")
    p.add_argument("set", help="PLS file or bundled:c29 / bundled:c121")
    p.add_argument("--budget", type=_budget, default=10 ** 8)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--report", help="write the full report with witnesses here")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("ip", help="build, export and solve covering programs")
    ipsub = p.add_subparsers(dest="ip_command", required=True)
    b = ipsub.add_parser("build")
    b.add_argument("--hier", action="store_true", help="subsquare hierarchy of L(2^n)")
    b.add_argument("--l9", action="store_true", help="324 size-6 trades of L(9)")
    b.add_argument("--intercalates", action="store_true")
    b.add_argument("--trades", help="trade export file")
    b.add_argument("--square", default="group:3:2")
    b.add_argument("-m", type=int, default=2)
    b.add_argument("-n", type=int, default=3)
    b.add_argument("--max-level", type=int)
    b.add_argument("--rhs", help="comma-separated right-hand sides per level")
    b.add_argument("--rc", action="store_true", help="add RC symmetry rows (order 9)")
    b.add_argument("--exact3", action="store_true", help="exactly 3 cells per 3x3 subsquare")
    b.add_argument("--card", choices=["rows-cols-7-8", "subsquares-exactly-3"])
    b.add_argument("-o", "--out")
    e = ipsub.add_parser("export")
    e.add_argument("input", nargs="?")
    e.add_argument("-o", "--out")
    ls = ipsub.add_parser("solve-ls")
    ls.add_argument("input", nargs="?")
    ls.add_argument("--seed", type=int, required=True)
    ls.add_argument("--noise", type=float, default=0.05)
    ls.add_argument("--max-flips", type=_budget, default=10 ** 6)
    ls.add_argument("--restarts", type=int, default=1)
    ls.add_argument("--target", type=int)
    ls.add_argument("--tabu", type=int, default=3)
    ls.add_argument("--jobs", type=int, default=1)
    ls.add_argument("-o", "--out")
    bb = ipsub.add_parser("solve-bb")
    bb.add_argument("input", nargs="?")
    bb.add_argument("--budget", type=_budget, default=10 ** 9)
    bb.add_argument("--upper", type=int, help="only look for objectives below this")
    bb.add_argument("--prove-to", type=int, help="raise a proved lower bound to this value")
    bb.add_argument("-o", "--out")
    p.set_defaults(func=cmd_ip)

    p = sub.add_parser("construct", help="explicit constructions in L(2^n)")
    p.add_argument("what", choices=["svr", "t1", "dfk-start", "trim"])
    p.add_argument("-n", type=int, required=True)
    p.add_argument("--test", choices=["propagation", "search"], default="propagation")
    p.add_argument("--svr-first", action="store_true",
                   help="trim: scan only SvR entries until they stop dropping")
    p.add_argument("-o", "--out")
    p.set_defaults(func=cmd_construct)

    p = sub.add_parser("reproduce", help="run the reproduction checks")
    p.add_argument("tier", choices=["fast", "full"])
    p.set_defaults(func=cmd_reproduce)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (LatinError, cons.DataChecksumError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
