"""Reproduction checks grouped into a fast tier and a full tier.

Each check returns ``(ok, detail)``; ``run_tier`` prints one row per check
and returns a nonzero exit code if any check failed.
"""
from __future__ import annotations

import itertools
import sys
import time
from typing import Callable

from . import constructions as cons
from .completion import (
    count_completions,
    greedy_trim,
    is_propagation_minimal,
    propagate,
    verify_critical_set,
)
from .core import GroupSpec, PartialLatinSquare, group_square
from .cover import (
    SolverParams,
    build_hierarchical_cover,
    l9_trade_instance,
    lower_bound_packing,
    write_solution,
)
from .trades import (
    enumerate_group_subsquares,
    enumerate_intercalates,
    enumerate_trades_bounded,
    intercalate_count_closed_form,
)

Check = Callable[[], tuple[bool, str]]


def brute_force_latin_count(n: int) -> int:
    """Count Latin squares of order n by stacking row permutations."""
    perms = list(itertools.permutations(range(n)))
    total = 0

    def extend(rows, used_cols):
        nonlocal total
        if len(rows) == n:
            total += 1
            return
        for p in perms:
            if all(p[c] not in used_cols[c] for c in range(n)):
                extend(rows + [p], [used_cols[c] | {p[c]} for c in range(n)])

    extend([], [frozenset()] * n)
    return total


def check_c29() -> tuple[bool, str]:
    rep = verify_critical_set(group_square(3, 2), cons.bundled_c29())
    return rep.passed, f"{rep.unique.status.value}, {len(rep.necessity)} witnesses"


def check_c121() -> tuple[bool, str]:
    rep = verify_critical_set(group_square(2, 4), cons.bundled_c121())
    return rep.passed, f"{rep.unique.status.value}, {rep.unique.nodes_used} nodes"


def check_l9_trades() -> tuple[bool, str]:
    found = enumerate_trades_bounded(group_square(3, 2), 6, 6, 6, 6)
    return len(found) == 324, f"{len(found)} trades of size <= 6"


def check_counts() -> tuple[bool, str]:
    got = [len(enumerate_intercalates(group_square(2, n))) for n in (2, 3, 4)]
    want = [intercalate_count_closed_form(n) for n in (2, 3, 4)]
    l9 = len(enumerate_intercalates(group_square(3, 2)))
    fams = [len(enumerate_group_subsquares(GroupSpec(2, 4), k)) for k in (1, 2, 3)]
    sub9 = len(enumerate_group_subsquares(GroupSpec(3, 2), 1))
    ok = got == want == [12, 112, 960] and l9 == 0 and fams == [960, 560, 60] and sub9 == 36
    return ok, f"intercalates {got}, L(9) {l9}, L(16) families {fams}, L(9) 3x3 {sub9}"


def check_theorem1() -> tuple[bool, str]:
    sizes = [len(cons.theorem1_set(n).set) for n in (2, 3, 4, 5)]
    ok = sizes == [6, 31, 159, 745]
    for n in (2, 3):
        ok &= verify_critical_set(group_square(2, n), cons.theorem1_set(n).set).passed
    rep4 = verify_critical_set(group_square(2, 4), cons.theorem1_set(4).set)
    ok &= rep4.unique.unique and not rep4.failures() and not rep4.budget_exhausted
    return ok, f"sizes {sizes}, n=2,3 verified, n=4 {rep4.unique.status.value}"


def check_replay() -> tuple[bool, str]:
    from .completion import forced_symbol

    for n in (2, 3, 4, 5):
        square = group_square(2, n)
        p = cons.theorem1_set(n).set
        for cell in cons.theorem1_completion_order(n):
            if forced_symbol(p, cell.row, cell.col) != cell.symbol:
                return False, f"n={n}: {cell} not forced"
            p = p.union([cell])
        if propagate(p) != square.as_partial():
            return False, f"n={n}: replay does not reach L(2^{n})"
    return True, "add-back sequence forced for n=2..5"


def check_count_576() -> tuple[bool, str]:
    got = count_completions(PartialLatinSquare(4, frozenset()), limit=None)
    brute = brute_force_latin_count(4)
    return got == brute == 576, f"search {got}, brute force {brute}"


def check_trim() -> tuple[bool, str]:
    square = group_square(2, 5)
    p = greedy_trim(square, cons.dfk_trim_start(5))
    ok = len(p) <= 781 and propagate(p).is_complete() and is_propagation_minimal(p)
    return ok, f"size {len(p)} (reference 658)"


def _ls_batch(inst, seeds, max_flips, target=None):
    from .solvers import local_search

    out = []
    for s in seeds:
        res = local_search(inst, SolverParams(s, max_flips=max_flips, target=target))
        out.append(res.best)
    return out


def check_l8_local() -> tuple[bool, str]:
    inst = build_hierarchical_cover(GroupSpec(2, 3), 2)
    sols = _ls_batch(inst, range(16), 10 ** 6, target=25)
    best = min(s.objective for s in sols if s.feasible)
    return best == 25, f"best {best} over 16 seeds"


def check_l16_local(seeds=range(4)) -> Check:
    def run() -> tuple[bool, str]:
        inst = build_hierarchical_cover(GroupSpec(2, 4), 3)
        sols = _ls_batch(inst, seeds, 10 ** 7, target=124)
        objs = [s.objective for s in sols if s.feasible]
        return bool(objs) and min(objs) <= 124, f"objectives {objs}"
    return run


def check_l16_stretch() -> tuple[bool, str]:
    inst = build_hierarchical_cover(GroupSpec(2, 4), 3)
    sols = _ls_batch(inst, range(16), 10 ** 7, target=112)
    objs = [s.objective for s in sols if s.feasible]
    return bool(objs) and min(objs) <= 124, f"best {min(objs)} (stretch 112)"


def check_ip2(goal: int) -> Check:
    def run() -> tuple[bool, str]:
        from .solvers import prove_lower_bound

        core = l9_trade_instance(rc=False)
        packing = lower_bound_packing(core)
        inst = l9_trade_instance(rc=True)
        bound, marks = prove_lower_bound(
            inst, goal,
            progress=lambda cp: print(f"  checkpoint bound {cp.bound} nodes {cp.nodes}",
                                      file=sys.stderr, flush=True),
        )
        return packing >= 12 and bound >= goal, (
            f"packing {packing}, proved >= {bound} after {marks[-1].nodes} nodes"
        )
    return run


def check_l8_bnb() -> tuple[bool, str]:
    from .solvers import branch_and_bound

    res = branch_and_bound(build_hierarchical_cover(GroupSpec(2, 3), 2), 10 ** 9)
    obj = res.solution.objective if res.solution else None
    return res.optimal and obj == 25, f"optimum {obj}, {res.nodes} nodes"


def check_determinism() -> tuple[bool, str]:
    from .solvers import branch_and_bound, local_search

    def files():
        out = []
        for n, level in ((3, 2), (4, 3)):
            inst = build_hierarchical_cover(GroupSpec(2, n), level)
            res = local_search(inst, SolverParams(7, max_flips=200_000))
            out.append(write_solution(res.best, inst.name, seed=7))
        l9 = l9_trade_instance(rc=True)
        res = local_search(l9, SolverParams(7, max_flips=200_000))
        out.append(write_solution(res.best, l9.name, seed=7))
        bb = branch_and_bound(l9, 100_000)
        out.append(f"{bb.lower_bound} {bb.nodes}\n")
        return out

    return files() == files(), "two identical runs give identical solution files"


FAST: list[tuple[str, Check]] = [
    ("C29 critical in L(9)", check_c29),
    ("C121 critical in L(16)", check_c121),
    ("324 size-6 trades of L(9)", check_l9_trades),
    ("intercalate and subsquare counts", check_counts),
    ("theorem1_set sizes and criticality", check_theorem1),
    ("theorem1_set add-back replay", check_replay),
    ("L(8) local search reaches 25", check_l8_local),
    ("L(16) local search <= 124", check_l16_local()),
    ("IP2 packing >= 12, proved >= 16", check_ip2(16)),
    ("order-4 completions = 576", check_count_576),
    ("trim of dfk start, n=5", check_trim),
    ("determinism", check_determinism),
]

FULL: list[tuple[str, Check]] = FAST + [
    ("L(8) branch and bound optimum 25", check_l8_bnb),
    ("L(16) local search, 16 seeds", check_l16_stretch),
    ("IP2+RC proved >= 24", check_ip2(24)),
]


def run_checks(checks: list[tuple[str, Check]], out=sys.stdout) -> int:
    failed = 0
    width = max(len(name) for name, _ in checks)
    for name, fn in checks:
        t0 = time.perf_counter()
        try:
            ok, detail = fn()
        except Exception as exc:  # a crashing check counts as a failure
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        dt = time.perf_counter() - t0
        failed += not ok
        print(f"{'PASS' if ok else 'FAIL'}  {name:<{width}}  {dt:8.1f}s  {detail}", file=out, flush=True)
    print(f"{len(checks) - failed}/{len(checks)} checks passed", file=out)
    return 1 if failed else 0


def run_tier(tier: str) -> int:
    return run_checks(FAST if tier == "fast" else FULL)
