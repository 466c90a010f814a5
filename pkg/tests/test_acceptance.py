"""Acceptance criteria 1-12, each at its stated tolerance.

Every test records one PASS/FAIL line; the lines are printed together at the
end of the pytest run, and ``python tests/test_acceptance.py`` prints them
directly.  The unbounded IP2+RC bound run is gated on ``LATINFORGE_FULL=1``.
"""
from __future__ import annotations

import os
import time

import pytest

from latinforge import constructions as cons
from latinforge.completion import (
    count_completions,
    greedy_trim,
    is_propagation_minimal,
    propagate,
    verify_critical_set,
)
from latinforge.core import GroupSpec, PartialLatinSquare, group_square
from latinforge.cover import (
    SolverParams,
    build_hierarchical_cover,
    l9_trade_instance,
    lower_bound_packing,
    write_solution,
)
from latinforge.solvers import branch_and_bound, local_search, prove_lower_bound
from latinforge.trades import (
    enumerate_group_subsquares,
    enumerate_intercalates,
    enumerate_trades_bounded,
    intercalate_count_closed_form,
)
from tests.oracles import all_latin_squares, intercalates_brute, subsquares_brute

RESULTS: dict[int, str] = {}
FULL = os.environ.get("LATINFORGE_FULL") == "1"
_SOLUTIONS: dict[str, str] = {}


def record(n: int, ok: bool, detail: str) -> None:
    RESULTS[n] = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(RESULTS[n])
    assert ok, RESULTS[n]


class Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.t0


def test_criterion_01_c29_critical():
    with Timer() as t:
        rep = verify_critical_set(group_square(3, 2), cons.bundled_c29())
    ok = rep.passed and len(rep.necessity) == 29 and t.seconds < 60
    record(1, ok, f"C29 {rep.unique.status.value}, 29/29 witnesses: {not rep.failures()}, {t.seconds:.1f}s < 60s")


def test_criterion_02_c121_critical():
    with Timer() as t:
        rep = verify_critical_set(group_square(2, 4), cons.bundled_c121())
    ok = rep.passed and len(rep.necessity) == 121 and t.seconds < 15 * 60
    record(2, ok, f"C121 {rep.unique.status.value} ({rep.unique.nodes_used} nodes), "
                  f"{sum(1 for w in rep.necessity.values() if not isinstance(w, str))}/121 witnesses, "
                  f"{t.seconds:.1f}s < 900s")


def test_criterion_03_l9_trades():
    with Timer() as t:
        found = enumerate_trades_bounded(group_square(3, 2), 6, 6, 6, 6)
    record(3, len(found) == 324 and t.seconds < 60, f"{len(found)} trades (want 324), {t.seconds:.1f}s < 60s")


def test_criterion_04_counts():
    got = {n: len(enumerate_intercalates(group_square(2, n))) for n in (2, 3, 4)}
    brute = {n: intercalates_brute(group_square(2, n).grid) for n in (2, 3, 4)}
    closed = {n: intercalate_count_closed_form(n) for n in (2, 3, 4)}
    l9 = group_square(3, 2)
    fams = [len(enumerate_group_subsquares(GroupSpec(2, 4), k)) for k in (1, 2, 3)]
    sub9 = len(enumerate_group_subsquares(GroupSpec(3, 2), 1))
    ok = (
        got == brute == closed == {2: 12, 3: 112, 4: 960}
        and len(enumerate_intercalates(l9)) == 0 == intercalates_brute(l9.grid)
        and fams == [960, 560, 60]
        and sub9 == 36 == subsquares_brute(l9.grid, 3)
    )
    record(4, ok, f"intercalates {list(got.values())}, L(9) 0, L(16) families {fams}, L(9) 3x3 {sub9}")


def test_criterion_05_theorem1():
    sizes = [len(cons.theorem1_set(n).set) for n in (2, 3, 4, 5)]
    formula = [4 ** n - 3 ** n + 4 - 2 ** n - 2 ** (n - 2) for n in (2, 3, 4, 5)]
    small = [verify_critical_set(group_square(2, n), cons.theorem1_set(n).set).passed for n in (2, 3)]
    rep4 = verify_critical_set(group_square(2, 4), cons.theorem1_set(4).set)
    ok4 = rep4.unique.unique and not rep4.failures() and len(rep4.necessity) == 159
    ok = sizes == formula == [6, 31, 159, 745] and all(small) and ok4
    record(5, ok, f"sizes {sizes}, n=2,3 verified {small}, n=4 {rep4.unique.status.value} "
                  f"with {len(rep4.necessity) - len(rep4.failures())}/159 witnesses")


def test_criterion_06_replay():
    from latinforge.completion import forced_symbol

    ok, where = True, "all forced"
    for n in (2, 3, 4, 5):
        p = cons.theorem1_set(n).set
        for cell in cons.theorem1_completion_order(n):
            if forced_symbol(p, cell.row, cell.col) != cell.symbol:
                ok, where = False, f"n={n} {cell}"
                break
            p = p.union([cell])
        ok &= propagate(p) == group_square(2, n).as_partial()
    record(6, ok, f"add-back sequence for n=2..5: {where}, reconstructs L(2^n)")


def _l8_bnb():
    inst = build_hierarchical_cover(GroupSpec(2, 3), 2)
    res = branch_and_bound(inst, node_budget=10 ** 9)
    text = write_solution(res.solution, inst.name, solver="branch-and-bound", nodes=res.nodes)
    return res, text


def _ls_batch(inst, seeds, max_flips, target):
    out = []
    for s in seeds:
        res = local_search(inst, SolverParams(s, max_flips=max_flips, target=target))
        out.append((s, res.best, write_solution(res.best, inst.name, seed=s)))
    return out


@pytest.mark.slow
def test_criterion_07_l8_optimum():
    with Timer() as t:
        res, text = _l8_bnb()
    _SOLUTIONS["7-bnb"] = text
    inst = build_hierarchical_cover(GroupSpec(2, 3), 2)
    batch = _ls_batch(inst, range(16), 10 ** 6, 25)
    _SOLUTIONS["7-ls"] = "".join(t for _, _, t in batch)
    ls_hits = [s for s, sol, _ in batch if sol.feasible and sol.objective == 25]
    ok = res.optimal and res.solution.objective == 25 and res.nodes <= 10 ** 9 and ls_hits
    record(7, ok, f"branch and bound optimum {res.solution.objective} proved in {res.nodes} nodes "
                  f"({t.seconds:.0f}s); local search hit 25 on {len(ls_hits)}/16 seeds")


def test_criterion_08_l16_local_search():
    inst = build_hierarchical_cover(GroupSpec(2, 4), 3)
    batch = _ls_batch(inst, range(16), 10 ** 7, 124)
    _SOLUTIONS["8"] = "".join(t for _, _, t in batch)
    best = min(sol.objective for _, sol, _ in batch if sol.feasible)
    stretch = _ls_batch(inst, range(16), 10 ** 7, 112)
    best112 = min(sol.objective for _, sol, _ in stretch if sol.feasible)
    record(8, best <= 124, f"best {best} <= 124 over 16 seeds; stretch target 112 reached: "
                           f"{best112 <= 112} (best {best112}, not gated)")


def test_criterion_09_ip2_bounds():
    core = l9_trade_instance(rc=False)
    with Timer() as tp:
        packing = lower_bound_packing(core)
    inst = l9_trade_instance(rc=True)
    goal = 24 if FULL else 16
    with Timer() as t:
        bound, marks = prove_lower_bound(inst, goal)
    _SOLUTIONS["9"] = "".join(f"{m.bound} {m.nodes}\n" for m in marks)
    ok = packing >= 12 and tp.seconds < 1 and bound >= goal and (FULL or t.seconds < 600)
    tier = "full" if FULL else "fast"
    record(9, ok, f"packing bound {packing} in {tp.seconds:.2f}s; {tier} tier proved >= {bound} "
                  f"(goal {goal}) in {marks[-1].nodes} nodes, {t.seconds:.1f}s")


def test_criterion_10_order4_count():
    got = count_completions(PartialLatinSquare(4), limit=None)
    brute = len(all_latin_squares(4))
    record(10, got == brute == 576, f"count_completions {got}, exhaustive enumeration {brute}")


def test_criterion_11_trim():
    with Timer() as t:
        p = greedy_trim(group_square(2, 5), cons.dfk_trim_start(5))
    complete = propagate(p).is_complete()
    minimal = is_propagation_minimal(p)
    ok = len(p) <= 781 and complete and minimal and t.seconds < 30 * 60
    record(11, ok, f"trimmed 813 -> {len(p)} (<= 781; reference 658), propagation-complete {complete}, "
                   f"per-entry minimal {minimal}, {t.seconds:.1f}s")


@pytest.mark.slow
def test_criterion_12_determinism():
    if "7-bnb" not in _SOLUTIONS:
        pytest.skip("criterion 7 did not run in this session")
    _, text = _l8_bnb()
    l8 = build_hierarchical_cover(GroupSpec(2, 3), 2)
    l16 = build_hierarchical_cover(GroupSpec(2, 4), 3)
    same = {
        "7-bnb": text == _SOLUTIONS["7-bnb"],
        "7-ls": "".join(t for _, _, t in _ls_batch(l8, range(16), 10 ** 6, 25)) == _SOLUTIONS["7-ls"],
    }
    if "8" in _SOLUTIONS:
        same["8"] = "".join(t for _, _, t in _ls_batch(l16, range(16), 10 ** 7, 124)) == _SOLUTIONS["8"]
    if "9" in _SOLUTIONS:
        goal = 24 if FULL else 16
        _, marks = prove_lower_bound(l9_trade_instance(rc=True), goal)
        same["9"] = "".join(f"{m.bound} {m.nodes}\n" for m in marks) == _SOLUTIONS["9"]
    record(12, all(same.values()), f"byte-identical reruns: {same}")


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q"]))
