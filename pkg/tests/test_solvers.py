import pytest

from latinforge.core import GroupSpec
from latinforge.cover import (
    SolverParams,
    build_hierarchical_cover,
    build_trade_cover,
    check_solution,
    intercalate_instance,
    l9_trade_instance,
    lower_bound_packing,
    write_solution,
)
from latinforge.core import group_square
from latinforge.solvers import branch_and_bound, local_search, prove_lower_bound
from latinforge.trades import enumerate_intercalates
from tests.oracles import min_cover_brute


@pytest.fixture(scope="module")
def hier8():
    return build_hierarchical_cover(GroupSpec(2, 3), 2)


def test_bnb_matches_exhaustive_optimum_on_l4():
    inst = intercalate_instance(GroupSpec(2, 2))
    res = branch_and_bound(inst)
    assert res.optimal and res.solution.objective == min_cover_brute(inst) == 4
    assert res.lower_bound == 4 and res.root_bound <= 4
    assert check_solution(inst, res.solution.chosen)


@pytest.mark.parametrize("k", [3, 5, 8])
def test_bnb_on_partial_intercalate_covers(k):
    sq = group_square(2, 2)
    inst = build_trade_cover(sq, enumerate_intercalates(sq)[:k])
    res = branch_and_bound(inst)
    assert res.optimal and res.solution.objective == min_cover_brute(inst)


def test_bnb_upper_bound_without_solution(hier8):
    # nothing below 21 exists, so the search proves exactly that bound
    res = branch_and_bound(hier8, upper=21)
    assert res.solution is None and res.lower_bound == 21 and not res.optimal


def test_bnb_budget_keeps_sound_bound(hier8):
    res = branch_and_bound(hier8, node_budget=1000)
    assert not res.optimal
    assert res.lower_bound <= 25
    assert res.solution is None or res.solution.feasible


def test_root_bound_is_packing(hier8):
    res = branch_and_bound(hier8, node_budget=1)
    assert res.root_bound >= lower_bound_packing(hier8)


def test_prove_lower_bound_checkpoints():
    inst = l9_trade_instance(rc=True)
    bound, marks = prove_lower_bound(inst, 15)
    assert bound == 15
    assert [m.bound for m in marks] == list(range(marks[0].bound, 16))
    assert all(a.nodes <= b.nodes for a, b in zip(marks, marks[1:]))


def test_prove_lower_bound_stops_on_budget():
    inst = l9_trade_instance(rc=True)
    bound, marks = prove_lower_bound(inst, 30, node_budget=2000)
    assert 12 <= bound < 18
    assert marks[-1].bound == bound


def test_local_search_l8_reaches_optimum(hier8):
    res = local_search(hier8, SolverParams(0, max_flips=100_000, target=25))
    assert res.best.feasible and res.best.objective == 25
    assert check_solution(hier8, res.best.chosen)


def test_local_search_restarts_and_records(hier8):
    res = local_search(hier8, SolverParams(5, max_flips=2000, restarts=3))
    assert [r.seed for r in res.restarts] == [5, 6, 7]
    assert res.best.objective == min(r.objective for r in res.restarts if r.feasible)
    assert all(r.flips <= 2000 for r in res.restarts)


def test_local_search_is_deterministic(hier8):
    a = local_search(hier8, SolverParams(11, max_flips=5000, restarts=2))
    b = local_search(hier8, SolverParams(11, max_flips=5000, restarts=2))
    assert write_solution(a.best, "x") == write_solution(b.best, "x")
    assert a.restarts == b.restarts


def test_local_search_jobs_do_not_change_results(hier8):
    params = SolverParams(3, max_flips=5000, restarts=3)
    a = local_search(hier8, params, jobs=1)
    b = local_search(hier8, params, jobs=2)
    assert a.restarts == b.restarts and a.best == b.best


def test_local_search_zero_flips_is_all_ones(hier8):
    res = local_search(hier8, SolverParams(0, max_flips=0))
    assert res.best.objective == 64 and res.best.feasible


def test_local_search_handles_equality_rows():
    inst = l9_trade_instance(rc=True, exactly_three=True)
    res = local_search(inst, SolverParams(1, max_flips=200_000))
    # each parallel class of nine 3x3 subsquares partitions the grid, forcing 27 cells
    assert res.best.feasible and check_solution(inst, res.best.chosen)
    assert res.best.objective == 27


def test_local_search_single_constraint():
    from latinforge.cover import CoverInstance, LinearConstraint

    inst = CoverInstance(2, (LinearConstraint(((0, 1), (3, 1)), ">=", 1, "x"),))
    res = local_search(inst, SolverParams(0, max_flips=100))
    assert res.best.feasible and res.best.objective == 1


def test_bnb_bound_never_exceeds_local_search(hier8):
    ls = local_search(hier8, SolverParams(2, max_flips=20_000))
    for budget in (10, 1000, 100_000):
        assert branch_and_bound(hier8, node_budget=budget).lower_bound <= ls.best.objective
