from pathlib import Path

import pytest
from hypothesis import given, strategies as st

from latinforge.core import GroupSpec, LatinError, group_square
from latinforge.cover import (
    EQ,
    GE,
    LE,
    CoverInstance,
    CoverSolution,
    LinearConstraint,
    LPSyntaxError,
    SolverParams,
    add_cardinality_constraints,
    add_rc_symmetry,
    build_hierarchical_cover,
    build_trade_cover,
    check_solution,
    export_lp,
    import_lp,
    intercalate_instance,
    l9_trade_instance,
    lower_bound_packing,
    read_solution,
    report_slack_histogram,
    solution_from_cells,
    write_solution,
)
from latinforge.trades import enumerate_intercalates
from tests.oracles import min_cover_brute

DATA = Path(__file__).parent / "data"


def test_hierarchical_l8_shape():
    inst = build_hierarchical_cover(GroupSpec(2, 3), 2)
    assert inst.num_vars == 64
    assert inst.tag_counts() == {"I1": 112, "I2": 28}
    assert {k.rhs for k in inst.constraints if k.tag == "I2"} == {5}


def test_hierarchical_l16_shape():
    inst = build_hierarchical_cover(GroupSpec(2, 4), 3)
    assert inst.tag_counts() == {"I1": 960, "I2": 560, "I3": 60}
    assert {k.tag: k.rhs for k in inst.constraints} == {"I1": 1, "I2": 5, "I3": 25}


def test_hierarchical_rejects_bad_levels():
    with pytest.raises(LatinError):
        build_hierarchical_cover(GroupSpec(2, 3), 3)
    with pytest.raises(LatinError):
        build_hierarchical_cover(GroupSpec(3, 2), 1)
    with pytest.raises(LatinError):
        build_hierarchical_cover(GroupSpec(2, 3), 2, [1])
    custom = build_hierarchical_cover(GroupSpec(2, 3), 2, [1, 6])
    assert {k.rhs for k in custom.constraints if k.tag == "I2"} == {6}


def test_l9_instances():
    core = l9_trade_instance(rc=False)
    assert core.tag_counts() == {"trade": 324}
    rc = l9_trade_instance(rc=True)
    assert rc.tag_counts() == {"trade": 324, "symmetry": 8}
    sym = [k for k in rc.constraints if k.tag == "symmetry"]
    assert all(k.sense == GE and k.rhs == 0 and len(k.terms) == 18 for k in sym)
    ex3 = l9_trade_instance(rc=True, exactly_three=True)
    assert ex3.tag_counts()["cardinality"] == 36
    with pytest.raises(LatinError):
        add_rc_symmetry(build_hierarchical_cover(GroupSpec(2, 3), 1))


def test_cardinality_rows_l16():
    inst = add_cardinality_constraints(build_hierarchical_cover(GroupSpec(2, 4), 1), "rows-cols-7-8")
    assert inst.tag_counts()["cardinality"] == 96
    with pytest.raises(LatinError):
        add_cardinality_constraints(inst, "bogus")


def test_packing_bounds():
    assert lower_bound_packing(l9_trade_instance(rc=False)) >= 12
    assert lower_bound_packing(intercalate_instance(GroupSpec(2, 2))) == 4
    # symmetry and cardinality rows never contribute
    assert lower_bound_packing(l9_trade_instance(rc=True)) == lower_bound_packing(l9_trade_instance(rc=False))


def _tiny_instances():
    yield intercalate_instance(GroupSpec(2, 2))
    yield build_hierarchical_cover(GroupSpec(2, 2), 1, [2])
    sq = group_square(2, 2)
    yield build_trade_cover(sq, enumerate_intercalates(sq)[:5])


@pytest.mark.parametrize("inst", list(_tiny_instances()), ids=lambda i: i.name)
def test_packing_is_a_lower_bound(inst):
    assert lower_bound_packing(inst) <= min_cover_brute(inst)


def test_exhaustive_optimum_of_l4_intercalates():
    assert min_cover_brute(intercalate_instance(GroupSpec(2, 2))) == 4


def test_solution_checks(l4):
    inst = intercalate_instance(GroupSpec(2, 2))
    assert check_solution(inst, range(16))
    assert not check_solution(inst, [])
    sol = solution_from_cells(inst, l4.as_partial())
    assert sol.feasible and sol.objective == 16
    hist = report_slack_histogram(inst, sol)
    assert hist == {("I1", 4): 12}
    assert sol.cells(l4) == l4.as_partial()


def test_solution_file_round_trip():
    sol = CoverSolution(4, (0, 6, 11, 13), True)
    text = write_solution(sol, "demo", seed=3)
    assert "seed 3" in text
    back = read_solution(text)
    assert back == sol


def test_constraint_validation():
    with pytest.raises(LatinError):
        LinearConstraint(((0, 1),), "!=", 1, "x")
    k = LinearConstraint(((0, 1), (1, -1)), LE, 0, "symmetry")
    assert not k.is_covering and k.satisfied({1}) and not k.satisfied({0})
    assert LinearConstraint(((0, 1), (1, 1)), EQ, 1, "cardinality").satisfied({0})


def test_golden_lp_l4():
    text = export_lp(intercalate_instance(GroupSpec(2, 2)))
    assert text == (DATA / "intercalates_L4.lp").read_text()


@pytest.mark.parametrize(
    "inst",
    [
        build_hierarchical_cover(GroupSpec(2, 3), 2),
        l9_trade_instance(rc=True, exactly_three=True),
        add_cardinality_constraints(build_hierarchical_cover(GroupSpec(2, 4), 1), "rows-cols-7-8"),
    ],
    ids=lambda i: i.name,
)
def test_lp_round_trip(inst):
    text = export_lp(inst)
    back = import_lp(text)
    assert back == inst and back.name == inst.name
    assert export_lp(back) == text


@given(
    st.lists(
        st.tuples(
            st.lists(st.tuples(st.integers(0, 8), st.integers(-3, 3).filter(bool)), min_size=1, max_size=12,
                     unique_by=lambda t: t[0]),
            st.sampled_from([GE, LE, EQ]),
            st.integers(-5, 9),
            st.sampled_from(["I1", "trade", "symmetry", "cardinality"]),
        ),
        max_size=15,
    ),
    st.text("abcxyz-", min_size=1, max_size=8),
)
def test_lp_round_trip_property(rows, name):
    # covering rows need a non-negative right-hand side
    rows = [(t, s, abs(r) if g in ("I1", "trade") else r, g) for t, s, r, g in rows]
    inst = CoverInstance(3, tuple(LinearConstraint(tuple(t), s, r, g) for t, s, r, g in rows), name)
    assert import_lp(export_lp(inst)) == inst


@pytest.mark.parametrize(
    "text, line",
    [
        ("Minimize\n obj: x_0_0\nSubject To\n c1: x_0_0 >= 1\nBinaries\n x_0_0\n", 6),
        ("\\ order 1\nMinimize\n obj: x_0_0\nSubject To\n c1: x_9_9 >= 1\nBinaries\n x_0_0\nEnd\n", 5),
        ("\\ order 1\nMinimize\n obj: x_0_0\nSubject To\n c1: x_0_0 >= one\nBinaries\n x_0_0\nEnd\n", 5),
        ("\\ order 1\nMinimize\n obj: x_0_0 >= 2\nBinaries\n x_0_0\nEnd\n", 3),
        ("x_0_0\nMinimize\nEnd\n", 1),
    ],
)
def test_lp_syntax_errors(text, line):
    with pytest.raises(LPSyntaxError) as exc:
        import_lp(text)
    assert exc.value.line == line


def test_lp_error_reports_column():
    text = "\\ order 1\nMinimize\n obj: x_0_0\nSubject To\n c1: x_9_9 >= 1\nBinaries\n x_0_0\nEnd\n"
    with pytest.raises(LPSyntaxError) as exc:
        import_lp(text)
    assert exc.value.column == 6


def test_solver_params_validation():
    with pytest.raises(ValueError):
        SolverParams(1, noise=2.0)
    with pytest.raises(ValueError):
        SolverParams(1, restarts=0)


def test_packing_trivial_cases():
    one = CoverInstance(2, (LinearConstraint(((0, 1), (1, 1), (2, 1), (3, 1)), GE, 5, "x"),))
    assert lower_bound_packing(one) == 5
    two = CoverInstance(2, (
        LinearConstraint(((0, 1), (1, 1)), GE, 1, "x"),
        LinearConstraint(((0, 1), (1, 1)), GE, 2, "x"),
    ))
    assert lower_bound_packing(two) == 2


def test_histogram_of_empty_solution():
    inst = intercalate_instance(GroupSpec(2, 2))
    assert report_slack_histogram(inst, CoverSolution(4, (), False)) == {("I1", 0): 12}
