import pytest

from latinforge.core import Cell, GroupSpec, LatinError, PartialLatinSquare, group_square
from latinforge.trades import (
    Trade,
    TradeBudgetExceeded,
    enumerate_group_subsquares,
    enumerate_intercalates,
    enumerate_trades_bounded,
    find_mate,
    find_trade_through,
    intercalate,
    intercalate_count_closed_form,
    is_trade,
    read_trades,
    subgroup_bases,
    write_trades,
)
from tests.oracles import gaussian_binomial_2, intercalates_brute, size6_trades_brute, subsquares_brute


def _p(n, cells):
    return PartialLatinSquare(n, frozenset(Cell(*c) for c in cells))


def test_intercalate_is_trade(l4):
    t = intercalate(l4, 0, 1, 0, 1)
    assert t is not None and len(t) == 4
    assert t.mate.symbol_at(0, 0) == 1
    assert intercalate(group_square(3, 2), 0, 1, 0, 1) is None


def test_is_trade_rejects_non_trades():
    body = _p(2, [(0, 0, 0), (0, 1, 1), (1, 0, 1), (1, 1, 0)])
    mate = _p(2, [(0, 0, 1), (0, 1, 0), (1, 0, 0), (1, 1, 1)])
    assert is_trade(body, mate)
    assert not is_trade(body, body)
    assert not is_trade(body, _p(2, [(0, 0, 1), (0, 1, 0)]))
    assert not is_trade(_p(2, []), _p(2, []))
    with pytest.raises(LatinError):
        Trade(body, body)


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_intercalate_counts(n):
    sq = group_square(2, n)
    got = len(enumerate_intercalates(sq))
    assert got == intercalate_count_closed_form(n) == (2 ** n - 1) * 4 ** (n - 1)
    if n <= 4:
        assert got == intercalates_brute(sq.grid)


def test_l9_has_no_intercalates(l9):
    assert enumerate_intercalates(l9) == []
    assert intercalates_brute(l9.grid) == 0


def test_intercalate_order_is_lexicographic(l8):
    keys = [
        (min(c.row for c in t.body), max(c.row for c in t.body),
         min(c.col for c in t.body), max(c.col for c in t.body))
        for t in enumerate_intercalates(l8)
    ]
    assert keys == sorted(keys)


@pytest.mark.parametrize("k, expected", [(1, 960), (2, 560), (3, 60)])
def test_l16_subsquare_families(k, expected):
    fam = enumerate_group_subsquares(GroupSpec(2, 4), k)
    assert len(fam) == expected == gaussian_binomial_2(4, k) * 4 ** (4 - k)
    assert all(len(fam.cells(i)) == 4 ** k for i in range(len(fam)))


def test_l8_order4_family_matches_brute_force(l8):
    fam = enumerate_group_subsquares(GroupSpec(2, 3), 2)
    assert len(fam) == subsquares_brute(l8.grid, 4) == 28


def test_l9_order3_subsquares(l9):
    fam = enumerate_group_subsquares(GroupSpec(3, 2), 1)
    assert len(fam) == 36 == subsquares_brute(l9.grid, 3)
    assert len(subgroup_bases(GroupSpec(3, 2), 1)) == 4


def test_l9_size6_trades_match_brute_force(l9):
    found = enumerate_trades_bounded(l9, 6, 6, 6, 6)
    assert len(found) == 324
    assert {t.shape for t in found} == size6_trades_brute(l9.grid)
    assert all(len(t) == 6 and is_trade(t.body, t.mate) for t in found)


def test_l4_bounded_trades(l4):
    size4 = enumerate_trades_bounded(l4, 4)
    assert len(size4) == 12
    assert {t.shape for t in size4} == {t.shape for t in enumerate_intercalates(l4)}
    assert enumerate_trades_bounded(l4, 3) == []


def test_trade_budget(l9):
    with pytest.raises(TradeBudgetExceeded) as exc:
        enumerate_trades_bounded(l9, 6, node_budget=50)
    assert exc.value.nodes > 50


def test_find_mate_for_disjoint_union(l4):
    a = intercalate(l4, 0, 1, 0, 1)
    b = intercalate(l4, 2, 3, 2, 3)
    body = a.body.union(b.body)
    mate = find_mate(body, l4)
    assert mate is not None and is_trade(body, mate)
    assert find_mate(_p(4, [(0, 0, 0), (0, 1, 1)]), l4) is None


def test_find_trade_through_avoids_other_cells(l9):
    target = Cell(0, 0, 0)
    avoid = _p(9, [target, (1, 1, l9[1, 1]), (0, 1, l9[0, 1])])
    t = find_trade_through(l9, (0, 0), avoid, max_size=6)
    assert t is not None and target in t.body
    assert t.body.entries & avoid.entries == {target}


def test_trade_file_round_trip(l9):
    trades = enumerate_trades_bounded(l9, 6)[:5]
    assert read_trades(write_trades(trades)) == trades
    assert read_trades("") == []
