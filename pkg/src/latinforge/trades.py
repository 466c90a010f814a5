"""Latin trades: validation, intercalates, group subsquares, bounded search.

The bounded search exploits a closure property of trades inside a Latin
square L: if a body cell (r, c) receives mate symbol s', the body must also
contain the cell of row r holding s' in L and the cell of column c holding
s' in L.  Growing the body only through such forced cells, a complete mate
assignment is automatically disjoint and mutually balanced.
"""
from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

from .core import (
    Cell,
    GroupSpec,
    LatinError,
    LatinSquare,
    PartialLatinSquare,
    _parse_pls_lines,
    is_subsquare,
    write_pls,
)


class TradeBudgetExceeded(RuntimeError):
    """Node budget ran out; ``partial`` holds the trades found so far."""

    def __init__(self, partial: list["Trade"], nodes: int):
        super().__init__(f"trade search budget exhausted after {nodes} nodes")
        self.partial = partial
        self.nodes = nodes


@dataclass(frozen=True)
class Trade:
    body: PartialLatinSquare
    mate: PartialLatinSquare

    def __post_init__(self):
        if not is_trade(self.body, self.mate):
            raise LatinError("body/mate pair is not a Latin trade")

    def __len__(self) -> int:
        return len(self.body)

    @property
    def shape(self) -> frozenset[tuple[int, int]]:
        return self.body.shape()

    def key(self) -> tuple[int, ...]:
        n = self.body.order
        return tuple(sorted(r * n + c for r, c, _ in self.body.entries))


@dataclass(frozen=True)
class SubsquareFamily:
    level: int
    members: tuple[tuple[tuple[int, ...], tuple[int, ...]], ...]

    def __len__(self) -> int:
        return len(self.members)

    def cells(self, index: int) -> list[tuple[int, int]]:
        rows, cols = self.members[index]
        return [(r, c) for r in rows for c in cols]


def is_trade(body: PartialLatinSquare, mate: PartialLatinSquare) -> bool:
    if body.order != mate.order or len(body) == 0:
        return False
    if body.shape() != mate.shape():
        return False
    for r, c, s in body.entries:
        if mate.symbol_at(r, c) == s:
            return False
    for axis in (0, 1):
        a = Counter((e[axis], e.symbol) for e in body.entries)
        b = Counter((e[axis], e.symbol) for e in mate.entries)
        if a != b:
            return False
    return True


def intercalate(square: LatinSquare, r1: int, r2: int, c1: int, c2: int) -> Trade | None:
    g = square.grid
    if g[r1][c1] != g[r2][c2] or g[r1][c2] != g[r2][c1]:
        return None
    n = square.order
    body = PartialLatinSquare(
        n, frozenset({Cell(r1, c1, g[r1][c1]), Cell(r1, c2, g[r1][c2]),
                      Cell(r2, c1, g[r2][c1]), Cell(r2, c2, g[r2][c2])})
    )
    mate = PartialLatinSquare(
        n, frozenset({Cell(r1, c1, g[r1][c2]), Cell(r1, c2, g[r1][c1]),
                      Cell(r2, c1, g[r2][c2]), Cell(r2, c2, g[r2][c1])})
    )
    return Trade(body, mate)


def enumerate_intercalates(square: LatinSquare) -> list[Trade]:
    """All 2x2 subsquares, ordered by (r1, r2, c1, c2)."""
    n = square.order
    g = square.grid
    out = []
    for r1 in range(n):
        for r2 in range(r1 + 1, n):
            # perm[c] = column of row r2 holding g[r1][c]
            perm = [square.col_of(r2, g[r1][c]) for c in range(n)]
            for c1 in range(n):
                c2 = perm[c1]
                if c2 > c1 and perm[c2] == c1:
                    out.append(intercalate(square, r1, r2, c1, c2))
    return out


def intercalate_count_closed_form(n: int) -> int:
    return (2 ** n - 1) * 4 ** (n - 1)


# --- group subsquares ------------------------------------------------------


def _is_prime(m: int) -> bool:
    return m >= 2 and all(m % d for d in range(2, int(m ** 0.5) + 1))


def subgroup_bases(spec: GroupSpec, k: int) -> list[tuple[int, ...]]:
    """Reduced row-echelon bases of all order-m^k subgroups of Z_m^n (m prime)."""
    m, n = spec.base, spec.exponent
    if not _is_prime(m):
        raise LatinError("subgroup enumeration needs a prime base")
    bases = []
    for pivots in itertools.combinations(range(n), k):
        free = [
            (i, j)
            for i, p in enumerate(pivots)
            for j in range(p + 1, n)
            if j not in pivots
        ]
        for values in itertools.product(range(m), repeat=len(free)):
            rows = [[0] * n for _ in range(k)]
            for i, p in enumerate(pivots):
                rows[i][p] = 1
            for (i, j), v in zip(free, values):
                rows[i][j] = v
            bases.append(tuple(spec.from_digits(r) for r in rows))
    return sorted(bases)


def span(spec: GroupSpec, basis: Sequence[int]) -> list[int]:
    elems = {0}
    for b in basis:
        new = set()
        for e in elems:
            x = e
            for _ in range(spec.base):
                new.add(x)
                x = spec.add(x, b)
        elems = new
    return sorted(elems)


def enumerate_group_subsquares(spec: GroupSpec, k: int) -> SubsquareFamily:
    if not 1 <= k < spec.exponent:
        raise LatinError(f"level {k} outside 1..{spec.exponent - 1}")
    from .core import elementary_abelian_square

    square = elementary_abelian_square(spec)
    members = []
    for basis in subgroup_bases(spec, k):
        h = span(spec, basis)
        reps = sorted({min(spec.add(a, x) for x in h) for a in range(spec.order)})
        cosets = [tuple(sorted(spec.add(a, x) for x in h)) for a in reps]
        for rows in cosets:
            for cols in cosets:
                if not is_subsquare(square, rows, cols):
                    raise AssertionError("coset pair is not a subsquare")
                members.append((rows, cols))
    return SubsquareFamily(k, tuple(members))


# --- bounded search --------------------------------------------------------


class _TradeSearch:
    """Depth-first growth of a trade body from a root cell.

    ``allowed(idx)`` decides whether a forced cell index may join the body.
    """

    def __init__(self, square, max_size, max_rows, max_cols, max_symbols, budget):
        self.L = square
        self.n = square.order
        self.max_size = max_size
        self.max_rows = max_rows
        self.max_cols = max_cols
        self.max_symbols = max_symbols
        self.budget = budget
        self.nodes = 0

    def run(self, start: int | Iterable[int], allowed, on_found) -> bool:
        """Search trades whose body contains ``start``; stop once on_found is truthy."""
        n = self.n
        self.allowed = allowed
        self.on_found = on_found
        start = [start] if isinstance(start, int) else sorted(start)
        self.body = dict.fromkeys(start)
        self.row_used = [0] * n
        self.col_used = [0] * n
        self.rows = Counter(i // n for i in start)
        self.cols = Counter(i % n for i in start)
        self.syms = Counter(self.L.grid[i // n][i % n] for i in start)
        return self._dfs()

    def _within_bounds(self) -> bool:
        return (
            len(self.body) <= self.max_size
            and len(self.rows) <= self.max_rows
            and len(self.cols) <= self.max_cols
            and len(self.syms) <= self.max_symbols
        )

    def _add(self, idx: int) -> bool:
        if idx in self.body:
            return False
        n = self.n
        self.body[idx] = None
        self.rows[idx // n] += 1
        self.cols[idx % n] += 1
        self.syms[self.L.grid[idx // n][idx % n]] += 1
        return True

    def _remove(self, idx: int) -> None:
        n = self.n
        del self.body[idx]
        for counter, key in (
            (self.rows, idx // n),
            (self.cols, idx % n),
            (self.syms, self.L.grid[idx // n][idx % n]),
        ):
            counter[key] -= 1
            if not counter[key]:
                del counter[key]

    def _dfs(self) -> bool:
        self.nodes += 1
        if self.budget is not None and self.nodes > self.budget:
            raise TradeBudgetExceeded([], self.nodes)
        pending = [i for i, s in self.body.items() if s is None]
        if not pending:
            return bool(self.on_found(dict(self.body)))
        idx = min(pending)
        n = self.n
        r, c = divmod(idx, n)
        L = self.L
        own = L.grid[r][c]
        used = self.row_used[r] | self.col_used[c]
        for s in range(n):
            if s == own or used >> s & 1:
                continue
            a = r * n + L.col_of(r, s)
            b = L.row_of(c, s) * n + c
            if not (self.allowed(a) and self.allowed(b)):
                continue
            added = [x for x in (a, b) if self._add(x)]
            if self._within_bounds():
                self.body[idx] = s
                self.row_used[r] |= 1 << s
                self.col_used[c] |= 1 << s
                stop = self._dfs()
                self.row_used[r] &= ~(1 << s)
                self.col_used[c] &= ~(1 << s)
                self.body[idx] = None
                if stop:
                    for x in reversed(added):
                        self._remove(x)
                    return True
            for x in reversed(added):
                self._remove(x)
        return False


def _trade_from_assignment(square: LatinSquare, assign: dict[int, int]) -> Trade:
    n = square.order
    body = PartialLatinSquare(
        n, frozenset(Cell(i // n, i % n, square.grid[i // n][i % n]) for i in assign)
    )
    mate = PartialLatinSquare(n, frozenset(Cell(i // n, i % n, s) for i, s in assign.items()))
    return Trade(body, mate)


def _has_smaller_trade(square: LatinSquare, cells: frozenset[int], limit: int) -> bool:
    n = square.order
    search = _TradeSearch(square, limit - 1, n, n, n, None)
    for root in sorted(cells):
        allowed = lambda i, root=root: i in cells and i >= root
        if search.run(root, allowed, lambda assign: True):
            return True
    return False


def enumerate_trades_bounded(
    square: LatinSquare,
    max_size: int,
    max_rows: int | None = None,
    max_cols: int | None = None,
    max_symbols: int | None = None,
    node_budget: int | None = 10_000_000,
) -> list[Trade]:
    """All minimal trades of ``square`` within the size and line bounds.

    Each body is discovered from its least cell (row-major), so roots never
    revisit each other's trades. Output is sorted by (size, body cell indices).
    """
    if max_size > 20:
        raise LatinError("max_size above 20 is not supported")
    n = square.order
    max_rows = n if max_rows is None else max_rows
    max_cols = n if max_cols is None else max_cols
    max_symbols = n if max_symbols is None else max_symbols
    found: dict[frozenset[int], dict[int, int]] = {}
    if max_size < 4:
        return []
    search = _TradeSearch(square, max_size, max_rows, max_cols, max_symbols, node_budget)

    def record(assign):
        key = frozenset(assign)
        if key not in found:
            found[key] = assign
        return False

    try:
        for root in range(n * n):
            search.run(root, lambda i, root=root: i >= root, record)
    except TradeBudgetExceeded as exc:
        partial = _finish(square, found)
        raise TradeBudgetExceeded(partial, exc.nodes) from None
    return _finish(square, found)


def _finish(square, found):
    out = []
    for key in sorted(found, key=lambda k: (len(k), sorted(k))):
        if len(key) > 4 and _has_smaller_trade(square, key, len(key)):
            continue
        out.append(_trade_from_assignment(square, found[key]))
    return out


def find_trade_through(
    square: LatinSquare,
    cell: tuple[int, int],
    avoid: PartialLatinSquare,
    max_size: int,
    node_budget: int | None = 100_000,
) -> Trade | None:
    """A trade containing ``cell`` whose body misses every other entry of ``avoid``.

    Raises TradeBudgetExceeded if the budget runs out first.
    """
    n = square.order
    root = cell[0] * n + cell[1]
    blocked = {r * n + c for r, c, _ in avoid.entries} - {root}
    search = _TradeSearch(square, max_size, n, n, n, node_budget)
    hit: list[dict[int, int]] = []

    def record(assign):
        hit.append(assign)
        return True

    search.run(root, lambda i: i not in blocked, record)
    return _trade_from_assignment(square, hit[0]) if hit else None


def find_mate(body: PartialLatinSquare, square: LatinSquare) -> PartialLatinSquare | None:
    if not body.is_subset_of(square):
        raise LatinError("body is not contained in the square")
    if len(body) < 4:
        return None
    n = square.order
    cells = frozenset(r * n + c for r, c, _ in body.entries)
    search = _TradeSearch(square, len(cells), n, n, n, None)
    hit: list[dict[int, int]] = []

    def record(assign):
        hit.append(assign)
        return True

    search.run(cells, lambda i: i in cells, record)
    if not hit:
        return None
    return _trade_from_assignment(square, hit[0]).mate


# --- export ----------------------------------------------------------------


def write_trades(trades: Iterable[Trade]) -> str:
    records = [write_pls(t.body) + "---\n" + write_pls(t.mate) for t in trades]
    return "===\n".join(records)


def read_trades(text: str) -> list[Trade]:
    out = []
    records: list[list[tuple[int, str]]] = [[]]
    for no, line in enumerate(text.splitlines(), start=1):
        if line.strip() == "===":
            records.append([])
        else:
            records[-1].append((no, line))
    for rec in records:
        if not any(ln.strip() for _, ln in rec):
            continue
        split = [i for i, (_, ln) in enumerate(rec) if ln.strip() == "---"]
        if len(split) != 1:
            raise LatinError("trade record needs exactly one '---' separator")
        body = _parse_pls_lines(rec[: split[0]])
        mate = _parse_pls_lines(rec[split[0] + 1:])
        out.append(Trade(body, mate))
    return out
