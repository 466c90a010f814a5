"""Completion of partial Latin squares and critical-set verification.

Candidate sets are kept as int bitmasks over symbols. Propagation applies two
forcing rules to fixpoint: a cell with a single candidate receives it, and a
(row, symbol) or (column, symbol) pair with a single admissible cell fills it.
"""
from __future__ import annotations

import enum
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable

from .core import Cell, LatinError, LatinSquare, PartialLatinSquare
from .trades import (
    Trade,
    TradeBudgetExceeded,
    find_trade_through,
    intercalate,
    write_trades,
)

DEFAULT_NODE_BUDGET = 10 ** 8


class Incompletable(LatinError):
    """Propagation reached a cell or placement with no candidates."""


class CompletionBudgetExceeded(RuntimeError):
    def __init__(self, count: int, nodes: int):
        super().__init__(f"completion search budget exhausted after {nodes} nodes")
        self.count = count
        self.nodes = nodes


class Status(str, enum.Enum):
    PROPAGATION_COMPLETE = "propagation-complete"
    SEARCH_PROVEN_UNIQUE = "search-proven-unique"
    MULTIPLE_COMPLETIONS = "multiple-completions"
    INCOMPLETABLE = "incompletable"
    BUDGET_EXCEEDED = "budget-exceeded"


UNIQUE = (Status.PROPAGATION_COMPLETE, Status.SEARCH_PROVEN_UNIQUE)


class _State:
    __slots__ = ("n", "full", "grid", "rows", "cols", "filled")

    def __init__(self, n, grid, rows, cols, filled):
        self.n = n
        self.full = (1 << n) - 1
        self.grid = grid
        self.rows = rows
        self.cols = cols
        self.filled = filled

    @classmethod
    def of(cls, p: PartialLatinSquare) -> "_State":
        n = p.order
        grid = [-1] * (n * n)
        rows = [0] * n
        cols = [0] * n
        for r, c, s in p.entries:
            grid[r * n + c] = s
            rows[r] |= 1 << s
            cols[c] |= 1 << s
        return cls(n, grid, rows, cols, len(p))

    def copy(self) -> "_State":
        return _State(self.n, self.grid[:], self.rows[:], self.cols[:], self.filled)

    def place(self, idx: int, s: int) -> None:
        n = self.n
        r, c = divmod(idx, n)
        cur = self.grid[idx]
        if cur == s:
            return
        bit = 1 << s
        if cur != -1 or (self.rows[r] | self.cols[c]) & bit:
            raise Incompletable(f"conflict placing {s} at ({r}, {c})")
        self.grid[idx] = s
        self.rows[r] |= bit
        self.cols[c] |= bit
        self.filled += 1

    def candidates(self, idx: int) -> int:
        n = self.n
        return self.full & ~(self.rows[idx // n] | self.cols[idx % n])

    def to_partial(self) -> PartialLatinSquare:
        n = self.n
        return PartialLatinSquare(
            n, frozenset(Cell(i // n, i % n, s) for i, s in enumerate(self.grid) if s >= 0)
        )

    def propagate(self) -> None:
        n, full, grid = self.n, self.full, self.grid
        lines = [[r * n + c for c in range(n)] for r in range(n)]
        lines += [[r * n + c for r in range(n)] for c in range(n)]
        while self.filled < n * n:
            moves = []
            rows, cols = self.rows, self.cols
            for li, line in enumerate(lines):
                used = rows[li] if li < n else cols[li - n]
                need = full & ~used
                if not need:
                    continue
                once = twice = 0
                for idx in line:
                    if grid[idx] >= 0:
                        continue
                    cand = full & ~(rows[idx // n] | cols[idx % n])
                    if not cand:
                        raise Incompletable(f"cell ({idx // n}, {idx % n}) has no candidates")
                    if li < n and not cand & (cand - 1):
                        moves.append((idx, cand.bit_length() - 1))
                    twice |= once & cand
                    once |= cand
                if need & ~once:
                    raise Incompletable(f"line {li} cannot place some symbol")
                single = need & ~twice
                while single:
                    bit = single & -single
                    single ^= bit
                    for idx in line:
                        if grid[idx] < 0 and not (rows[idx // n] | cols[idx % n]) & bit:
                            moves.append((idx, bit.bit_length() - 1))
                            break
            if not moves:
                return
            for idx, s in moves:
                self.place(idx, s)


def propagate(p: PartialLatinSquare) -> PartialLatinSquare:
    """Closure under the two forcing rules; raises Incompletable on contradiction."""
    st = _State.of(p)
    st.propagate()
    return st.to_partial()


def _forced_symbol(st: _State, idx: int) -> int | None:
    """Symbol a single rule application places at ``idx``, if any."""
    n = st.n
    if st.grid[idx] >= 0:
        return None
    cand = st.candidates(idx)
    if cand and not cand & (cand - 1):
        return cand.bit_length() - 1
    r, c = divmod(idx, n)
    for line in ([r * n + j for j in range(n)], [i * n + c for i in range(n)]):
        others = 0
        for j in line:
            if j != idx and st.grid[j] < 0:
                others |= st.candidates(j)
        hidden = cand & ~others
        if hidden and not hidden & (hidden - 1):
            return hidden.bit_length() - 1
    return None


def forced_symbol(p: PartialLatinSquare, r: int, c: int) -> int | None:
    return _forced_symbol(_State.of(p), r * p.order + c)


class _Counter:
    def __init__(self, limit: int, budget: int | None):
        self.limit = limit
        self.budget = budget
        self.nodes = 0
        self.count = 0
        self.solutions: list[list[int]] = []

    def search(self, st: _State) -> None:
        self.nodes += 1
        if self.budget is not None and self.nodes > self.budget:
            raise CompletionBudgetExceeded(self.count, self.nodes)
        try:
            st.propagate()
        except Incompletable:
            return
        n = st.n
        if st.filled == n * n:
            self.count += 1
            if len(self.solutions) < 2:
                self.solutions.append(st.grid[:])
            return
        best, best_cand, best_pop = -1, 0, n + 1
        for idx, s in enumerate(st.grid):
            if s >= 0:
                continue
            cand = st.candidates(idx)
            pop = cand.bit_count()
            if pop < best_pop:
                best, best_cand, best_pop = idx, cand, pop
                # propagation leaves no single-candidate cells, so 2 is minimal
                if pop <= 2:
                    break
        while best_cand:
            bit = best_cand & -best_cand
            best_cand ^= bit
            child = st.copy()
            child.place(best, bit.bit_length() - 1)
            self.search(child)
            if self.count >= self.limit:
                return


def count_completions(
    p: PartialLatinSquare, limit: int | None = 2, node_budget: int | None = DEFAULT_NODE_BUDGET
) -> int:
    """min(limit, number of Latin squares extending p); ``limit=None`` counts all."""
    if limit is not None and limit < 1:
        raise ValueError("limit must be >= 1")
    counter = _Counter(math.inf if limit is None else limit, node_budget)
    try:
        counter.search(_State.of(p))
    except Incompletable:
        return 0
    return counter.count if limit is None else min(counter.count, limit)


def _completions(p: PartialLatinSquare, limit: int, budget: int | None) -> _Counter:
    counter = _Counter(limit, budget)
    counter.search(_State.of(p))
    return counter


@dataclass(frozen=True)
class UniquenessCertificate:
    status: Status
    nodes_used: int = 0
    witness: LatinSquare | None = None

    def __post_init__(self):
        if (self.witness is not None) != (self.status is Status.MULTIPLE_COMPLETIONS):
            raise ValueError("witness present iff status is multiple-completions")

    @property
    def unique(self) -> bool:
        return self.status in UNIQUE


def _grid_square(n: int, flat: list[int]) -> LatinSquare:
    return LatinSquare(tuple(tuple(flat[r * n:(r + 1) * n]) for r in range(n)))


def is_uniquely_completable(
    p: PartialLatinSquare, square: LatinSquare, node_budget: int | None = DEFAULT_NODE_BUDGET
) -> UniquenessCertificate:
    if not p.is_subset_of(square):
        raise LatinError("partial square is not contained in the reference square")
    try:
        if propagate(p).is_complete():
            return UniquenessCertificate(Status.PROPAGATION_COMPLETE)
    except Incompletable:
        return UniquenessCertificate(Status.INCOMPLETABLE)
    try:
        counter = _completions(p, 2, node_budget)
    except CompletionBudgetExceeded as exc:
        return UniquenessCertificate(Status.BUDGET_EXCEEDED, exc.nodes)
    if counter.count == 0:
        return UniquenessCertificate(Status.INCOMPLETABLE, counter.nodes)
    if counter.count == 1:
        return UniquenessCertificate(Status.SEARCH_PROVEN_UNIQUE, counter.nodes)
    n = square.order
    ref = [s for row in square.grid for s in row]
    other = next(sol for sol in counter.solutions if sol != ref)
    return UniquenessCertificate(Status.MULTIPLE_COMPLETIONS, counter.nodes, _grid_square(n, other))


def difference_trade(square: LatinSquare, other: LatinSquare) -> Trade:
    """The cells where two squares differ, as a trade of ``square``."""
    n = square.order
    diff = [(r, c) for r in range(n) for c in range(n) if square.grid[r][c] != other.grid[r][c]]
    body = PartialLatinSquare(n, frozenset(Cell(r, c, square.grid[r][c]) for r, c in diff))
    mate = PartialLatinSquare(n, frozenset(Cell(r, c, other.grid[r][c]) for r, c in diff))
    return Trade(body, mate)


# --- necessity -------------------------------------------------------------


class Marker(str, enum.Enum):
    REDUNDANT = "redundant"
    BUDGET_EXCEEDED = "budget-exceeded"


@dataclass(frozen=True)
class WitnessBudgets:
    """Node limits for the three escalation stages of a necessity check."""

    trade_size: int = 12
    trade_nodes: int = 20_000
    completion_nodes: int | None = DEFAULT_NODE_BUDGET


def _intercalate_witness(square: LatinSquare, c_set: PartialLatinSquare, e: Cell) -> Trade | None:
    r, c, s = e
    g = square.grid
    for r2 in range(square.order):
        if r2 == r:
            continue
        c2 = square.col_of(r, g[r2][c])
        if g[r2][c2] != s:
            continue
        if c_set.filled(r2, c) or c_set.filled(r, c2) or c_set.filled(r2, c2):
            continue
        return intercalate(square, min(r, r2), max(r, r2), min(c, c2), max(c, c2))
    return None


def necessity_witness(
    square: LatinSquare,
    c_set: PartialLatinSquare,
    e: Cell,
    budgets: WitnessBudgets = WitnessBudgets(),
) -> Trade | None:
    """A trade T of ``square`` with T meeting ``c_set`` only in ``e``, or None if none exists.

    Raises CompletionBudgetExceeded when the final completion search gives up.
    """
    e = Cell(*e)
    if e not in c_set or not c_set.is_subset_of(square):
        raise LatinError("entry must belong to a subset of the square")
    t = _intercalate_witness(square, c_set, e)
    if t is not None:
        return t
    try:
        t = find_trade_through(square, (e.row, e.col), c_set, budgets.trade_size, budgets.trade_nodes)
    except TradeBudgetExceeded:
        t = None
    if t is not None:
        return t
    rest = c_set.without(e)
    st = _State.of(rest)
    n = square.order
    cand = st.candidates(e.row * n + e.col) & ~(1 << e.symbol)
    nodes = 0
    budget = budgets.completion_nodes
    while cand:
        bit = cand & -cand
        cand ^= bit
        trial = rest.union([Cell(e.row, e.col, bit.bit_length() - 1)])
        left = None if budget is None else budget - nodes
        try:
            counter = _completions(trial, 1, left)
        except CompletionBudgetExceeded as exc:
            raise CompletionBudgetExceeded(0, nodes + exc.nodes) from None
        nodes += counter.nodes
        if counter.count:
            return difference_trade(square, _grid_square(n, counter.solutions[0]))
    return None


@dataclass
class VerificationReport:
    unique: UniquenessCertificate
    necessity: dict[Cell, Trade | Marker] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.unique.unique and all(
            isinstance(w, Trade) for w in self.necessity.values()
        )

    @property
    def budget_exhausted(self) -> bool:
        return self.unique.status is Status.BUDGET_EXCEEDED or any(
            w is Marker.BUDGET_EXCEEDED for w in self.necessity.values()
        )

    def failures(self) -> list[Cell]:
        return [e for e, w in self.necessity.items() if not isinstance(w, Trade)]


def _check_entry(args) -> Trade | Marker:
    square, c_set, e, budgets = args
    try:
        t = necessity_witness(square, c_set, e, budgets)
    except CompletionBudgetExceeded:
        return Marker.BUDGET_EXCEEDED
    return Marker.REDUNDANT if t is None else t


def verify_critical_set(
    square: LatinSquare,
    c_set: PartialLatinSquare,
    node_budget: int | None = DEFAULT_NODE_BUDGET,
    budgets: WitnessBudgets | None = None,
    jobs: int = 1,
) -> VerificationReport:
    """Check unique completion plus a one-entry witness trade per entry."""
    if not c_set.is_subset_of(square):
        raise LatinError("candidate set is not contained in the square")
    budgets = budgets or WitnessBudgets(completion_nodes=node_budget)
    cert = is_uniquely_completable(c_set, square, node_budget)
    entries = c_set.cells()
    work = [(square, c_set, e, budgets) for e in entries]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_check_entry, work))
    else:
        results = [_check_entry(w) for w in work]
    return VerificationReport(cert, dict(zip(entries, results)))


def format_report(report: VerificationReport, c_set: PartialLatinSquare) -> str:
    lines = [
        f"size {len(c_set)}",
        f"uniqueness {report.unique.status.value} nodes {report.unique.nodes_used}",
    ]
    found = sum(isinstance(w, Trade) for w in report.necessity.values())
    lines.append(f"necessity {found}/{len(report.necessity)}")
    for e in report.failures():
        lines.append(f"  entry ({e.row},{e.col};{e.symbol}) {report.necessity[e].value}")
    lines.append(f"result {'PASS' if report.passed else 'FAIL'}")
    lines.append("")
    lines.append("# witnesses")
    for e, w in report.necessity.items():
        if isinstance(w, Trade):
            lines.append(f"@ {e.row} {e.col} {e.symbol}")
            lines.append(write_trades([w]).rstrip("\n"))
            lines.append("===")
    return "\n".join(lines) + "\n"


# --- trimming --------------------------------------------------------------


def _propagation_complete(p: PartialLatinSquare) -> bool:
    try:
        return propagate(p).is_complete()
    except Incompletable:
        return False


def greedy_trim(
    square: LatinSquare,
    s: PartialLatinSquare,
    test: str = "propagation",
    node_budget: int | None = DEFAULT_NODE_BUDGET,
    first: PartialLatinSquare | None = None,
) -> PartialLatinSquare:
    """Drop entries in row-major scans while the remainder still completes uniquely.

    With ``first``, scans are initially restricted to entries of ``first``
    until they stop removing anything; unrestricted scans follow.
    """
    if test == "propagation":
        ok = _propagation_complete
    elif test == "search":
        ok = lambda p: is_uniquely_completable(p, square, node_budget).unique
    else:
        raise ValueError(f"unknown test {test!r}")
    if not s.is_subset_of(square) or not ok(s):
        raise LatinError("starting set does not pass the completability test")
    current = s
    phases = ([first.entries] if first is not None else []) + [None]
    for allowed in phases:
        while True:
            removed = False
            for e in current.cells():
                if allowed is not None and e not in allowed:
                    continue
                trial = current.without(e)
                if ok(trial):
                    current = trial
                    removed = True
            if not removed:
                break
    return current


def is_propagation_minimal(p: PartialLatinSquare) -> bool:
    return _propagation_complete(p) and not any(
        _propagation_complete(p.without(e)) for e in p.cells()
    )


def entries_of(cells: Iterable[tuple[int, int, int]]) -> list[Cell]:
    return [Cell(*c) for c in cells]
