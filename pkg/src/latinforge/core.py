"""Value types for Latin squares and partial Latin squares.

Group elements of Z_m^n are encoded as integers whose base-m digits are the
coordinates, so for m = 2 the Cayley table is exactly the XOR table.
"""
from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Iterable, Iterator, NamedTuple, Sequence

MAX_ORDER = 64


class LatinError(ValueError):
    """Structural problem with a square, partial square or permutation."""


class CapacityError(LatinError):
    """Requested order exceeds the supported range."""


class PLSFormatError(LatinError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class Cell(NamedTuple):
    row: int
    col: int
    symbol: int


@dataclass(frozen=True)
class GroupSpec:
    base: int
    exponent: int

    def __post_init__(self):
        if self.base < 2 or self.exponent < 1:
            raise LatinError(f"invalid group Z_{self.base}^{self.exponent}")
        if self.base ** self.exponent > MAX_ORDER:
            raise CapacityError(
                f"order {self.base}^{self.exponent} = {self.base ** self.exponent} "
                f"exceeds the maximum supported order {MAX_ORDER}"
            )

    @property
    def order(self) -> int:
        return self.base ** self.exponent

    def digits(self, x: int) -> tuple[int, ...]:
        """Base-m digits of ``x``, most significant first."""
        out = []
        for _ in range(self.exponent):
            out.append(x % self.base)
            x //= self.base
        return tuple(reversed(out))

    def from_digits(self, digits: Sequence[int]) -> int:
        x = 0
        for d in digits:
            x = x * self.base + d
        return x

    def add(self, x: int, y: int) -> int:
        if self.base == 2:
            return x ^ y
        return self.from_digits(
            [(a + b) % self.base for a, b in zip(self.digits(x), self.digits(y))]
        )


def _check_grid(grid: Sequence[Sequence[int]]) -> int:
    n = len(grid)
    if n == 0:
        raise LatinError("empty grid")
    for row in grid:
        if len(row) != n:
            raise LatinError("ragged grid: every row must have length %d" % n)
    return n


def is_latin(grid: Sequence[Sequence[int]]) -> bool:
    """True iff every row and column holds each of 0..n-1 exactly once."""
    n = _check_grid(grid)
    full = set(range(n))
    for r in range(n):
        if set(grid[r]) != full:
            return False
    for c in range(n):
        if {grid[r][c] for r in range(n)} != full:
            return False
    return True


@dataclass(frozen=True)
class LatinSquare:
    grid: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        grid = tuple(tuple(int(v) for v in row) for row in self.grid)
        object.__setattr__(self, "grid", grid)
        if len(grid) > MAX_ORDER:
            raise CapacityError(f"order {len(grid)} exceeds {MAX_ORDER}")
        if not is_latin(grid):
            raise LatinError("grid is not a Latin square")

    @property
    def order(self) -> int:
        return len(self.grid)

    def __getitem__(self, rc: tuple[int, int]) -> int:
        r, c = rc
        return self.grid[r][c]

    def cells(self) -> Iterator[Cell]:
        for r, row in enumerate(self.grid):
            for c, s in enumerate(row):
                yield Cell(r, c, s)

    def cell(self, r: int, c: int) -> Cell:
        return Cell(r, c, self.grid[r][c])

    def as_partial(self) -> "PartialLatinSquare":
        return PartialLatinSquare(self.order, self.cells())

    def col_of(self, r: int, s: int) -> int:
        """Column holding symbol ``s`` in row ``r``."""
        return self._row_index[r][s]

    def row_of(self, c: int, s: int) -> int:
        """Row holding symbol ``s`` in column ``c``."""
        return self._col_index[c][s]

    @property
    def _row_index(self) -> tuple[tuple[int, ...], ...]:
        idx = self.__dict__.get("_ri")
        if idx is None:
            n = self.order
            tab = [[0] * n for _ in range(n)]
            for r in range(n):
                for c in range(n):
                    tab[r][self.grid[r][c]] = c
            idx = tuple(map(tuple, tab))
            object.__setattr__(self, "_ri", idx)
        return idx

    @property
    def _col_index(self) -> tuple[tuple[int, ...], ...]:
        idx = self.__dict__.get("_ci")
        if idx is None:
            n = self.order
            tab = [[0] * n for _ in range(n)]
            for r in range(n):
                for c in range(n):
                    tab[c][self.grid[r][c]] = r
            idx = tuple(map(tuple, tab))
            object.__setattr__(self, "_ci", idx)
        return idx


@dataclass(frozen=True)
class PartialLatinSquare:
    """A set of (row, col; symbol) triples with no row/column clashes.

    ``row_masks[r]`` has bit ``c`` set when cell (r, c) is filled.
    """

    order: int
    entries: frozenset[Cell] = field(default_factory=frozenset)
    row_masks: tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        n = self.order
        if n < 1 or n > MAX_ORDER:
            raise CapacityError(f"order {n} outside 1..{MAX_ORDER}")
        entries = frozenset(Cell(*e) for e in self.entries)
        object.__setattr__(self, "entries", entries)
        masks = [0] * n
        row_syms = [0] * n
        col_syms = [0] * n
        for r, c, s in entries:
            if not (0 <= r < n and 0 <= c < n and 0 <= s < n):
                raise LatinError(f"cell {(r, c, s)} outside order {n}")
            if masks[r] >> c & 1:
                raise LatinError(f"cell ({r}, {c}) filled twice")
            if row_syms[r] >> s & 1:
                raise LatinError(f"symbol {s} repeated in row {r}")
            if col_syms[c] >> s & 1:
                raise LatinError(f"symbol {s} repeated in column {c}")
            masks[r] |= 1 << c
            row_syms[r] |= 1 << s
            col_syms[c] |= 1 << s
        object.__setattr__(self, "row_masks", tuple(masks))

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[Cell]:
        return iter(sorted(self.entries))

    def __contains__(self, cell) -> bool:
        return Cell(*cell) in self.entries

    def filled(self, r: int, c: int) -> bool:
        return bool(self.row_masks[r] >> c & 1)

    def symbol_at(self, r: int, c: int) -> int | None:
        if not self.filled(r, c):
            return None
        return self._lookup[(r, c)]

    @property
    def _lookup(self) -> dict[tuple[int, int], int]:
        d = self.__dict__.get("_lk")
        if d is None:
            d = {(r, c): s for r, c, s in self.entries}
            object.__setattr__(self, "_lk", d)
        return d

    def shape(self) -> frozenset[tuple[int, int]]:
        return frozenset((r, c) for r, c, _ in self.entries)

    def cells(self) -> list[Cell]:
        return sorted(self.entries)

    def union(self, other: Iterable[Cell]) -> "PartialLatinSquare":
        return PartialLatinSquare(self.order, self.entries | {Cell(*e) for e in other})

    def difference(self, other: Iterable[Cell]) -> "PartialLatinSquare":
        return PartialLatinSquare(self.order, self.entries - {Cell(*e) for e in other})

    def without(self, cell: Cell) -> "PartialLatinSquare":
        return PartialLatinSquare(self.order, self.entries - {Cell(*cell)})

    def is_subset_of(self, square: LatinSquare) -> bool:
        return self.order == square.order and all(
            square.grid[r][c] == s for r, c, s in self.entries
        )

    def is_complete(self) -> bool:
        return len(self.entries) == self.order * self.order

    def to_grid(self) -> list[list[int | None]]:
        grid: list[list[int | None]] = [[None] * self.order for _ in range(self.order)]
        for r, c, s in self.entries:
            grid[r][c] = s
        return grid

    @classmethod
    def from_grid(cls, grid: Sequence[Sequence[int | None]]) -> "PartialLatinSquare":
        n = _check_grid(grid)
        return cls(
            n,
            frozenset(
                Cell(r, c, s)
                for r, row in enumerate(grid)
                for c, s in enumerate(row)
                if s is not None
            ),
        )


@dataclass(frozen=True)
class BandPartition:
    row_bands: tuple[tuple[int, ...], ...] = ((0, 1, 2), (3, 4, 5), (6, 7, 8))
    col_bands: tuple[tuple[int, ...], ...] = ((0, 1, 2), (3, 4, 5), (6, 7, 8))
    symbol_bands: tuple[tuple[int, ...], ...] = ((0, 1, 2), (3, 4, 5), (6, 7, 8))

    def __post_init__(self):
        for bands in (self.row_bands, self.col_bands, self.symbol_bands):
            if len(bands) != 3 or any(len(b) != 3 for b in bands):
                raise LatinError("band partition needs three triples")
            if sorted(x for b in bands for x in b) != list(range(9)):
                raise LatinError("bands must partition 0..8")

    def row_band(self, r: int) -> int:
        return next(i for i, b in enumerate(self.row_bands) if r in b)

    def col_band(self, c: int) -> int:
        return next(i for i, b in enumerate(self.col_bands) if c in b)

    def block_cells(self, i: int, j: int) -> list[tuple[int, int]]:
        return [(r, c) for r in self.row_bands[i] for c in self.col_bands[j]]


def elementary_abelian_square(spec: GroupSpec) -> LatinSquare:
    n = spec.order
    if spec.base == 2:
        grid = tuple(tuple(i ^ j for j in range(n)) for i in range(n))
    else:
        grid = tuple(tuple(spec.add(i, j) for j in range(n)) for i in range(n))
    return LatinSquare(grid)


def group_square(base: int, exponent: int) -> LatinSquare:
    return elementary_abelian_square(GroupSpec(base, exponent))


def is_subsquare(square: LatinSquare, rows: Iterable[int], cols: Iterable[int]) -> bool:
    rows, cols = sorted(set(rows)), sorted(set(cols))
    if len(rows) != len(cols):
        raise LatinError("row and column sets differ in size")
    symbols = {square.grid[rows[0]][c] for c in cols}
    if len(symbols) != len(cols):
        return False
    for r in rows:
        if {square.grid[r][c] for c in cols} != symbols:
            return False
    for c in cols:
        if {square.grid[r][c] for r in rows} != symbols:
            return False
    return True


def _check_perm(perm: Sequence[int], n: int, what: str) -> tuple[int, ...]:
    perm = tuple(perm)
    if sorted(perm) != list(range(n)):
        raise LatinError(f"{what} permutation is not a bijection on 0..{n - 1}")
    return perm


def apply_isotopism(
    p: PartialLatinSquare,
    row_perm: Sequence[int],
    col_perm: Sequence[int],
    sym_perm: Sequence[int],
) -> PartialLatinSquare:
    """Map every (i, j; k) to (row_perm[i], col_perm[j]; sym_perm[k])."""
    n = p.order
    rp = _check_perm(row_perm, n, "row")
    cp = _check_perm(col_perm, n, "column")
    sp = _check_perm(sym_perm, n, "symbol")
    return PartialLatinSquare(n, frozenset(Cell(rp[r], cp[c], sp[s]) for r, c, s in p.entries))


def band_counts(p: PartialLatinSquare, bands: BandPartition | None = None) -> list[list[int]]:
    if p.order != 9:
        raise LatinError("band counts are only defined for order 9")
    bands = bands or BandPartition()
    counts = [[0] * 3 for _ in range(3)]
    for r, c, _ in p.entries:
        counts[bands.row_band(r)][bands.col_band(c)] += 1
    return counts


# --- PLS text format -------------------------------------------------------


def write_pls(p: PartialLatinSquare | LatinSquare, comments: Sequence[str] = ()) -> str:
    if isinstance(p, LatinSquare):
        p = p.as_partial()
    grid = p.to_grid()
    out = io.StringIO()
    for line in comments:
        out.write(f"# {line}\n" if line else "#\n")
    out.write(f"order {p.order}\n")
    for row in grid:
        out.write(" ".join("." if s is None else str(s) for s in row) + "\n")
    return out.getvalue()


def _parse_pls_lines(lines: list[tuple[int, str]]) -> PartialLatinSquare:
    body = [(no, ln.strip()) for no, ln in lines if ln.strip() and not ln.lstrip().startswith("#")]
    if not body:
        raise PLSFormatError("missing 'order N' header", lines[-1][0] if lines else 1)
    no, head = body[0]
    parts = head.split()
    if len(parts) != 2 or parts[0] != "order" or not parts[1].isdigit():
        raise PLSFormatError(f"expected 'order N', got {head!r}", no)
    n = int(parts[1])
    if not 1 <= n <= MAX_ORDER:
        raise CapacityError(f"order {n} outside 1..{MAX_ORDER}")
    rows = body[1:]
    if len(rows) != n:
        raise PLSFormatError(f"expected {n} rows, found {len(rows)}", rows[-1][0] if rows else no)
    grid: list[list[int | None]] = []
    for no, text in rows:
        toks = text.split()
        if len(toks) != n:
            raise PLSFormatError(f"expected {n} tokens, found {len(toks)}", no)
        row: list[int | None] = []
        for t in toks:
            if t == ".":
                row.append(None)
            elif t.isdigit() and int(t) < n:
                row.append(int(t))
            else:
                raise PLSFormatError(f"bad token {t!r}", no)
        grid.append(row)
    try:
        return PartialLatinSquare.from_grid(grid)
    except LatinError as exc:
        raise PLSFormatError(str(exc), no) from None


def read_pls(text: str) -> PartialLatinSquare:
    return _parse_pls_lines(list(enumerate(text.splitlines(), start=1)))


def read_square(text: str) -> LatinSquare:
    p = read_pls(text)
    if not p.is_complete():
        raise LatinError("square file has empty cells")
    return LatinSquare(tuple(tuple(row) for row in p.to_grid()))  # type: ignore[arg-type]
