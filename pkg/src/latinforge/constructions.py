"""Explicit critical-set constructions in L(2^n) and L(9), plus bundled tables."""
from __future__ import annotations

import hashlib
import itertools
import os
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .core import (
    BandPartition,
    Cell,
    LatinError,
    LatinSquare,
    PartialLatinSquare,
    apply_isotopism,
    band_counts,
    group_square,
    read_pls,
)
from .trades import Trade, find_mate, is_trade

DATA_CHECKSUMS = {
    "c121_l16.pls": "9534cca77fe0bc06efd1448b952367a6d01222c5c1b8ef927e771922f0a71851",
    "c29_l9.pls": "b2d5797d4fb92530a3b7ee0700de00ef0aeadd7bfb27ce9d178183d58510f259",
}


class DataChecksumError(RuntimeError):
    pass


@dataclass(frozen=True)
class ConstructionResult:
    set: PartialLatinSquare
    predicted_size: int
    witnesses: tuple[tuple[Cell, Trade], ...] = ()

    def __post_init__(self):
        if len(self.set) != self.predicted_size:
            raise AssertionError(
                f"construction has {len(self.set)} cells, expected {self.predicted_size}"
            )
        for cell, trade in self.witnesses:
            if cell not in trade.body:
                raise AssertionError(f"witness for {cell} does not contain it")


def _check_n(n: int) -> None:
    if not 2 <= n <= 6:
        raise LatinError(f"n = {n} outside 2..6")


def svr_set(n: int) -> ConstructionResult:
    """Cells (i, j; i XOR j) with i AND j nonzero."""
    _check_n(n)
    size = 2 ** n
    cells = frozenset(Cell(i, j, i ^ j) for i in range(size) for j in range(size) if i & j)
    return ConstructionResult(PartialLatinSquare(size, cells), 4 ** n - 3 ** n)


def theorem1_size(n: int) -> int:
    return 4 ** n - 3 ** n + 4 - 2 ** n - 2 ** (n - 2)


def _witness(square: LatinSquare, d: PartialLatinSquare, target: Cell, positions) -> Trade:
    """Build a trade from (row, col) positions, symbols taken from the square,
    and confirm it meets ``d`` only in ``target``."""
    n = square.order
    body = PartialLatinSquare(n, frozenset(square.cell(r, c) for r, c in positions))
    mate = find_mate(body, square)
    if mate is None or not is_trade(body, mate):
        raise AssertionError(f"positions {positions} do not form a trade")
    if body.entries & d.entries != {target}:
        raise AssertionError(f"witness for {target} meets the set elsewhere")
    return Trade(body, mate)


def theorem1_set(n: int) -> ConstructionResult:
    _check_n(n)
    size = 2 ** n
    top, half, quarter = size - 1, 2 ** (n - 1), 2 ** (n - 2)
    square = group_square(2, n)
    base = svr_set(n).set
    added = [Cell(0, 0, 0), Cell(0, top, top), Cell(top, 0, top)]
    removed = {Cell(top, x, top - x) for x in range(half, size)}
    removed |= {Cell(x, top, top - x) for x in range(half, size)}
    removed |= {Cell(x, x, 0) for x in range(quarter, half)}
    d = PartialLatinSquare(size, (base.entries | set(added)) - removed)
    # Positions only; symbols are read from the square.
    witnesses = [
        (Cell(0, top, top),
         _witness(square, d, Cell(0, top, top),
                  [(0, top), (0, half - 1), (half, top), (half, half - 1)])),
        (Cell(top, 0, top),
         _witness(square, d, Cell(top, 0, top),
                  [(top, 0), (top, half), (half - 1, 0), (half - 1, half)])),
    ]
    for x in range(quarter):
        target = Cell(x, x, 0)
        witnesses.append(
            (target,
             _witness(square, d, target, [(x, x), (x, quarter), (quarter, x), (quarter, quarter)]))
        )
    return ConstructionResult(d, theorem1_size(n), tuple(witnesses))


def theorem1_completion_order(n: int) -> list[Cell]:
    """Add-back sequence that propagation forces, one cell at a time, from D."""
    _check_n(n)
    size = 2 ** n
    top, half, quarter = size - 1, 2 ** (n - 1), 2 ** (n - 2)
    order = [Cell(x, x, 0) for x in range(quarter, half)]
    order.append(Cell(top, top, 0))
    for x in range(half, top):
        order += [Cell(top, x, top - x), Cell(x, top, top - x)]
    return order


def dfk_trim_start(n: int) -> PartialLatinSquare:
    """SvR set plus the back diagonal, last row and last column."""
    _check_n(n)
    size = 2 ** n
    top = size - 1
    extra = {Cell(i, top - i, top) for i in range(size)}
    extra |= {Cell(top, j, top ^ j) for j in range(size)}
    extra |= {Cell(i, top, top ^ i) for i in range(size)}
    return svr_set(n).set.union(extra)


# --- L(9) band autotopisms -------------------------------------------------


def _band_perm(p: tuple[int, int, int]) -> tuple[int, ...]:
    return tuple(3 * p[x // 3] + x % 3 for x in range(9))


def band_autotopisms(square: LatinSquare | None = None) -> list[tuple[tuple[int, ...], ...]]:
    """Band permutations of rows, columns and symbols that map L(9) onto itself.

    Identity comes first; the rest follow in lexicographic order of the band maps.
    """
    square = square or group_square(3, 2)
    cells = square.as_partial()
    perms = list(itertools.permutations(range(3)))
    out = []
    for pr, pc, ps in itertools.product(perms, repeat=3):
        maps = (_band_perm(pr), _band_perm(pc), _band_perm(ps))
        if apply_isotopism(cells, *maps) == cells:
            out.append(maps)
    return out


def has_rc(p: PartialLatinSquare, bands: BandPartition | None = None) -> bool:
    counts = band_counts(p, bands)
    return counts[0][0] == max(max(row) for row in counts)


def theorem2_normalize(c: PartialLatinSquare) -> PartialLatinSquare:
    """Image of ``c`` under the first band autotopism that makes block (1,1) maximal."""
    if c.order != 9:
        raise LatinError("normalization is defined for order 9")
    for maps in band_autotopisms():
        image = apply_isotopism(c, *maps)
        if has_rc(image):
            return image
    raise AssertionError("no band autotopism achieves the RC property")


# --- bundled data ----------------------------------------------------------


def data_dir() -> Path:
    override = os.environ.get("LATINFORGE_DATA")
    if override:
        return Path(override)
    return Path(str(resources.files("latinforge") / "data"))


def load_bundled(name: str) -> PartialLatinSquare:
    raw = (data_dir() / name).read_bytes()
    expected = DATA_CHECKSUMS.get(name)
    if expected is not None and hashlib.sha256(raw).hexdigest() != expected:
        raise DataChecksumError(f"checksum mismatch for {name}")
    return read_pls(raw.decode())


def bundled_c121() -> PartialLatinSquare:
    return load_bundled("c121_l16.pls")


def bundled_c29() -> PartialLatinSquare:
    return load_bundled("c29_l9.pls")
