"""0-1 covering programs over the cells of a Latin square, plus LP text I/O.

Variable ``r * n + c`` is 1 when cell (r, c) is chosen; the objective is the
number of chosen cells.
"""
from __future__ import annotations

import io
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .core import (
    BandPartition,
    Cell,
    GroupSpec,
    LatinError,
    LatinSquare,
    PartialLatinSquare,
    elementary_abelian_square,
    group_square,
)
from .trades import Trade, enumerate_group_subsquares

GE, LE, EQ = ">=", "<=", "="
SENSES = (GE, LE, EQ)
NON_COVERING_TAGS = frozenset({"symmetry", "cardinality"})


@dataclass(frozen=True)
class LinearConstraint:
    terms: tuple[tuple[int, int], ...]
    sense: str
    rhs: int
    tag: str = "cover"

    def __post_init__(self):
        terms = tuple(sorted((int(v), int(a)) for v, a in self.terms if a != 0))
        object.__setattr__(self, "terms", terms)
        if len({v for v, _ in terms}) != len(terms):
            raise LatinError("duplicate variable in constraint")
        if self.sense not in SENSES:
            raise LatinError(f"unknown sense {self.sense!r}")
        if not re.fullmatch(r"[A-Za-z0-9_\-]+", self.tag):
            raise LatinError(f"bad tag {self.tag!r}")
        if self.is_covering and self.rhs < 0:
            raise LatinError("covering constraint with negative right-hand side")

    @property
    def is_covering(self) -> bool:
        return (
            self.tag not in NON_COVERING_TAGS
            and self.sense == GE
            and all(a > 0 for _, a in self.terms)
        )

    def lhs(self, chosen: set[int] | frozenset[int]) -> int:
        return sum(a for v, a in self.terms if v in chosen)

    def satisfied(self, chosen) -> bool:
        x = self.lhs(chosen)
        if self.sense == GE:
            return x >= self.rhs
        if self.sense == LE:
            return x <= self.rhs
        return x == self.rhs


def cover(cells: Iterable[int], rhs: int, tag: str) -> LinearConstraint:
    return LinearConstraint(tuple((v, 1) for v in cells), GE, rhs, tag)


@dataclass(frozen=True)
class CoverInstance:
    order: int
    constraints: tuple[LinearConstraint, ...] = ()
    name: str = field(default="cover", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "constraints", tuple(self.constraints))
        nv = self.num_vars
        for k in self.constraints:
            if any(not 0 <= v < nv for v, _ in k.terms):
                raise LatinError("constraint refers to a variable outside the square")

    @property
    def num_vars(self) -> int:
        return self.order * self.order

    def extend(self, extra: Iterable[LinearConstraint]) -> "CoverInstance":
        return CoverInstance(self.order, self.constraints + tuple(extra), self.name)

    def tag_counts(self) -> Counter:
        return Counter(k.tag for k in self.constraints)

    def var(self, r: int, c: int) -> int:
        return r * self.order + c


@dataclass(frozen=True)
class SolverParams:
    seed: int
    noise: float = 0.05
    max_flips: int = 1_000_000
    restarts: int = 1
    target: int | None = None

    def __post_init__(self):
        if not 0.0 <= self.noise <= 1.0:
            raise ValueError("noise must lie in [0, 1]")
        if self.max_flips < 0 or self.restarts < 1:
            raise ValueError("max_flips must be >= 0 and restarts >= 1")


@dataclass(frozen=True)
class CoverSolution:
    order: int
    chosen: tuple[int, ...]
    feasible: bool
    stats: dict = field(default_factory=dict, compare=False)

    @property
    def objective(self) -> int:
        return len(self.chosen)

    def cells(self, square: LatinSquare) -> PartialLatinSquare:
        n = self.order
        return PartialLatinSquare(
            n, frozenset(Cell(v // n, v % n, square.grid[v // n][v % n]) for v in self.chosen)
        )


def check_solution(inst: CoverInstance, chosen: Iterable[int]) -> bool:
    chosen = set(chosen)
    return all(k.satisfied(chosen) for k in inst.constraints)


def solution_from_cells(inst: CoverInstance, p: PartialLatinSquare) -> CoverSolution:
    n = inst.order
    chosen = tuple(sorted(r * n + c for r, c, _ in p.entries))
    return CoverSolution(n, chosen, check_solution(inst, chosen))


# --- builders --------------------------------------------------------------


def default_rhs(level: int) -> int:
    return 5 ** (level - 1)


def build_hierarchical_cover(
    spec: GroupSpec, max_level: int, rhs_scheme: Sequence[int] | None = None
) -> CoverInstance:
    """≥-constraints over every group-aligned subsquare of order 2^k, k = 1..max_level."""
    if spec.base != 2:
        raise LatinError("hierarchical cover is defined for m = 2")
    if not 1 <= max_level < spec.exponent:
        raise LatinError(f"max_level must lie in 1..{spec.exponent - 1}")
    if rhs_scheme is None:
        rhs_scheme = [default_rhs(k) for k in range(1, max_level + 1)]
    if len(rhs_scheme) != max_level:
        raise LatinError("rhs_scheme length must equal max_level")
    n = spec.order
    out = []
    for k, rhs in zip(range(1, max_level + 1), rhs_scheme):
        fam = enumerate_group_subsquares(spec, k)
        for rows, cols in fam.members:
            out.append(cover((r * n + c for r in rows for c in cols), rhs, f"I{k}"))
    return CoverInstance(n, tuple(out), f"hier-L{n}-k{max_level}")


def build_trade_cover(square: LatinSquare, trades: Sequence[Trade]) -> CoverInstance:
    if not trades:
        raise LatinError("need at least one trade")
    n = square.order
    out = []
    for t in trades:
        if not t.body.is_subset_of(square):
            raise LatinError("trade body is not part of the square")
        out.append(cover((r * n + c for r, c, _ in t.body.entries), 1, "trade"))
    return CoverInstance(n, tuple(out), f"trades-L{n}")


def add_rc_symmetry(inst: CoverInstance, bands: BandPartition | None = None) -> CoverInstance:
    """Block (1,1) holds at least as many chosen cells as each of the other eight."""
    if inst.order != 9:
        raise LatinError("RC symmetry constraints need order 9")
    bands = bands or BandPartition()
    top = [r * 9 + c for r, c in bands.block_cells(0, 0)]
    extra = []
    for i in range(3):
        for j in range(3):
            if (i, j) == (0, 0):
                continue
            other = [r * 9 + c for r, c in bands.block_cells(i, j)]
            terms = [(v, 1) for v in top] + [(v, -1) for v in other]
            extra.append(LinearConstraint(tuple(terms), GE, 0, "symmetry"))
    return inst.extend(extra)


def add_cardinality_constraints(
    inst: CoverInstance, mode: str, square: LatinSquare | None = None
) -> CoverInstance:
    n = inst.order
    if mode == "rows-cols-7-8":
        if n != 16:
            raise LatinError("rows-cols-7-8 needs order 16")
        square = square or group_square(2, 4)
        lines = [[r * n + c for c in range(n)] for r in range(n)]
        lines += [[r * n + c for r in range(n)] for c in range(n)]
        lines += [[r * n + square.col_of(r, s) for r in range(n)] for s in range(n)]
        extra = []
        for line in lines:
            terms = tuple((v, 1) for v in line)
            extra.append(LinearConstraint(terms, GE, 7, "cardinality"))
            extra.append(LinearConstraint(terms, LE, 8, "cardinality"))
        return inst.extend(extra)
    if mode == "subsquares-exactly-3":
        if n != 9:
            raise LatinError("subsquares-exactly-3 needs order 9")
        fam = enumerate_group_subsquares(GroupSpec(3, 2), 1)
        extra = [
            LinearConstraint(tuple((r * 9 + c, 1) for r in rows for c in cols), EQ, 3, "cardinality")
            for rows, cols in fam.members
        ]
        return inst.extend(extra)
    raise LatinError(f"unknown cardinality mode {mode!r}")


def report_slack_histogram(inst: CoverInstance, sol: CoverSolution) -> dict[tuple[str, int], int]:
    if sol.order != inst.order:
        raise LatinError("solution order does not match instance")
    chosen = set(sol.chosen)
    hist = Counter((k.tag, k.lhs(chosen)) for k in inst.constraints)
    return dict(sorted(hist.items()))


def lower_bound_packing(inst: CoverInstance) -> int:
    """Sum of right-hand sides over a greedy set of variable-disjoint covering rows.

    Rows are taken by decreasing rhs per variable, ties by position.
    """
    rows = [
        (i, k) for i, k in enumerate(inst.constraints) if k.is_covering and k.rhs > 0
    ]
    rows.sort(key=lambda ik: (-ik[1].rhs / max(1, len(ik[1].terms)), ik[0]))
    used: set[int] = set()
    total = 0
    for _, k in rows:
        vs = {v for v, _ in k.terms}
        if vs & used:
            continue
        used |= vs
        amax = max(a for _, a in k.terms)
        total += -(-k.rhs // amax)
    return total


# --- LP text ---------------------------------------------------------------

TERMS_PER_LINE = 8


class LPSyntaxError(LatinError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


def var_name(n: int, v: int) -> str:
    return f"x_{v // n}_{v % n}"


def _expr(n: int, terms: Sequence[tuple[int, int]]) -> list[str]:
    parts = []
    for i, (v, a) in enumerate(terms):
        sign = "-" if a < 0 else "+"
        mag = "" if abs(a) == 1 else f"{abs(a)} "
        if i == 0:
            parts.append(("- " if a < 0 else "") + mag + var_name(n, v))
        else:
            parts.append(f"{sign} {mag}{var_name(n, v)}")
    return parts


def _wrapped(head: str, parts: list[str], tail: str = "") -> str:
    chunks = [parts[i:i + TERMS_PER_LINE] for i in range(0, len(parts), TERMS_PER_LINE)] or [[]]
    lines = []
    for i, chunk in enumerate(chunks):
        prefix = head if i == 0 else "   "
        lines.append((prefix + " ".join(chunk)).rstrip())
    if tail:
        lines[-1] = (lines[-1] + " " + tail) if lines[-1].strip() else lines[-1] + tail
    return "\n".join(lines) + "\n"


def _tag_runs(inst: CoverInstance) -> str:
    runs = []
    for i, k in enumerate(inst.constraints, start=1):
        if runs and runs[-1][0] == k.tag and runs[-1][2] == i - 1:
            runs[-1][2] = i
        else:
            runs.append([k.tag, i, i])
    return " ".join(f"{t}:{a}-{b}" for t, a, b in runs)


def export_lp(inst: CoverInstance) -> str:
    n = inst.order
    out = io.StringIO()
    out.write(f"\\ name {inst.name}\n")
    out.write(f"\\ order {n}\n")
    if inst.constraints:
        out.write(f"\\ tags {_tag_runs(inst)}\n")
    out.write("Minimize\n")
    out.write(_wrapped(" obj: ", _expr(n, [(v, 1) for v in range(inst.num_vars)])))
    if inst.constraints:
        out.write("Subject To\n")
        for i, k in enumerate(inst.constraints, start=1):
            out.write(_wrapped(f" c{i}: ", _expr(n, k.terms), f"{k.sense} {k.rhs}"))
    out.write("Binaries\n")
    names = [var_name(n, v) for v in range(inst.num_vars)]
    for i in range(0, len(names), TERMS_PER_LINE):
        out.write(" " + " ".join(names[i:i + TERMS_PER_LINE]) + "\n")
    out.write("End\n")
    return out.getvalue()


_SECTIONS = {"minimize": "min", "subject to": "st", "binaries": "bin", "end": "end"}
_VAR = re.compile(r"x_(\d+)_(\d+)\Z")
_NAME = re.compile(r"([A-Za-z_][A-Za-z0-9_]*):\Z")


def import_lp(text: str) -> CoverInstance:
    order = None
    name = "cover"
    tag_spec = None
    section = None
    statements: dict[str, list[list[tuple[str, int, int]]]] = {"min": [], "st": [], "bin": []}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped:
            continue
        if stripped.startswith("\\"):
            words = stripped[1:].split()
            if len(words) == 2 and words[0] == "order" and words[1].isdigit():
                order = int(words[1])
            elif len(words) == 2 and words[0] == "name":
                name = words[1]
            elif words[:1] == ["tags"]:
                tag_spec = (words[1:], lineno)
            continue
        key = " ".join(stripped.lower().split())
        if key in _SECTIONS:
            section = _SECTIONS[key]
            if section == "end":
                break
            continue
        if section is None:
            raise LPSyntaxError("content before any section", lineno, 1)
        toks = [(m.group(), lineno, m.start() + 1) for m in re.finditer(r"\S+", raw)]
        if section == "bin":
            statements["bin"].append(toks)
        elif _NAME.match(toks[0][0]) or not statements[section]:
            statements[section].append(toks)
        else:
            statements[section][-1].extend(toks)
    else:
        if section != "end":
            raise LPSyntaxError("missing End", len(text.splitlines()) or 1, 1)

    binaries = [t for line in statements["bin"] for t in line]
    if order is None:
        root = int(round(len(binaries) ** 0.5))
        if root * root != len(binaries) or root == 0:
            raise LPSyntaxError("cannot infer order from Binaries", 1, 1)
        order = root
    n = order

    def parse_var(tok):
        word, ln, col = tok
        m = _VAR.match(word)
        if not m or int(m.group(1)) >= n or int(m.group(2)) >= n:
            raise LPSyntaxError(f"unknown variable {word!r}", ln, col)
        return int(m.group(1)) * n + int(m.group(2))

    declared = [parse_var(t) for t in binaries]
    if sorted(declared) != list(range(n * n)):
        ln, col = binaries[0][1:] if binaries else (1, 1)
        raise LPSyntaxError("Binaries must list every cell variable once", ln, col)

    def parse_expr(toks, stop_at_sense):
        terms, i, sign, coef = [], 0, 1, None
        while i < len(toks):
            word, ln, col = toks[i]
            if word in SENSES:
                if not stop_at_sense:
                    raise LPSyntaxError("unexpected relation in objective", ln, col)
                break
            if word in "+-":
                sign = -1 if word == "-" else 1
            elif word.isdigit():
                coef = int(word)
            else:
                v = parse_var(toks[i])
                terms.append((v, sign * (1 if coef is None else coef)))
                sign, coef = 1, None
            i += 1
        return terms, i

    constraints = []
    for stmt in statements["st"]:
        word, ln, col = stmt[0]
        if not _NAME.match(word):
            raise LPSyntaxError("constraint must start with a name", ln, col)
        terms, i = parse_expr(stmt[1:], True)
        rest = stmt[1 + i:]
        if len(rest) != 2 or rest[0][0] not in SENSES:
            tok = rest[0] if rest else stmt[-1]
            raise LPSyntaxError("expected '<sense> <rhs>'", tok[1], tok[2])
        try:
            rhs = int(rest[1][0])
        except ValueError:
            raise LPSyntaxError("right-hand side must be an integer", rest[1][1], rest[1][2]) from None
        constraints.append([terms, rest[0][0], rhs])
    for stmt in statements["min"]:
        parse_expr(stmt[1:] if _NAME.match(stmt[0][0]) else stmt, False)

    tags = ["cover"] * len(constraints)
    if tag_spec is not None:
        words, ln = tag_spec
        for w in words:
            m = re.fullmatch(r"([A-Za-z0-9_\-]+):(\d+)-(\d+)", w)
            if not m:
                raise LPSyntaxError(f"bad tag run {w!r}", ln, 1)
            for i in range(int(m.group(2)), int(m.group(3)) + 1):
                if not 1 <= i <= len(tags):
                    raise LPSyntaxError(f"tag run {w!r} outside constraint range", ln, 1)
                tags[i - 1] = m.group(1)
    return CoverInstance(
        n,
        tuple(LinearConstraint(tuple(t), s, r, tag) for (t, s, r), tag in zip(constraints, tags)),
        name,
    )


def write_solution(sol: CoverSolution, name: str, **info) -> str:
    """Deterministic text form of a solution: key/value header, then chosen cells."""
    n = sol.order
    lines = [
        f"instance {name}",
        f"order {n}",
        f"objective {sol.objective}",
        f"feasible {'true' if sol.feasible else 'false'}",
    ]
    lines += [f"{k} {v}" for k, v in info.items()]
    names = [var_name(n, v) for v in sol.chosen]
    lines.append("cells")
    lines += [" ".join(names[i:i + TERMS_PER_LINE]) for i in range(0, len(names), TERMS_PER_LINE)]
    return "\n".join(lines) + "\n"


def read_solution(text: str) -> CoverSolution:
    head, _, body = text.partition("\ncells")
    info = dict(line.split(" ", 1) for line in head.splitlines() if line.strip())
    n = int(info["order"])
    chosen = []
    for word in body.split():
        m = _VAR.match(word)
        if not m:
            raise LatinError(f"bad cell name {word!r}")
        chosen.append(int(m.group(1)) * n + int(m.group(2)))
    return CoverSolution(n, tuple(sorted(chosen)), info["feasible"] == "true")


# --- named instances -------------------------------------------------------


def l9_trade_instance(rc: bool = True, exactly_three: bool = False) -> CoverInstance:
    """Covering core over the 324 size-6 trades of L(9), optionally with RC rows."""
    from .trades import enumerate_trades_bounded

    square = group_square(3, 2)
    inst = build_trade_cover(square, enumerate_trades_bounded(square, 6, 6, 6, 6))
    if rc:
        inst = add_rc_symmetry(inst)
    if exactly_three:
        inst = add_cardinality_constraints(inst, "subsquares-exactly-3")
    return CoverInstance(inst.order, inst.constraints, "ip2-L9" + ("-rc" if rc else ""))


def intercalate_instance(spec: GroupSpec) -> CoverInstance:
    from .trades import enumerate_intercalates

    square = elementary_abelian_square(spec)
    inst = build_trade_cover(square, enumerate_intercalates(square))
    return CoverInstance(
        inst.order,
        tuple(LinearConstraint(k.terms, k.sense, k.rhs, "I1") for k in inst.constraints),
        f"intercalates-L{inst.order}",
    )
