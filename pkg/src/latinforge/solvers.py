"""Local search and branch-and-bound for CoverInstance, with numba kernels.

Constraint data is flattened into CSR arrays (constraint -> variables) and
CSC arrays (variable -> constraints).  Senses are encoded 0: >=, 1: <=, 2: =.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np

from .cover import GE, LE, CoverInstance, CoverSolution, SolverParams, check_solution

_SENSE_CODE = {GE: 0, LE: 1, "=": 2}
DEFAULT_TABU = 3


@dataclass(frozen=True)
class _Arrays:
    nvar: int
    c_ptr: np.ndarray
    c_var: np.ndarray
    c_coef: np.ndarray
    v_ptr: np.ndarray
    v_con: np.ndarray
    v_coef: np.ndarray
    sense: np.ndarray
    rhs: np.ndarray
    covering: np.ndarray


def _arrays(inst: CoverInstance) -> _Arrays:
    ks = inst.constraints
    nvar = inst.num_vars
    c_ptr = np.zeros(len(ks) + 1, dtype=np.int64)
    for i, k in enumerate(ks):
        c_ptr[i + 1] = c_ptr[i] + len(k.terms)
    c_var = np.array([v for k in ks for v, _ in k.terms], dtype=np.int64)
    c_coef = np.array([a for k in ks for _, a in k.terms], dtype=np.int64)
    per_var: list[list[tuple[int, int]]] = [[] for _ in range(nvar)]
    for i, k in enumerate(ks):
        for v, a in k.terms:
            per_var[v].append((i, a))
    v_ptr = np.zeros(nvar + 1, dtype=np.int64)
    for v in range(nvar):
        v_ptr[v + 1] = v_ptr[v] + len(per_var[v])
    v_con = np.array([i for lst in per_var for i, _ in lst], dtype=np.int64)
    v_coef = np.array([a for lst in per_var for _, a in lst], dtype=np.int64)
    return _Arrays(
        nvar,
        c_ptr,
        c_var.reshape(-1),
        c_coef.reshape(-1),
        v_ptr,
        v_con.reshape(-1),
        v_coef.reshape(-1),
        np.array([_SENSE_CODE[k.sense] for k in ks], dtype=np.int64),
        np.array([k.rhs for k in ks], dtype=np.int64),
        np.array([k.is_covering for k in ks], dtype=np.bool_),
    )


# --- local search ----------------------------------------------------------


@numba.njit(cache=True)
def _viol(sense, lhs, rhs):
    if sense == 0:
        return rhs - lhs if lhs < rhs else 0
    if sense == 1:
        return lhs - rhs if lhs > rhs else 0
    return abs(lhs - rhs)


@numba.njit(cache=True)
def _flip_delta(v, x, lhs, v_ptr, v_con, v_coef, sense, rhs):
    step = 1 - 2 * x[v]
    d = 0
    for p in range(v_ptr[v], v_ptr[v + 1]):
        k = v_con[p]
        new = lhs[k] + v_coef[p] * step
        d += _viol(sense[k], new, rhs[k]) - _viol(sense[k], lhs[k], rhs[k])
    return d


@numba.njit(cache=True)
def _ls_kernel(nvar, c_ptr, c_var, c_coef, v_ptr, v_con, v_coef, sense, rhs,
               seed, noise, max_flips, target, tabu):
    np.random.seed(seed)
    m = len(rhs)
    x = np.ones(nvar, dtype=np.int64)
    lhs = np.zeros(m, dtype=np.int64)
    for k in range(m):
        s = 0
        for p in range(c_ptr[k], c_ptr[k + 1]):
            s += c_coef[p] * x[c_var[p]]
        lhs[k] = s
    viol_list = np.empty(m, dtype=np.int64)
    viol_pos = -np.ones(m, dtype=np.int64)
    nviol = 0
    for k in range(m):
        if _viol(sense[k], lhs[k], rhs[k]) > 0:
            viol_pos[k] = nviol
            viol_list[nviol] = k
            nviol += 1
    last = -np.ones(nvar, dtype=np.int64) * (tabu + 1)
    ones = nvar
    best = nvar + 1
    best_x = x.copy()
    if nviol == 0:
        best = ones
        best_x[:] = x
    flips = 0
    while flips < max_flips:
        if target >= 0 and best <= target:
            break
        chosen = -1
        if nviol > 0:
            k = viol_list[np.random.randint(0, nviol)]
            if np.random.random() < noise:
                cnt = 0
                for p in range(c_ptr[k], c_ptr[k + 1]):
                    v = c_var[p]
                    new = lhs[k] + c_coef[p] * (1 - 2 * x[v])
                    if _viol(sense[k], new, rhs[k]) < _viol(sense[k], lhs[k], rhs[k]):
                        cnt += 1
                        if np.random.randint(0, cnt) == 0:
                            chosen = v
            else:
                best_d = 1 << 60
                best_o = 2
                cnt = 0
                for p in range(c_ptr[k], c_ptr[k + 1]):
                    v = c_var[p]
                    new = lhs[k] + c_coef[p] * (1 - 2 * x[v])
                    if _viol(sense[k], new, rhs[k]) >= _viol(sense[k], lhs[k], rhs[k]):
                        continue
                    if flips - last[v] <= tabu:
                        continue
                    d = _flip_delta(v, x, lhs, v_ptr, v_con, v_coef, sense, rhs)
                    o = 1 - 2 * x[v]
                    if d < best_d or (d == best_d and o < best_o):
                        best_d = d
                        best_o = o
                        chosen = v
                        cnt = 1
                    elif d == best_d and o == best_o:
                        cnt += 1
                        if np.random.randint(0, cnt) == 0:
                            chosen = v
            if chosen < 0:
                # every improving variable is tabu: take one at random
                cnt = 0
                for p in range(c_ptr[k], c_ptr[k + 1]):
                    v = c_var[p]
                    new = lhs[k] + c_coef[p] * (1 - 2 * x[v])
                    if _viol(sense[k], new, rhs[k]) < _viol(sense[k], lhs[k], rhs[k]):
                        cnt += 1
                        if np.random.randint(0, cnt) == 0:
                            chosen = v
        else:
            if np.random.random() < noise:
                cnt = 0
                for v in range(nvar):
                    if x[v] == 1:
                        cnt += 1
                        if np.random.randint(0, cnt) == 0:
                            chosen = v
            else:
                best_d = 1 << 60
                cnt = 0
                for v in range(nvar):
                    if x[v] != 1 or flips - last[v] <= tabu:
                        continue
                    d = _flip_delta(v, x, lhs, v_ptr, v_con, v_coef, sense, rhs)
                    if d < best_d:
                        best_d = d
                        chosen = v
                        cnt = 1
                    elif d == best_d:
                        cnt += 1
                        if np.random.randint(0, cnt) == 0:
                            chosen = v
        if chosen < 0:
            flips += 1
            continue
        step = 1 - 2 * x[chosen]
        x[chosen] += step
        ones += step
        last[chosen] = flips
        for p in range(v_ptr[chosen], v_ptr[chosen + 1]):
            k = v_con[p]
            lhs[k] += v_coef[p] * step
            bad = _viol(sense[k], lhs[k], rhs[k]) > 0
            if bad and viol_pos[k] < 0:
                viol_pos[k] = nviol
                viol_list[nviol] = k
                nviol += 1
            elif not bad and viol_pos[k] >= 0:
                j = viol_pos[k]
                nviol -= 1
                moved = viol_list[nviol]
                viol_list[j] = moved
                viol_pos[moved] = j
                viol_pos[k] = -1
        flips += 1
        if nviol == 0 and ones < best:
            best = ones
            best_x[:] = x
    return best, best_x, flips


@dataclass
class RestartRecord:
    restart: int
    seed: int
    objective: int
    feasible: bool
    flips: int


@dataclass
class LocalSearchResult:
    best: CoverSolution
    restarts: list[RestartRecord] = field(default_factory=list)


def _run_restart(args):
    arr, seed, noise, max_flips, target, tabu = args
    best, best_x, flips = _ls_kernel(
        arr.nvar, arr.c_ptr, arr.c_var, arr.c_coef, arr.v_ptr, arr.v_con, arr.v_coef,
        arr.sense, arr.rhs, seed, noise, max_flips, target, tabu,
    )
    return int(best), tuple(int(v) for v in np.flatnonzero(best_x)), int(flips)


def local_search(
    inst: CoverInstance,
    params: SolverParams,
    tabu: int = DEFAULT_TABU,
    jobs: int = 1,
) -> LocalSearchResult:
    """Restart r runs on seed ``params.seed + r``; the best is chosen by (objective, r)."""
    arr = _arrays(inst)
    target = -1 if params.target is None else params.target
    work = [
        (arr, (params.seed + r) % 2 ** 32, params.noise, params.max_flips, target, tabu)
        for r in range(params.restarts)
    ]
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outs = list(pool.map(_run_restart, work))
    else:
        outs = [_run_restart(w) for w in work]
    records = []
    best_sol, best_key = None, None
    for r, (obj, chosen, flips) in enumerate(outs):
        feasible = obj <= inst.num_vars and check_solution(inst, chosen)
        rec = RestartRecord(r, params.seed + r, len(chosen), feasible, flips)
        records.append(rec)
        sol = CoverSolution(inst.order, chosen, feasible, {"flips": flips, "restart": r})
        key = (not sol.feasible, sol.objective, r)
        if best_sol is None or key < best_key:
            best_sol, best_key = sol, key
    total = sum(rec.flips for rec in records)
    best_sol.stats["total_flips"] = total
    return LocalSearchResult(best_sol, records)


# --- branch and bound ------------------------------------------------------


@numba.njit(cache=True)
def _fix(v, val, x, trail, ntrail, fixed_sum, pos_un, neg_un, v_ptr, v_con, v_coef):
    x[v] = val
    trail[ntrail] = v
    for p in range(v_ptr[v], v_ptr[v + 1]):
        k = v_con[p]
        a = v_coef[p]
        if a > 0:
            pos_un[k] -= a
        else:
            neg_un[k] += a
        fixed_sum[k] += a * val
    return ntrail + 1


@numba.njit(cache=True)
def _unfix_to(target, x, trail, ntrail, fixed_sum, pos_un, neg_un, v_ptr, v_con, v_coef):
    while ntrail > target:
        ntrail -= 1
        v = trail[ntrail]
        val = x[v]
        for p in range(v_ptr[v], v_ptr[v + 1]):
            k = v_con[p]
            a = v_coef[p]
            if a > 0:
                pos_un[k] += a
            else:
                neg_un[k] -= a
            fixed_sum[k] -= a * val
        x[v] = -1
    return ntrail


@numba.njit(cache=True)
def _propagate(start, x, trail, ntrail, fixed_sum, pos_un, neg_un, maxabs,
               c_ptr, c_var, c_coef, v_ptr, v_con, v_coef, sense, rhs, queue, inq, all_cons):
    """Bound propagation from trail position ``start``; returns (ok, ntrail)."""
    m = len(rhs)
    qh = 0
    qt = 0
    if all_cons:
        for k in range(m):
            queue[qt] = k
            qt += 1
            inq[k] = True
    head = start
    while True:
        while head < ntrail:
            v = trail[head]
            head += 1
            for p in range(v_ptr[v], v_ptr[v + 1]):
                k = v_con[p]
                if not inq[k]:
                    inq[k] = True
                    queue[qt % m] = k
                    qt += 1
        if qh == qt:
            return True, ntrail
        k = queue[qh % m]
        qh += 1
        inq[k] = False
        lo = fixed_sum[k] + neg_un[k]
        hi = fixed_sum[k] + pos_un[k]
        s = sense[k]
        r = rhs[k]
        if (s == 0 or s == 2) and hi < r:
            while qh < qt:
                inq[queue[qh % m]] = False
                qh += 1
            return False, ntrail
        if (s == 1 or s == 2) and lo > r:
            while qh < qt:
                inq[queue[qh % m]] = False
                qh += 1
            return False, ntrail
        need_ge = (s == 0 or s == 2) and hi - maxabs[k] < r
        need_le = (s == 1 or s == 2) and lo + maxabs[k] > r
        if not (need_ge or need_le):
            continue
        for p in range(c_ptr[k], c_ptr[k + 1]):
            v = c_var[p]
            if x[v] >= 0:
                continue
            a = c_coef[p]
            val = -1
            if need_ge:
                if a > 0 and hi - a < r:
                    val = 1
                elif a < 0 and hi + a < r:
                    val = 0
            if val < 0 and need_le:
                if a > 0 and lo + a > r:
                    val = 0
                elif a < 0 and lo - a > r:
                    val = 1
            if val >= 0:
                ntrail = _fix(v, val, x, trail, ntrail, fixed_sum, pos_un, neg_un,
                              v_ptr, v_con, v_coef)
                lo = fixed_sum[k] + neg_un[k]
                hi = fixed_sum[k] + pos_un[k]


@numba.njit(cache=True)
def _packing(covering, rhs, fixed_sum, pos_un, maxabs, c_ptr, c_var, x, stamp, gen, keys):
    """Greedy variable-disjoint packing of unsatisfied covering rows."""
    m = len(rhs)
    cnt = 0
    idx = np.empty(m, dtype=np.int64)
    for k in range(m):
        if covering[k] and fixed_sum[k] < rhs[k]:
            need = rhs[k] - fixed_sum[k]
            idx[cnt] = k
            keys[cnt] = -need / pos_un[k] if pos_un[k] > 0 else -1e18
            cnt += 1
    order = np.argsort(keys[:cnt], kind="mergesort")
    total = 0
    for j in range(cnt):
        k = idx[order[j]]
        clash = False
        for p in range(c_ptr[k], c_ptr[k + 1]):
            v = c_var[p]
            if x[v] < 0 and stamp[v] == gen:
                clash = True
                break
        if clash:
            continue
        for p in range(c_ptr[k], c_ptr[k + 1]):
            v = c_var[p]
            if x[v] < 0:
                stamp[v] = gen
        need = rhs[k] - fixed_sum[k]
        total += (need + maxabs[k] - 1) // maxabs[k]
    return total


@numba.njit(cache=True)
def _choose(covering, rhs, fixed_sum, pos_un, c_ptr, c_var, x, score):
    """Variable occurring most often in the unsatisfied covering rows of least slack."""
    m = len(rhs)
    best_slack = 1 << 60
    for k in range(m):
        if covering[k] and fixed_sum[k] < rhs[k]:
            sl = pos_un[k] - (rhs[k] - fixed_sum[k])
            if sl < best_slack:
                best_slack = sl
    if best_slack == 1 << 60:
        for v in range(len(x)):
            if x[v] < 0:
                return v, 0
        return -1, 0
    score[:] = 0
    for k in range(m):
        if covering[k] and fixed_sum[k] < rhs[k]:
            if pos_un[k] - (rhs[k] - fixed_sum[k]) == best_slack:
                for p in range(c_ptr[k], c_ptr[k + 1]):
                    v = c_var[p]
                    if x[v] < 0:
                        score[v] += 1
    bv = -1
    bs = 0
    for v in range(len(x)):
        if score[v] > bs:
            bs = score[v]
            bv = v
    return bv, 1


@numba.njit(cache=True)
def _bnb_kernel(nvar, c_ptr, c_var, c_coef, v_ptr, v_con, v_coef, sense, rhs, covering,
                upper, node_budget):
    m = len(rhs)
    x = -np.ones(nvar, dtype=np.int64)
    trail = np.empty(nvar, dtype=np.int64)
    fixed_sum = np.zeros(m, dtype=np.int64)
    pos_un = np.zeros(m, dtype=np.int64)
    neg_un = np.zeros(m, dtype=np.int64)
    maxabs = np.ones(m, dtype=np.int64)
    for k in range(m):
        for p in range(c_ptr[k], c_ptr[k + 1]):
            a = c_coef[p]
            if a > 0:
                pos_un[k] += a
            else:
                neg_un[k] += a
            if abs(a) > maxabs[k]:
                maxabs[k] = abs(a)
    queue = np.empty(max(m, 1), dtype=np.int64)
    inq = np.zeros(max(m, 1), dtype=np.bool_)
    stamp = np.zeros(nvar, dtype=np.int64)
    keys = np.empty(max(m, 1), dtype=np.float64)
    score = np.zeros(nvar, dtype=np.int64)
    # DFS frames
    f_var = np.empty(nvar + 1, dtype=np.int64)
    f_first = np.empty(nvar + 1, dtype=np.int64)
    f_stage = np.empty(nvar + 1, dtype=np.int64)
    f_trail = np.empty(nvar + 1, dtype=np.int64)
    f_bound = np.empty(nvar + 1, dtype=np.int64)
    best = upper
    best_x = np.zeros(nvar, dtype=np.int64)
    found = False
    nodes = 0
    gen = 0
    depth = 0
    ntrail = 0
    ok, ntrail = _propagate(0, x, trail, ntrail, fixed_sum, pos_un, neg_un, maxabs,
                            c_ptr, c_var, c_coef, v_ptr, v_con, v_coef, sense, rhs,
                            queue, inq, True)
    root_bound = -1
    exhausted = False
    while True:
        if ok:
            if nodes >= node_budget:
                exhausted = True
                break
            nodes += 1
            ones = 0
            for v in range(nvar):
                if x[v] == 1:
                    ones += 1
            gen += 1
            bnd = ones + _packing(covering, rhs, fixed_sum, pos_un, maxabs, c_ptr, c_var,
                                  x, stamp, gen, keys)
            # a subtree's bound never drops below its ancestors'
            if depth > 0 and f_bound[depth - 1] > bnd:
                bnd = f_bound[depth - 1]
            if root_bound < 0:
                root_bound = bnd
            if bnd < best:
                v, kind = _choose(covering, rhs, fixed_sum, pos_un, c_ptr, c_var, x, score)
                if v < 0:
                    best = ones
                    for u in range(nvar):
                        best_x[u] = 1 if x[u] == 1 else 0
                    found = True
                else:
                    first = 1 if kind == 1 else 0
                    f_var[depth] = v
                    f_first[depth] = first
                    f_stage[depth] = 0
                    f_trail[depth] = ntrail
                    f_bound[depth] = bnd
                    depth += 1
                    start = ntrail
                    ntrail = _fix(v, first, x, trail, ntrail, fixed_sum, pos_un, neg_un,
                                  v_ptr, v_con, v_coef)
                    ok, ntrail = _propagate(start, x, trail, ntrail, fixed_sum, pos_un, neg_un,
                                            maxabs, c_ptr, c_var, c_coef, v_ptr, v_con, v_coef,
                                            sense, rhs, queue, inq, False)
                    continue
        # backtrack
        moved = False
        while depth > 0:
            d = depth - 1
            ntrail = _unfix_to(f_trail[d], x, trail, ntrail, fixed_sum, pos_un, neg_un,
                               v_ptr, v_con, v_coef)
            if f_stage[d] == 0 and f_bound[d] < best:
                f_stage[d] = 1
                start = ntrail
                ntrail = _fix(f_var[d], 1 - f_first[d], x, trail, ntrail, fixed_sum, pos_un,
                              neg_un, v_ptr, v_con, v_coef)
                ok, ntrail = _propagate(start, x, trail, ntrail, fixed_sum, pos_un, neg_un,
                                        maxabs, c_ptr, c_var, c_coef, v_ptr, v_con, v_coef,
                                        sense, rhs, queue, inq, False)
                moved = True
                break
            depth -= 1
        if not moved:
            break
    proved = best
    if exhausted:
        # open nodes: pending second branches and the node about to be evaluated
        lo = best
        for d in range(depth):
            if f_stage[d] == 0 and f_bound[d] < lo:
                lo = f_bound[d]
        if depth > 0 and f_bound[depth - 1] < lo:
            lo = f_bound[depth - 1]
        if depth == 0:
            lo = 0
        proved = lo
    return found, best, best_x, proved, nodes, exhausted, root_bound


@dataclass
class BranchAndBoundResult:
    solution: CoverSolution | None
    lower_bound: int
    optimal: bool
    nodes: int
    root_bound: int


def branch_and_bound(
    inst: CoverInstance, node_budget: int = 10 ** 9, upper: int | None = None
) -> BranchAndBoundResult:
    """Depth-first search for a minimum solution with objective below ``upper``.

    When the search space is exhausted without an improving solution,
    ``lower_bound`` equals ``upper``.
    """
    arr = _arrays(inst)
    ub = inst.num_vars + 1 if upper is None else upper
    found, best, best_x, proved, nodes, exhausted, root = _bnb_kernel(
        arr.nvar, arr.c_ptr, arr.c_var, arr.c_coef, arr.v_ptr, arr.v_con, arr.v_coef,
        arr.sense, arr.rhs, arr.covering, ub, node_budget,
    )
    sol = None
    if found:
        chosen = tuple(int(v) for v in np.flatnonzero(best_x))
        sol = CoverSolution(inst.order, chosen, check_solution(inst, chosen), {"nodes": int(nodes)})
    if not exhausted:
        proved = best
    return BranchAndBoundResult(sol, int(proved), bool(found and not exhausted), int(nodes), int(root))


@dataclass
class Checkpoint:
    bound: int
    nodes: int


def prove_lower_bound(
    inst: CoverInstance,
    goal: int,
    node_budget: int | None = None,
    start: int | None = None,
    progress=None,
) -> tuple[int, list[Checkpoint]]:
    """Raise a proved lower bound one unit at a time.

    Each step runs an exhaustive search for a solution of objective below
    ``bound + 1``; finishing without one proves ``bound + 1``.  Stops at
    ``goal``, on a found solution, or when the shared node budget runs out.
    """
    from .cover import lower_bound_packing

    bound = lower_bound_packing(inst) if start is None else start
    marks = [Checkpoint(bound, 0)]
    spent = 0
    while bound < goal:
        left = None if node_budget is None else node_budget - spent
        if left is not None and left <= 0:
            break
        res = branch_and_bound(inst, 2 ** 62 if left is None else left, upper=bound + 1)
        spent += res.nodes
        if res.solution is not None:
            bound = res.solution.objective
            marks.append(Checkpoint(bound, spent))
            break
        if res.lower_bound <= bound:
            break
        bound = res.lower_bound
        marks.append(Checkpoint(bound, spent))
        if progress is not None:
            progress(marks[-1])
    return bound, marks
