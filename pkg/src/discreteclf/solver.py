"""Branch-and-bound over LP relaxations, and an exhaustive enumeration oracle.

The LP relaxations are solved with HiGHS through ``highspy`` and re-solved
after every bound change from the previous basis.  The search uses best-bound
node selection, most-fractional branching within the highest branching
priority class, node-level bound propagation supplied by the program, and
primal heuristics (rounding and local search) whose candidates are always
validated against the program before they are accepted.
"""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .formulation import IntegerProgram
from .heuristics import local_search, round_to_sets
from .problem import DiscreteProblem

__all__ = [
    "SolveOptions",
    "SolveResult",
    "PoolEntry",
    "SolverError",
    "EnumerationCapExceeded",
    "solve",
    "brute_force",
    "STATUSES",
]

STATUSES = ("optimal", "feasible-time-limit", "infeasible", "unbounded", "no-solution-limit")

INT_TOL = 1e-6
OBJ_TOL = 1e-9


class SolverError(RuntimeError):
    """Raised when an LP relaxation fails numerically."""


class EnumerationCapExceeded(ValueError):
    """Raised when exhaustive enumeration would exceed its cap."""


@dataclass(frozen=True)
class SolveOptions:
    """Limits and tolerances of a solve.

    Attributes
    ----------
    time_limit : float
        Wall-clock seconds.
    gap_tolerance : float
        Relative gap at which the search stops and reports ``optimal``.
    absolute_gap : float
        Absolute gap treated as zero (objective comparison tolerance).
    node_limit : int, optional
        Maximum number of processed nodes.
    pool_size : int
        Number of distinct feasible solutions retained.
    deterministic_seed : int
        Seed for any randomized component (kept for reproducibility).
    heuristics : bool
        Enable rounding and local search.
    polish_every : int
        Run local search from the node's rounded LP solution every this many
        nodes.
    """

    time_limit: float = 60.0
    gap_tolerance: float = 0.0
    absolute_gap: float = OBJ_TOL
    node_limit: int | None = None
    pool_size: int = 10
    deterministic_seed: int = 0
    heuristics: bool = True
    polish_every: int = 200

    def __post_init__(self) -> None:
        if not self.time_limit > 0:
            raise ValueError("time_limit must be positive")
        if self.gap_tolerance < 0:
            raise ValueError("gap_tolerance must be non-negative")


@dataclass(frozen=True)
class PoolEntry:
    objective: float
    coefficients: np.ndarray | None
    x: np.ndarray | None


@dataclass
class SolveResult:
    """Outcome of :func:`solve` or :func:`brute_force`.

    ``status`` is one of ``STATUSES``.  ``no-solution-limit`` means a limit was
    reached before any feasible solution was found; ``dual_bound`` then tells
    how far the search got.
    """

    status: str
    objective: float
    dual_bound: float
    gap: float
    x: np.ndarray | None = None
    coefficients: np.ndarray | None = None
    pool: list[PoolEntry] = field(default_factory=list)
    node_count: int = 0
    wall_time: float = 0.0
    trace: list[tuple[float, int, float, float]] = field(default_factory=list)
    argmin: np.ndarray | None = None

    @property
    def has_solution(self) -> bool:
        return self.status in ("optimal", "feasible-time-limit")


def relative_gap(objective: float, bound: float) -> float:
    if not math.isfinite(objective) or not math.isfinite(bound):
        return math.inf
    return (objective - bound) / max(abs(objective), 1e-10)


# ---------------------------------------------------------------------------
# LP relaxation


class _HighsRelaxation:
    def __init__(self, ip: IntegerProgram):
        import highspy

        self._hs = highspy
        h = highspy.Highs()
        h.setOptionValue("output_flag", False)
        h.setOptionValue("threads", 1)
        h.setOptionValue("presolve", "off")
        h.setOptionValue("random_seed", 0)
        inf = highspy.kHighsInf
        A = ip.A.tocsc()
        lp = highspy.HighsLp()
        lp.num_col_ = ip.n_vars
        lp.num_row_ = ip.n_rows
        lp.col_cost_ = ip.c.astype(float)
        lp.col_lower_ = np.where(np.isinf(ip.lb), -inf, ip.lb)
        lp.col_upper_ = np.where(np.isinf(ip.ub), inf, ip.ub)
        lp.row_lower_ = np.where(np.isinf(ip.row_lo), -inf, ip.row_lo)
        lp.row_upper_ = np.where(np.isinf(ip.row_hi), inf, ip.row_hi)
        lp.a_matrix_.format_ = highspy.MatrixFormat.kColwise
        lp.a_matrix_.start_ = A.indptr.astype(np.int32)
        lp.a_matrix_.index_ = A.indices.astype(np.int32)
        lp.a_matrix_.value_ = A.data.astype(float)
        lp.offset_ = float(ip.objective_offset)
        h.passModel(lp)
        self.h = h
        self.n = ip.n_vars
        self.idx = np.arange(ip.n_vars, dtype=np.int32)
        self.inf = inf

    def solve(self, lb: np.ndarray, ub: np.ndarray) -> tuple[str, float, np.ndarray | None]:
        h = self.h
        inf = self.inf
        h.changeColsBounds(self.n, self.idx, np.where(np.isinf(lb), -inf, lb), np.where(np.isinf(ub), inf, ub))
        h.run()
        st = h.getModelStatus()
        MS = self._hs.HighsModelStatus
        if st == MS.kOptimal:
            x = np.array(h.getSolution().col_value)
            return "optimal", float(h.getInfo().objective_function_value), x
        if st == MS.kInfeasible:
            return "infeasible", math.inf, None
        if st in (MS.kUnbounded, MS.kUnboundedOrInfeasible):
            # distinguish with a fresh solve from scratch
            h.clearSolver()
            h.run()
            st = h.getModelStatus()
            if st == MS.kInfeasible:
                return "infeasible", math.inf, None
            if st == MS.kOptimal:
                x = np.array(h.getSolution().col_value)
                return "optimal", float(h.getInfo().objective_function_value), x
            return "unbounded", -math.inf, None
        # retry once without the warm basis before giving up
        h.clearSolver()
        h.run()
        if h.getModelStatus() == MS.kOptimal:
            x = np.array(h.getSolution().col_value)
            return "optimal", float(h.getInfo().objective_function_value), x
        if h.getModelStatus() == MS.kInfeasible:
            return "infeasible", math.inf, None
        return "error", math.nan, None


class _ScipyRelaxation:
    """Fallback relaxation solver (no warm starts)."""

    def __init__(self, ip: IntegerProgram):
        from scipy.optimize import linprog

        self._linprog = linprog
        self.ip = ip
        A = ip.A
        lo, hi = ip.row_lo, ip.row_hi
        eq = lo == hi
        up = ~eq & np.isfinite(hi)
        dn = ~eq & np.isfinite(lo)
        import scipy.sparse as sp

        self.A_ub = sp.vstack([A[up], -A[dn]]).tocsr()
        self.b_ub = np.concatenate([hi[up], -lo[dn]])
        self.A_eq = A[eq]
        self.b_eq = lo[eq]

    def solve(self, lb, ub):
        ip = self.ip
        res = self._linprog(
            ip.c,
            A_ub=self.A_ub if self.A_ub.shape[0] else None,
            b_ub=self.b_ub if self.A_ub.shape[0] else None,
            A_eq=self.A_eq if self.A_eq.shape[0] else None,
            b_eq=self.b_eq if self.A_eq.shape[0] else None,
            bounds=list(zip(np.where(np.isinf(lb), None, lb), np.where(np.isinf(ub), None, ub))),
            method="highs",
        )
        if res.status == 0:
            return "optimal", float(res.fun) + ip.objective_offset, np.asarray(res.x)
        if res.status == 2:
            return "infeasible", math.inf, None
        if res.status == 3:
            return "unbounded", -math.inf, None
        return "error", math.nan, None


def _relaxation(ip: IntegerProgram):
    try:
        return _HighsRelaxation(ip)
    except ImportError:  # pragma: no cover - highspy is a declared dependency
        return _ScipyRelaxation(ip)


# ---------------------------------------------------------------------------
# branch and bound


@dataclass(order=True)
class _Node:
    bound: float
    node_id: int
    changes: tuple = field(compare=False, default=())
    depth: int = field(compare=False, default=0)


class _Incumbent:
    def __init__(self, ip: IntegerProgram, pool_size: int):
        self.ip = ip
        self.value = math.inf
        self.x: np.ndarray | None = None
        self.lam: np.ndarray | None = None
        self.pool: dict[tuple, PoolEntry] = {}
        self.pool_size = pool_size

    def offer(self, x: np.ndarray | None) -> bool:
        """Validate a full assignment and keep it if it is good; True if it improved."""
        if x is None or not self.ip.is_feasible(x):
            return False
        ip = self.ip
        if ip.coef_vars is not None and ip.problem is not None:
            lam = ip.decode(x)
            xc = ip.complete(lam)
            if xc is not None and ip.is_feasible(xc):
                x = xc
        else:
            lam = None
            x = x.copy()
            x[ip.integer_mask] = np.round(x[ip.integer_mask])
            if not ip.is_feasible(x):
                return False
        val = ip.objective_value(x)
        key = tuple(np.round(lam if lam is not None else x, 9))
        if key not in self.pool:
            self.pool[key] = PoolEntry(val, None if lam is None else lam.copy(), x.copy())
            if len(self.pool) > self.pool_size:
                worst = max(self.pool, key=lambda k: (self.pool[k].objective, k))
                del self.pool[worst]
        if val < self.value - 1e-12:
            self.value, self.x, self.lam = val, x.copy(), None if lam is None else lam.copy()
            return True
        return False

    def offer_lambda(self, lam: np.ndarray) -> bool:
        x = self.ip.complete(lam)
        return self.offer(x)

    def sorted_pool(self) -> list[PoolEntry]:
        return sorted(self.pool.values(), key=lambda e: e.objective)


def solve(ip: IntegerProgram, opts: SolveOptions | None = None) -> SolveResult:
    """Minimize an integer program by LP-based branch and bound.

    Parameters
    ----------
    ip : IntegerProgram
        Program to solve.
    opts : SolveOptions, optional
        Limits and tolerances.

    Returns
    -------
    SolveResult
        ``dual_bound <= objective`` whenever a solution exists; the bound
        trace is non-decreasing and the incumbent trace non-increasing.

    Raises
    ------
    SolverError
        When an LP relaxation fails numerically (the message names the node).
    """
    opts = opts or SolveOptions()
    t0 = time.perf_counter()
    deadline = t0 + opts.time_limit
    lp = _relaxation(ip)
    root_lb, root_ub = ip.lb.copy(), ip.ub.copy()
    integer = ip.integer_mask
    prio = ip.branch_priority
    inc = _Incumbent(ip, opts.pool_size)
    problem: DiscreteProblem | None = ip.problem
    use_heur = opts.heuristics and problem is not None and ip.coef_vars is not None
    trace: list[tuple[float, int, float, float]] = []
    best_bound = -math.inf

    def elapsed() -> float:
        return time.perf_counter() - t0

    def note(nodes: int, bound: float) -> None:
        nonlocal best_bound
        best_bound = max(best_bound, min(bound, inc.value))
        if not trace or trace[-1][2] != inc.value or trace[-1][3] != best_bound:
            trace.append((elapsed(), nodes, inc.value, best_bound))

    def polish(lam: np.ndarray) -> None:
        if not use_heur:
            return
        remaining = deadline - time.perf_counter()
        if remaining <= 0:
            return
        assert problem is not None
        lam2, _ = local_search(problem, lam, time_limit=remaining)
        inc.offer_lambda(lam2)

    def prune_tol(value: float) -> float:
        return max(opts.absolute_gap, opts.gap_tolerance * abs(value)) if math.isfinite(value) else 0.0

    if use_heur:
        assert problem is not None
        zero = np.array([problem.L.nearest(j, 0.0) for j in range(problem.n_coef)])
        inc.offer_lambda(zero)
        polish(zero)

    # root
    lb, ub = root_lb.copy(), root_ub.copy()
    if not ip.propagate(lb, ub):
        return _finish(ip, "infeasible", inc, math.inf, 0, t0, trace)
    status, root_val, x = lp.solve(lb, ub)
    if status == "infeasible":
        return _finish(ip, "infeasible" if inc.x is None else "optimal", inc, inc.value, 1, t0, trace)
    if status == "unbounded":
        return _finish(ip, "unbounded", inc, -math.inf, 1, t0, trace)
    if status == "error":
        raise SolverError("LP relaxation failed at node 0")

    heap: list[_Node] = [_Node(root_val, 0, (), 0)]
    next_id = 1
    nodes = 0
    pruned_min = math.inf
    hit_limit = False
    first = True
    cached = (lb, ub, status, root_val, x)

    while heap:
        if time.perf_counter() > deadline or (opts.node_limit is not None and nodes >= opts.node_limit):
            hit_limit = True
            break
        node = heapq.heappop(heap)
        if node.bound >= inc.value - prune_tol(inc.value):
            pruned_min = min(pruned_min, node.bound)
            continue
        if first:
            lb, ub, status, val, x = cached
            first = False
        else:
            lb, ub = root_lb.copy(), root_ub.copy()
            for var, lo, hi in node.changes:
                lb[var] = max(lb[var], lo)
                ub[var] = min(ub[var], hi)
            if np.any(lb > ub) or not ip.propagate(lb, ub):
                nodes += 1
                continue
            lam_fixed = ip.fixed_coefficients(lb, ub)
            if lam_fixed is not None:
                nodes += 1
                xc = ip.complete(lam_fixed)
                if xc is not None and np.all(xc >= lb - INT_TOL) and np.all(xc <= ub + INT_TOL):
                    inc.offer(xc)
                note(nodes, _open_bound(heap, inc.value, pruned_min))
                continue
            status, val, x = lp.solve(lb, ub)
        nodes += 1
        if status == "infeasible":
            continue
        if status == "unbounded":
            return _finish(ip, "unbounded", inc, -math.inf, nodes, t0, trace)
        if status == "error":
            raise SolverError(f"LP relaxation failed at node {node.node_id}")
        assert x is not None
        val = max(val, node.bound)
        if use_heur:
            assert problem is not None
            lam_r = round_to_sets(problem, ip.decode(x))
            improved = inc.offer_lambda(lam_r)
            if improved or nodes == 1 or nodes % opts.polish_every == 0:
                polish(lam_r)
        if val >= inc.value - prune_tol(inc.value):
            pruned_min = min(pruned_min, val)
            note(nodes, _open_bound(heap, inc.value, pruned_min))
            continue
        xi = x[integer]
        frac = np.abs(xi - np.round(xi))
        cand = np.flatnonzero(frac > INT_TOL)
        if cand.size == 0:
            xr = x.copy()
            xr[integer] = np.round(xi)
            inc.offer(xr)
            if inc.value > val + prune_tol(val):
                # the rounded point was rejected or is worse than the LP: keep its bound honest
                pruned_min = min(pruned_min, val)
            note(nodes, _open_bound(heap, inc.value, pruned_min))
            continue
        ivars = np.flatnonzero(integer)[cand]
        p = prio[ivars]
        top = ivars[p == p.max()]
        ftop = x[top] - np.floor(x[top])
        score = np.minimum(ftop, 1.0 - ftop)
        k = int(np.argmax(score))  # first maximum = lowest index
        var = int(top[k])
        fl = math.floor(x[var])
        down = node.changes + ((var, -math.inf, float(fl)),)
        up = node.changes + ((var, float(fl + 1), math.inf),)
        heapq.heappush(heap, _Node(val, next_id, down, node.depth + 1))
        heapq.heappush(heap, _Node(val, next_id + 1, up, node.depth + 1))
        next_id += 2
        note(nodes, _open_bound(heap, inc.value, pruned_min))

    open_min = heap[0].bound if heap else math.inf
    bound = min(open_min, pruned_min, inc.value)
    bound = max(bound, best_bound) if math.isfinite(bound) else bound
    if inc.x is None:
        status_out = "no-solution-limit" if hit_limit else "infeasible"
        return _finish(ip, status_out, inc, bound if hit_limit else math.inf, nodes, t0, trace)
    done = not hit_limit or inc.value - bound <= prune_tol(inc.value)
    return _finish(ip, "optimal" if done else "feasible-time-limit", inc, bound, nodes, t0, trace)


def _open_bound(heap: list[_Node], incumbent: float, pruned_min: float) -> float:
    return min(heap[0].bound if heap else math.inf, incumbent, pruned_min)


def _finish(ip, status, inc: _Incumbent, bound: float, nodes: int, t0: float, trace) -> SolveResult:
    obj = inc.value
    if inc.x is not None and status == "optimal":
        bound = min(bound, obj) if math.isfinite(bound) else obj
    res = SolveResult(
        status=status,
        objective=obj,
        dual_bound=bound,
        gap=relative_gap(obj, bound) if inc.x is not None else math.inf,
        x=inc.x,
        coefficients=inc.lam,
        pool=inc.sorted_pool(),
        node_count=nodes,
        wall_time=time.perf_counter() - t0,
        trace=list(trace),
    )
    if inc.x is not None and (not res.trace or res.trace[-1][2] != obj or res.trace[-1][3] != bound):
        res.trace.append((res.wall_time, nodes, obj, max(bound, res.trace[-1][3] if res.trace else -math.inf)))
    return res


# ---------------------------------------------------------------------------
# exhaustive oracle


def brute_force(
    target: IntegerProgram | DiscreteProblem,
    cap: int = 10**7,
    margin: float = 0.0,
    tol: float = OBJ_TOL,
    chunk_elems: int = 4_000_000,
) -> SolveResult:
    """Exact optimum by enumerating every coefficient vector.

    The objective is evaluated directly (0-1 loss from the scores, penalty
    from the value-set price tables) and every operational constraint is
    checked from the predictions; the integer-program encoding is bypassed.

    Parameters
    ----------
    target : IntegerProgram or DiscreteProblem
        Problem to enumerate.
    cap : int
        Largest number of coefficient vectors allowed.
    margin : float
        Loss semantics, ``0`` for the exact 0-1 loss.
    tol : float
        Objective tolerance defining the argmin set.

    Returns
    -------
    SolveResult
        ``status="optimal"`` (or ``"infeasible"``) with ``argmin`` holding all
        coefficient vectors within ``tol`` of the optimum.

    Raises
    ------
    EnumerationCapExceeded
        If ``prod_j |L_j| > cap``.
    """
    t0 = time.perf_counter()
    problem = target.problem if isinstance(target, IntegerProgram) else target
    if problem is None:
        raise ValueError("program has no coefficient-space description")
    L = problem.L
    total = L.cardinality()
    if total > cap:
        raise EnumerationCapExceeded(f"{total} coefficient vectors exceed the cap of {cap}")
    shape = tuple(v.size for v in L.values)
    rows = max(1, chunk_elems // max(1, problem.N))
    best = math.inf
    keep: list[np.ndarray] = []
    keep_f: list[np.ndarray] = []
    for start in range(0, total, rows):
        idx = np.arange(start, min(total, start + rows))
        digits = np.unravel_index(idx, shape)
        Lam = np.column_stack([L.values[j][digits[j]] for j in range(L.n_coef)])
        f = problem.objective(Lam, margin)
        f = np.where(problem.feasible(Lam, margin), f, math.inf)
        m = float(f.min())
        if m < best - tol:
            best = m
        sel = f <= best + tol
        if sel.any():
            keep.append(Lam[sel])
            keep_f.append(f[sel])
        # drop stale candidates
        if keep:
            cat_f = np.concatenate(keep_f)
            cat = np.concatenate(keep)
            ok = cat_f <= best + tol
            keep, keep_f = [cat[ok]], [cat_f[ok]]
    wall = time.perf_counter() - t0
    if not math.isfinite(best):
        return SolveResult("infeasible", math.inf, math.inf, math.inf, node_count=total, wall_time=wall)
    argmin = keep[0]
    order = np.lexsort(argmin.T[::-1])
    argmin = argmin[order]
    lam = argmin[0]
    return SolveResult(
        status="optimal",
        objective=best,
        dual_bound=best,
        gap=0.0,
        coefficients=lam,
        node_count=total,
        wall_time=wall,
        argmin=argmin,
        pool=[PoolEntry(float(problem.objective(a, margin)[0]), a, None) for a in argmin[:10]],
    )
