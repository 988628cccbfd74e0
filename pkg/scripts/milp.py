"""
Self-contained mixed-integer linear programming solver.

Solves

    min  c x
    s.t. A_ub x <= b_ub
         A_eq x  = b_eq
         lb <= x <= ub,   x_j integer for j in integer_vars

with a bounded-variable revised simplex for the LP relaxations and a
best-first branch-and-bound over the integer variables. Constraint matrices
are kept as scipy.sparse; the simplex holds its basis as a sparse LU
factorization with product-form eta updates and refactorizes periodically.
Branch-and-bound children restart from their parent's basis with the dual
simplex.

Solver outcomes are reported through SolverStatus, never raised.
"""

from __future__ import annotations

import heapq
import logging
import math
import time
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from scripts.errors import InputFormatError, InvalidArgument, ModelMismatch

logger = logging.getLogger(__name__)

TOL_FEAS = 1e-7
TOL_INT = 1e-6
TOL_GAP = 1e-9
TOL_OPT = 1e-9
TOL_PIVOT = 1e-9

DEFAULT_NODE_LIMIT = 10 ** 6
DEFAULT_HEURISTIC_FREQUENCY = 100
REFACTOR_FREQUENCY = 100
STALL_LIMIT = 50


class SolverStatus(str, Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    ITERATION_LIMIT = "IterationLimit"
    NODE_LIMIT = "NodeLimit"
    TIME_LIMIT = "TimeLimit"

    @property
    def is_limit(self) -> bool:
        return self in (SolverStatus.ITERATION_LIMIT, SolverStatus.NODE_LIMIT, SolverStatus.TIME_LIMIT)


@dataclass(frozen=True)
class SolverConfig:
    """Limits and tolerances for solve_lp and solve_milp."""

    node_limit: int = DEFAULT_NODE_LIMIT
    time_limit: float | None = None
    # per LP; None means 50 * (rows + columns)
    iteration_limit: int | None = None
    tol_feas: float = TOL_FEAS
    tol_int: float = TOL_INT
    tol_gap: float = TOL_GAP
    heuristic_frequency: int = DEFAULT_HEURISTIC_FREQUENCY

    def __post_init__(self):
        if self.node_limit < 1:
            raise InvalidArgument(f"node_limit must be at least 1, got {self.node_limit}")
        if self.time_limit is not None and not self.time_limit > 0:
            raise InvalidArgument(f"time_limit must be positive, got {self.time_limit}")
        if self.iteration_limit is not None and self.iteration_limit < 1:
            raise InvalidArgument(f"iteration_limit must be at least 1, got {self.iteration_limit}")
        if self.heuristic_frequency < 1:
            raise InvalidArgument("heuristic_frequency must be at least 1")


def _csr(matrix, n_cols, name):
    if matrix is None:
        return sp.csr_matrix((0, n_cols))
    matrix = sp.csr_matrix(matrix, dtype=float)
    if matrix.shape[1] != n_cols:
        raise ModelMismatch(f"{name} has {matrix.shape[1]} columns, expected {n_cols}")
    return matrix


def _vector(values, size, name):
    array = np.zeros(size) if values is None else np.asarray(values, dtype=float).reshape(-1)
    if array.size != size:
        raise ModelMismatch(f"{name} has {array.size} entries, expected {size}")
    return array


@dataclass(frozen=True, eq=False)
class MilpProblem:
    """Standard-form problem with sparse constraint blocks and finite bounds."""

    c: np.ndarray
    A_ub: sp.csr_matrix | None
    b_ub: np.ndarray | None
    A_eq: sp.csr_matrix | None
    b_eq: np.ndarray | None
    lb: np.ndarray
    ub: np.ndarray
    integer_vars: tuple = ()

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float).reshape(-1)
        n = c.size
        A_ub = _csr(self.A_ub, n, "A_ub")
        A_eq = _csr(self.A_eq, n, "A_eq")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "A_ub", A_ub)
        object.__setattr__(self, "A_eq", A_eq)
        object.__setattr__(self, "b_ub", _vector(self.b_ub, A_ub.shape[0], "b_ub"))
        object.__setattr__(self, "b_eq", _vector(self.b_eq, A_eq.shape[0], "b_eq"))
        object.__setattr__(self, "lb", _vector(self.lb, n, "lb"))
        object.__setattr__(self, "ub", _vector(self.ub, n, "ub"))
        if not (np.all(np.isfinite(self.lb)) and np.all(np.isfinite(self.ub))):
            raise InvalidArgument("variable bounds must be finite")
        if np.any(self.lb > self.ub):
            raise InvalidArgument("every lower bound must not exceed its upper bound")
        integer_vars = tuple(sorted({int(j) for j in self.integer_vars}))
        if integer_vars and not (0 <= integer_vars[0] and integer_vars[-1] < n):
            raise ModelMismatch("integer variable index out of range")
        object.__setattr__(self, "integer_vars", integer_vars)

    @property
    def n_vars(self) -> int:
        return int(self.c.size)

    @property
    def n_ub(self) -> int:
        return int(self.A_ub.shape[0])

    @property
    def n_eq(self) -> int:
        return int(self.A_eq.shape[0])

    def objective(self, x) -> float:
        return float(self.c @ np.asarray(x, dtype=float))


@dataclass
class MilpSolution:
    status: SolverStatus
    x: np.ndarray | None = None
    objective: float = math.nan
    nodes_explored: int = 0
    lp_iterations: int = 0
    # best remaining relaxation bound; equals objective when Optimal
    bound: float = math.nan

    @property
    def has_solution(self) -> bool:
        return self.x is not None


def relax(problem: MilpProblem) -> MilpProblem:
    """The LP relaxation: same problem with no integrality."""
    return replace(problem, integer_vars=())


def check_feasibility(problem: MilpProblem, x) -> tuple[float, float]:
    """Largest constraint or bound violation and largest distance of an integer variable to an integer."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != problem.n_vars:
        raise ModelMismatch(f"x has {x.size} entries, problem has {problem.n_vars} variables")
    violations = [0.0]
    if problem.n_ub:
        violations.append(float(np.max(problem.A_ub @ x - problem.b_ub)))
    if problem.n_eq:
        violations.append(float(np.max(np.abs(problem.A_eq @ x - problem.b_eq))))
    violations.append(float(np.max(problem.lb - x, initial=0.0)))
    violations.append(float(np.max(x - problem.ub, initial=0.0)))
    integrality = 0.0
    if problem.integer_vars:
        values = x[list(problem.integer_vars)]
        integrality = float(np.max(np.abs(values - np.round(values))))
    return max(violations), integrality


@dataclass(frozen=True, eq=False)
class _Basis:
    """Basic column per row and the bound each nonbasic column sits at."""

    basic: np.ndarray
    upper: np.ndarray


class _BoundedSimplex:
    """Revised simplex on [A_ub I 0; A_eq 0 0] plus artificial columns.

    `solve` runs phase 1 and phase 2 of the primal simplex from the slack
    basis. `resolve` loads a saved basis under new structural bounds, regains
    primal feasibility with the dual simplex and finishes with primal phase 2.
    Artificial columns are fixed at zero once phase 1 has succeeded.
    """

    def __init__(self, problem: MilpProblem, config: SolverConfig):
        self.config = config
        n, m_ub, m_eq = problem.n_vars, problem.n_ub, problem.n_eq
        self.n = n
        self.m = m_ub + m_eq
        self.b = np.concatenate([problem.b_ub, problem.b_eq])

        A_ub, A_eq = problem.A_ub.tocoo(), problem.A_eq.tocoo()
        rows = np.concatenate([A_ub.row, A_eq.row + m_ub, np.arange(m_ub)])
        cols = np.concatenate([A_ub.col, A_eq.col, n + np.arange(m_ub)])
        data = np.concatenate([A_ub.data, A_eq.data, np.ones(m_ub)])
        nnz = A_ub.nnz + A_eq.nnz
        structural = sp.csc_matrix((data[:nnz], (rows[:nnz], cols[:nnz])), shape=(self.m, n))

        lb = np.concatenate([problem.lb, np.zeros(m_ub)])
        ub = np.concatenate([problem.ub, np.full(m_ub, np.inf)])
        start_upper = np.abs(lb) > np.abs(ub)
        x = np.where(start_upper, ub, lb)
        x[n:] = 0.0

        # starting basis: a slack when its row is satisfied, an artificial otherwise
        residual = self.b - structural @ x[:n]
        basic = []
        art_rows, art_signs = [], []
        n_cols = n + m_ub
        for i in range(self.m):
            if i < m_ub and residual[i] >= 0:
                basic.append(n + i)
                x[n + i] = residual[i]
            else:
                art_rows.append(i)
                art_signs.append(1.0 if residual[i] >= 0 else -1.0)
                basic.append(n_cols + len(art_rows) - 1)
        n_art = len(art_rows)
        self.A = sp.csc_matrix(
            (
                np.concatenate([data, art_signs]),
                (np.concatenate([rows, art_rows]).astype(np.int64), np.concatenate([cols, n_cols + np.arange(n_art)]).astype(np.int64)),
            ),
            shape=(self.m, n_cols + n_art),
        )
        self.At = self.A.T.tocsr()
        self.n_total = n_cols + n_art
        self.artificial = np.arange(n_cols, self.n_total)
        self.lb = np.concatenate([lb, np.zeros(n_art)])
        self.ub = np.concatenate([ub, np.full(n_art, np.inf)])
        self.x = np.concatenate([x, np.abs(residual[art_rows]) if n_art else np.zeros(0)])
        self.cost = np.zeros(self.n_total)
        self.cost[:n] = problem.c

        self.basic = np.asarray(basic, dtype=np.int64)
        self.is_basic = np.zeros(self.n_total, dtype=bool)
        self.is_basic[self.basic] = True
        self.upper = np.concatenate([start_upper, np.zeros(n_art, dtype=bool)])

        self.lu = None
        self.etas: list[tuple[int, np.ndarray]] = []
        self.iterations = 0
        self.limit = config.iteration_limit or 50 * (self.m + self.n_total)
        self.budget = self.limit
        self.phase1_done = n_art == 0

    # basis factorization

    def _column(self, j) -> np.ndarray:
        column = np.zeros(self.m)
        start, end = self.A.indptr[j], self.A.indptr[j + 1]
        column[self.A.indices[start:end]] = self.A.data[start:end]
        return column

    def _refactor(self):
        self.etas = []
        nonbasic_x = self.x.copy()
        nonbasic_x[self.basic] = 0.0
        if not self.m:
            return
        self.lu = splu(sp.csc_matrix(self.A[:, self.basic]))
        self.x[self.basic] = self._ftran(self.b - self.A @ nonbasic_x)

    def _ftran(self, column) -> np.ndarray:
        """B^-1 column."""
        if not self.m:
            return np.zeros(0)
        v = self.lu.solve(np.ascontiguousarray(column, dtype=float))
        for r, alpha in self.etas:
            t = v[r] / alpha[r]
            v -= t * alpha
            v[r] = t
        return v

    def _btran(self, row) -> np.ndarray:
        """row B^-1."""
        if not self.m:
            return np.zeros(0)
        u = np.array(row, dtype=float)
        for r, alpha in reversed(self.etas):
            u[r] = (u[r] - (u @ alpha - u[r] * alpha[r])) / alpha[r]
        return self.lu.solve(u, trans="T")

    def _reduced_costs(self, cost) -> np.ndarray:
        if not self.m:
            return cost.copy()
        return cost - self.At @ self._btran(cost[self.basic])

    def _pivot(self, r, q, alpha, to_upper):
        out = int(self.basic[r])
        self.x[out] = self.ub[out] if to_upper else self.lb[out]
        self.upper[out] = to_upper
        self.is_basic[out] = False
        self.is_basic[q] = True
        self.upper[q] = False
        self.basic[r] = q
        self.etas.append((r, alpha))
        if len(self.etas) >= REFACTOR_FREQUENCY:
            self._refactor()

    def _limit_reached(self, deadline) -> SolverStatus | None:
        if self.iterations >= self.budget:
            return SolverStatus.ITERATION_LIMIT
        if deadline is not None and time.monotonic() > deadline:
            return SolverStatus.TIME_LIMIT
        return None

    # primal simplex

    def _entering(self, d, bland):
        movable = (~self.is_basic) & (self.ub > self.lb)
        candidates = movable & ((~self.upper & (d < -TOL_OPT)) | (self.upper & (d > TOL_OPT)))
        indices = np.flatnonzero(candidates)
        if indices.size == 0:
            return None
        if bland:
            return int(indices[0])
        return int(indices[np.argmax(np.abs(d[indices]))])

    def _primal(self, cost, deadline) -> SolverStatus:
        stalled = 0
        while True:
            limit = self._limit_reached(deadline)
            if limit is not None:
                return limit

            d = self._reduced_costs(cost)
            q = self._entering(d, bland=stalled >= STALL_LIMIT)
            if q is None:
                return SolverStatus.OPTIMAL

            direction = 1.0 if d[q] < 0 else -1.0
            alpha = self._ftran(self._column(q))
            rate = direction * alpha
            x_basic = self.x[self.basic]
            lb_basic, ub_basic = self.lb[self.basic], self.ub[self.basic]

            limits = np.full(self.m, np.inf)
            falling = rate > TOL_PIVOT
            rising = rate < -TOL_PIVOT
            limits[falling] = (x_basic[falling] - lb_basic[falling]) / rate[falling]
            limits[rising] = (ub_basic[rising] - x_basic[rising]) / -rate[rising]
            limits = np.maximum(limits, 0.0)

            step = self.ub[q] - self.lb[q]
            leaving = None
            if self.m and np.min(limits) < step:
                step = float(np.min(limits))
                ties = np.flatnonzero(limits <= step + 1e-12)
                if stalled >= STALL_LIMIT:
                    leaving = int(ties[np.argmin(self.basic[ties])])
                else:
                    leaving = int(ties[np.argmax(np.abs(alpha[ties]))])
            if math.isinf(step):
                return SolverStatus.UNBOUNDED

            self.iterations += 1
            stalled = stalled + 1 if step <= TOL_PIVOT else 0
            self.x[self.basic] = x_basic - step * rate

            if leaving is None:
                # bound flip, basis unchanged
                self.upper[q] = direction > 0
                self.x[q] = self.ub[q] if direction > 0 else self.lb[q]
                continue

            self.x[q] += direction * step
            self._pivot(leaving, q, alpha, to_upper=rate[leaving] < 0)

    # dual simplex

    def _dual(self, cost, deadline) -> SolverStatus:
        """Drive a dual feasible basis to primal feasibility; leaving row is the largest bound violation."""
        stalled = 0
        while self.m:
            limit = self._limit_reached(deadline)
            if limit is not None:
                return limit

            x_basic = self.x[self.basic]
            lb_basic, ub_basic = self.lb[self.basic], self.ub[self.basic]
            below = lb_basic - x_basic
            above = x_basic - ub_basic
            violation = np.maximum(below, above)
            r = int(np.argmax(violation))
            if violation[r] <= self.config.tol_feas:
                return SolverStatus.OPTIMAL
            to_upper = bool(above[r] > below[r])
            delta = x_basic[r] - (ub_basic[r] if to_upper else lb_basic[r])

            unit = np.zeros(self.m)
            unit[r] = 1.0
            row = self.At @ self._btran(unit)
            signed = row if delta > 0 else -row
            movable = (~self.is_basic) & (self.ub > self.lb)
            candidates = movable & ((~self.upper & (signed > TOL_PIVOT)) | (self.upper & (signed < -TOL_PIVOT)))
            indices = np.flatnonzero(candidates)
            if indices.size == 0:
                if self.etas:
                    # recheck the row against a fresh factorization before declaring infeasibility
                    self._refactor()
                    continue
                return SolverStatus.INFEASIBLE

            d = self._reduced_costs(cost)
            slack = np.where(self.upper[indices], np.maximum(-d[indices], 0.0), np.maximum(d[indices], 0.0))
            ratios = slack / np.abs(row[indices])
            best = float(np.min(ratios))
            ties = indices[ratios <= best + 1e-12]
            if stalled >= STALL_LIMIT:
                q = int(ties[0])
            else:
                q = int(ties[np.argmax(np.abs(row[ties]))])

            alpha = self._ftran(self._column(q))
            self.iterations += 1
            if abs(alpha[r]) <= TOL_PIVOT:
                self._refactor()
                stalled += 1
                continue
            stalled = stalled + 1 if best <= TOL_OPT else 0
            step = delta / alpha[r]
            self.x[self.basic] = x_basic - step * alpha
            self.x[q] += step
            self._pivot(r, q, alpha, to_upper)
        return SolverStatus.OPTIMAL

    # entry points

    def solve(self, deadline=None) -> tuple[SolverStatus, np.ndarray | None]:
        """Cold start from the slack/artificial basis."""
        self.budget = self.iterations + self.limit
        self._refactor()
        if not self.phase1_done:
            phase1 = np.zeros(self.n_total)
            phase1[self.artificial] = 1.0
            status = self._primal(phase1, deadline)
            if status is not SolverStatus.OPTIMAL:
                return status, None
            infeasibility = float(self.x[self.artificial].sum())
            if infeasibility > self.config.tol_feas * max(1.0, float(np.max(np.abs(self.b), initial=0.0))):
                return SolverStatus.INFEASIBLE, None
            self.ub[self.artificial] = 0.0
            self.x[self.artificial] = 0.0
            self.upper[self.artificial] = False
            self.phase1_done = True
            self._refactor()

        status = self._primal(self.cost, deadline)
        if status is not SolverStatus.OPTIMAL:
            return status, None
        return status, self.x[: self.n].copy()

    def resolve(self, lb, ub, basis: _Basis, deadline=None) -> tuple[SolverStatus, np.ndarray | None]:
        """Warm start from `basis` after changing the structural bounds to lb, ub."""
        self.budget = self.iterations + self.limit
        self.lb[: self.n] = lb
        self.ub[: self.n] = ub
        self.basic = basis.basic.astype(np.int64)
        self.is_basic[:] = False
        self.is_basic[self.basic] = True
        self.upper = basis.upper.copy()
        nonbasic = ~self.is_basic
        self.x[nonbasic] = np.where(self.upper[nonbasic], self.ub[nonbasic], self.lb[nonbasic])
        self._refactor()

        status = self._dual(self.cost, deadline)
        if status is SolverStatus.OPTIMAL:
            status = self._primal(self.cost, deadline)
        if status is not SolverStatus.OPTIMAL:
            return status, None
        return status, self.x[: self.n].copy()

    def basis(self) -> _Basis:
        return _Basis(self.basic.astype(np.int32), self.upper.copy())


def solve_lp(problem: MilpProblem, config: SolverConfig | None = None, deadline: float | None = None) -> MilpSolution:
    """Solve the LP relaxation of `problem` (integrality ignored)."""
    config = config or SolverConfig()
    simplex = _BoundedSimplex(problem, config)
    status, x = simplex.solve(deadline)
    if x is None:
        return MilpSolution(status, lp_iterations=simplex.iterations)
    x = np.clip(x, problem.lb, problem.ub)
    objective = problem.objective(x)
    return MilpSolution(status, x, objective, 0, simplex.iterations, objective)


def _branch_groups(problem: MilpProblem, priority) -> list[np.ndarray]:
    first = sorted({int(j) for j in priority})
    if not set(first) <= set(problem.integer_vars):
        raise InvalidArgument("branching priority may only name integer variables")
    rest = sorted(set(problem.integer_vars) - set(first))
    return [np.asarray(group, dtype=np.int64) for group in (first, rest) if group]


def _most_fractional(x, groups, tol_int):
    """Most fractional integer variable of the first group that has one; lowest index on ties."""
    for group in groups:
        values = x[group]
        distance = np.abs(values - np.round(values))
        k = int(np.argmax(distance))
        if distance[k] > tol_int:
            return int(group[k])
    return None


@dataclass
class _Incumbent:
    problem: MilpProblem
    config: SolverConfig
    x: np.ndarray | None = None
    objective: float = math.inf

    def _feasible_point(self, x):
        """x with integer variables rounded, or x itself if rounding breaks a row."""
        rounded = x.copy()
        if self.problem.integer_vars:
            integers = list(self.problem.integer_vars)
            rounded[integers] = np.round(rounded[integers])
        for point in (rounded, x):
            violation, integrality = check_feasibility(self.problem, point)
            if violation <= self.config.tol_feas and integrality <= self.config.tol_int:
                return point, violation, integrality
        return None, violation, integrality

    def offer(self, x, source: str) -> bool:
        """Accept x when feasible and better, or equally good and lexicographically smaller."""
        if x is None:
            return False
        x, violation, integrality = self._feasible_point(np.array(x, dtype=float).reshape(-1))
        if x is None:
            logger.debug("rejected %s candidate: violation %.3g, integrality %.3g", source, violation, integrality)
            return False
        objective = self.problem.objective(x)
        better = objective < self.objective - self.config.tol_gap
        tie = abs(objective - self.objective) <= self.config.tol_gap and tuple(x) < tuple(self.x)
        if better or tie:
            self.x, self.objective = x.copy(), objective
            logger.debug("new incumbent from %s: %.12g", source, objective)
            return True
        return False


@dataclass(order=True)
class _Node:
    bound: float
    depth_key: int
    seq: int
    lb: np.ndarray = field(compare=False)
    ub: np.ndarray = field(compare=False)
    x: np.ndarray = field(compare=False)
    basis: _Basis = field(compare=False)


def solve_milp(problem: MilpProblem, config: SolverConfig | None = None, x0=None, heuristic=None, priority=()) -> MilpSolution:
    """Best-first branch-and-bound.

    Nodes are ordered by (LP bound, -depth, creation order). Branching picks
    the most fractional integer variable, lowest index on ties; variables
    listed in `priority` are branched on before all others. `x0` is an
    optional feasible start; `heuristic(x_lp)` may return a candidate point
    at the root and every `heuristic_frequency` nodes. Candidates only become
    incumbents after the feasibility and integrality check. Children are
    solved from their parent's final basis.
    """
    config = config or SolverConfig()
    deadline = None if config.time_limit is None else time.monotonic() + config.time_limit
    incumbent = _Incumbent(problem, config)
    if x0 is not None and not incumbent.offer(x0, "x0"):
        logger.warning("ignoring infeasible starting point")
    groups = _branch_groups(problem, priority)

    simplex = _BoundedSimplex(problem, config)
    nodes, seq, processed = 0, 0, 0
    heap: list[_Node] = []

    def evaluate(lb, ub, basis=None):
        nonlocal nodes
        nodes += 1
        if basis is None:
            status, x = simplex.solve(deadline)
        else:
            status, x = simplex.resolve(lb, ub, basis, deadline)
        if x is None:
            return status, None, math.nan, None
        x = np.clip(x, lb, ub)
        return status, x, problem.objective(x), simplex.basis()

    status, x, objective, basis = evaluate(problem.lb, problem.ub)
    if status is not SolverStatus.OPTIMAL:
        if status is SolverStatus.INFEASIBLE or incumbent.x is None:
            return MilpSolution(status, nodes_explored=nodes, lp_iterations=simplex.iterations)
        return MilpSolution(status, incumbent.x, incumbent.objective, nodes, simplex.iterations, -math.inf)
    heapq.heappush(heap, _Node(objective, 0, seq, problem.lb.copy(), problem.ub.copy(), x, basis))

    status = SolverStatus.OPTIMAL
    while heap:
        node = heap[0]
        if node.bound >= incumbent.objective - config.tol_gap:
            # best-first: every remaining node is dominated
            heap.clear()
            break
        if nodes >= config.node_limit:
            status = SolverStatus.NODE_LIMIT
            break
        if deadline is not None and time.monotonic() > deadline:
            status = SolverStatus.TIME_LIMIT
            break
        heapq.heappop(heap)
        processed += 1
        if processed % 1000 == 0:
            logger.debug("branch-and-bound: %d nodes, incumbent %.12g, bound %.12g", nodes, incumbent.objective, node.bound)

        if heuristic is not None and (processed - 1) % config.heuristic_frequency == 0:
            incumbent.offer(heuristic(node.x), "heuristic")

        j = _most_fractional(node.x, groups, config.tol_int)
        if j is None:
            incumbent.offer(node.x, "relaxation")
            continue

        depth = -node.depth_key + 1
        value = node.x[j]
        down_ub = node.ub.copy()
        down_ub[j] = math.floor(value)
        up_lb = node.lb.copy()
        up_lb[j] = math.ceil(value)
        for lb, ub in ((node.lb, down_ub), (up_lb, node.ub)):
            child_status, child_x, child_objective, child_basis = evaluate(lb, ub, node.basis)
            if child_status.is_limit:
                # the node stays open so the reported bound remains valid
                status = child_status
                heapq.heappush(heap, node)
                break
            if child_status is not SolverStatus.OPTIMAL:
                continue
            if child_objective < incumbent.objective - config.tol_gap:
                seq += 1
                heapq.heappush(heap, _Node(child_objective, -depth, seq, lb, ub, child_x, child_basis))
        if status is not SolverStatus.OPTIMAL:
            break

    bound = min([node.bound for node in heap] + [incumbent.objective])
    logger.info(
        "branch-and-bound finished: status=%s nodes=%d lp_iterations=%d objective=%.12g",
        status.value, nodes, simplex.iterations, incumbent.objective,
    )
    if incumbent.x is None:
        if status is SolverStatus.OPTIMAL:
            status = SolverStatus.INFEASIBLE
        return MilpSolution(status, nodes_explored=nodes, lp_iterations=simplex.iterations, bound=bound)
    if status is SolverStatus.OPTIMAL:
        bound = incumbent.objective
    return MilpSolution(status, incumbent.x, incumbent.objective, nodes, simplex.iterations, bound)

def dump_problem(problem: MilpProblem, stream):
    """Write the line-oriented text form: header, sparse triplets, bounds, integer list."""
    A_ub, A_eq = problem.A_ub.tocoo(), problem.A_eq.tocoo()
    stream.write(f"milp {problem.n_vars} {problem.n_ub} {problem.n_eq} {A_ub.nnz} {A_eq.nnz}\n")
    for j in np.flatnonzero(problem.c):
        stream.write(f"c {j} {float(problem.c[j])!r}\n")
    for i, j, v in zip(A_ub.row, A_ub.col, A_ub.data):
        stream.write(f"a {i} {j} {float(v)!r}\n")
    for i in np.flatnonzero(problem.b_ub):
        stream.write(f"b {i} {float(problem.b_ub[i])!r}\n")
    for i, j, v in zip(A_eq.row, A_eq.col, A_eq.data):
        stream.write(f"e {i} {j} {float(v)!r}\n")
    for i in np.flatnonzero(problem.b_eq):
        stream.write(f"f {i} {float(problem.b_eq[i])!r}\n")
    for j in range(problem.n_vars):
        stream.write(f"bound {j} {float(problem.lb[j])!r} {float(problem.ub[j])!r}\n")
    stream.write("int" + "".join(f" {j}" for j in problem.integer_vars) + "\n")


def load_problem(stream) -> MilpProblem:
    """Parse the format written by dump_problem; '#' lines are comments."""
    lines = [line.split() for line in stream if line.strip() and not line.lstrip().startswith("#")]
    if not lines or lines[0][0] != "milp" or len(lines[0]) != 6:
        raise InputFormatError("problem dump must start with 'milp <n> <m_ub> <m_eq> <nnz_ub> <nnz_eq>'")
    try:
        n, m_ub, m_eq = (int(v) for v in lines[0][1:4])
        c, b_ub, b_eq = np.zeros(n), np.zeros(m_ub), np.zeros(m_eq)
        lb, ub = np.zeros(n), np.zeros(n)
        ub_triplets, eq_triplets, integer_vars = [], [], []
        for number, parts in enumerate(lines[1:], start=2):
            kind = parts[0]
            if kind == "c":
                c[int(parts[1])] = float(parts[2])
            elif kind == "a":
                ub_triplets.append((int(parts[1]), int(parts[2]), float(parts[3])))
            elif kind == "b":
                b_ub[int(parts[1])] = float(parts[2])
            elif kind == "e":
                eq_triplets.append((int(parts[1]), int(parts[2]), float(parts[3])))
            elif kind == "f":
                b_eq[int(parts[1])] = float(parts[2])
            elif kind == "bound":
                j = int(parts[1])
                lb[j], ub[j] = float(parts[2]), float(parts[3])
            elif kind == "int":
                integer_vars.extend(int(v) for v in parts[1:])
            else:
                raise InputFormatError(f"unknown record {kind!r} on line {number}")
    except (IndexError, ValueError) as exc:
        raise InputFormatError(f"malformed problem dump: {exc}")

    def triplets(entries, rows):
        if not entries:
            return sp.csr_matrix((rows, n))
        i, j, v = zip(*entries)
        return sp.csr_matrix((v, (i, j)), shape=(rows, n))

    return MilpProblem(c, triplets(ub_triplets, m_ub), b_ub, triplets(eq_triplets, m_eq), b_eq, lb, ub, integer_vars)
