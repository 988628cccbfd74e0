"""
Band-gap MILP formulations and estimate validation.

DAS (prescribed data set as the exact ground set), variables x = [theta, E1, m]:

    min  eps(S_ref) theta - E1
    s.t. eps(S_i) theta - E1 + M m_i <= M      for every excited state i
        -eps(S_i) theta + E1         <= 0
         sum m = 1
         (eps(S_d) - eps(S_ref)) theta = 0    for every other data state d

GSM (prescribed ground-state multiplicity), x = [theta, E0, E1, l, m]:

    min  E0 - E1
    s.t. -eps_i theta + E0 <= 0
          eps_i theta - E0 + M l_i <= M
         -eps_i theta + E1 - M l_i <= 0
          eps_i theta - E1 + M m_i <= M
          l_i + m_i <= 1                       for every state i
          sum l = n_gs,  sum m = 1

Every estimate is re-checked against the exhaustive spectrum before it is
accepted.
"""

from __future__ import annotations

import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from scripts.errors import (
    DegenerateDataSet,
    EmptyDataSet,
    InputFormatError,
    InvalidArgument,
    InvalidDataSet,
    TooLarge,
)
from scripts.milp import MilpProblem, MilpSolution, SolverConfig, SolverStatus, solve_lp, solve_milp
from scripts.potts import (
    ParamBounds,
    Params,
    PottsModel,
    check_bounds,
    decode,
    encode,
    feature_matrix,
    params_from_dict,
    params_to_dict,
    parse_state,
)
from scripts.spectrum import MAX_STATES, Spectrum, TheoremReport, check_theorem, compute_spectrum

logger = logging.getLogger(__name__)

ACCEPT_TOL = 1e-6
BRUTEFORCE_CAP = 10 ** 5
HEURISTIC_ROUNDS = 10
# gaps closer than this count as equal when ranking candidate ground sets
TIE_TOL = 1e-9


def big_m(model: PottsModel, bounds: ParamBounds) -> float:
    """M = max|U| sum_i (|H_i^max| + |H_i^min|) + max|V| sum_k (|J_k^max| + |J_k^min|)."""
    check_bounds(model, bounds)
    field_span = float(np.sum(np.abs(bounds.H_max) + np.abs(bounds.H_min)))
    coupling_span = float(np.sum(np.abs(bounds.J_max) + np.abs(bounds.J_min)))
    return float(np.max(np.abs(model.U))) * field_span + float(np.max(np.abs(model.V))) * coupling_span


def _all_features(model: PottsModel) -> np.ndarray:
    if model.n_states > MAX_STATES:
        raise TooLarge(f"{model.n_states} states exceed the enumeration budget of {MAX_STATES}")
    return feature_matrix(model)


def _data_indices(model: PottsModel, data) -> list[int]:
    """StateIndex of each data state, in the given order."""
    states = list(data)
    if not states:
        raise EmptyDataSet("data set is empty")
    indices = [encode(state, model) for state in states]
    if len(set(indices)) != len(indices):
        duplicates = sorted({decode(i, model) for i in indices if indices.count(i) > 1})
        raise InvalidDataSet(f"data set repeats state(s) {duplicates}")
    if len(indices) >= model.n_states:
        raise DegenerateDataSet("data set covers every state; there is no excited state to separate")
    return indices


@dataclass(frozen=True, eq=False)
class DasProblem:
    """Box-constrained DAS problem; `relaxed` drops m, its rows and sum m = 1."""

    problem: MilpProblem
    model: PottsModel
    bounds: ParamBounds
    data: tuple
    excited: tuple
    M: float
    relaxed: bool = False

    @property
    def reference(self) -> int:
        return self.data[0]

    @property
    def n_params(self) -> int:
        return self.model.n_params

    def theta(self, x) -> np.ndarray:
        return np.asarray(x)[: self.n_params]

    def lift(self, theta) -> np.ndarray:
        """Feasible integer point of the full DAS problem for a given theta.

        E1 is set to the lowest excited energy and m selects the first
        excited state attaining it.
        """
        theta = np.asarray(theta, dtype=float)
        energies = _all_features(self.model)[list(self.excited)] @ theta
        k = int(np.argmin(energies))
        m = np.zeros(len(self.excited))
        m[k] = 1.0
        return np.concatenate([theta, [energies[k]], m])


def _das_blocks(model: PottsModel, bounds: ParamBounds, data):
    check_bounds(model, bounds)
    indices = _data_indices(model, data)
    features = _all_features(model)
    in_data = np.zeros(model.n_states, dtype=bool)
    in_data[indices] = True
    excited = np.flatnonzero(~in_data)
    reference = features[indices[0]]
    equalities = features[indices[1:]] - reference
    return indices, excited, features[excited], reference, equalities


def build_das(model: PottsModel, bounds: ParamBounds, data) -> DasProblem:
    """Full DAS MILP: N_V + N_C + 1 + N_ES variables, 2 N_ES inequalities, N_DS equalities."""
    indices, excited, excited_features, reference, equalities = _das_blocks(model, bounds, data)
    M = big_m(model, bounds)
    n_p, n_es = model.n_params, excited.size
    ones = np.ones((n_es, 1))
    identity = sp.identity(n_es, format="csr")

    selection = sp.hstack([sp.csr_matrix(excited_features), sp.csr_matrix(-ones), M * identity])
    upper = sp.hstack([sp.csr_matrix(-excited_features), sp.csr_matrix(ones), sp.csr_matrix((n_es, n_es))])
    A_ub = sp.vstack([selection, upper], format="csr")
    b_ub = np.concatenate([np.full(n_es, M), np.zeros(n_es)])

    pick_one = np.concatenate([np.zeros(n_p + 1), np.ones(n_es)])
    tied = np.hstack([equalities, np.zeros((equalities.shape[0], 1 + n_es))])
    A_eq = sp.csr_matrix(np.vstack([pick_one, tied]))
    b_eq = np.concatenate([[1.0], np.zeros(equalities.shape[0])])

    c = np.concatenate([reference, [-1.0], np.zeros(n_es)])
    lb = np.concatenate([bounds.lower(), [-M], np.zeros(n_es)])
    ub = np.concatenate([bounds.upper(), [M], np.ones(n_es)])
    integer_vars = tuple(range(n_p + 1, n_p + 1 + n_es))

    problem = MilpProblem(c, A_ub, b_ub, A_eq, b_eq, lb, ub, integer_vars)
    logger.debug("DAS problem: %d variables, %d inequalities, %d equalities", problem.n_vars, problem.n_ub, problem.n_eq)
    return DasProblem(problem, model, bounds, tuple(indices), tuple(int(i) for i in excited), M)


def build_das_relaxed(model: PottsModel, bounds: ParamBounds, data) -> DasProblem:
    """DAS with the selection binaries removed; E1 is only bounded from above."""
    indices, excited, excited_features, reference, equalities = _das_blocks(model, bounds, data)
    M = big_m(model, bounds)
    n_es = excited.size

    A_ub = sp.hstack([sp.csr_matrix(-excited_features), sp.csr_matrix(np.ones((n_es, 1)))], format="csr")
    A_eq = sp.csr_matrix(np.hstack([equalities, np.zeros((equalities.shape[0], 1))]))
    c = np.concatenate([reference, [-1.0]])
    lb = np.concatenate([bounds.lower(), [-M]])
    ub = np.concatenate([bounds.upper(), [M]])

    problem = MilpProblem(c, A_ub, np.zeros(n_es), A_eq, np.zeros(equalities.shape[0]), lb, ub)
    return DasProblem(problem, model, bounds, tuple(indices), tuple(int(i) for i in excited), M, relaxed=True)


@dataclass(frozen=True, eq=False)
class GsmProblem:
    problem: MilpProblem
    model: PottsModel
    bounds: ParamBounds
    n_gs: int
    M: float

    def theta(self, x) -> np.ndarray:
        return np.asarray(x)[: self.model.n_params]

    @property
    def ground_columns(self) -> range:
        """Columns of the l block."""
        start = self.model.n_params + 2
        return range(start, start + self.model.n_states)

    def lift(self, theta, ground) -> np.ndarray | None:
        """GSM point for theta with `ground` as the l block; None unless ground is strictly lowest."""
        theta = np.asarray(theta, dtype=float)
        energies = _all_features(self.model) @ theta
        n_ts = self.model.n_states
        in_ground = np.zeros(n_ts, dtype=bool)
        in_ground[list(ground)] = True
        E0 = float(energies[in_ground].min())
        excited = np.flatnonzero(~in_ground)
        k = int(excited[np.argmin(energies[excited])])
        E1 = float(energies[k])
        if E1 - E0 <= 0 or float(energies[in_ground].max()) > E0 + 1e-9 * max(1.0, abs(E0)):
            return None
        m = np.zeros(n_ts)
        m[k] = 1.0
        return np.concatenate([theta, [E0, E1], in_ground.astype(float), m])


def build_gsm(model: PottsModel, bounds: ParamBounds, n_gs: int) -> GsmProblem:
    """GSM MILP: N_V + N_C + 2 + 2 N_TS variables, 5 N_TS inequalities, 2 equalities."""
    check_bounds(model, bounds)
    n_ts = model.n_states
    if isinstance(n_gs, bool) or not isinstance(n_gs, (int, np.integer)) or not 1 <= n_gs <= n_ts - 1:
        raise InvalidArgument(f"n_gs must be an integer in 1..{n_ts - 1}, got {n_gs!r}")
    features = sp.csr_matrix(_all_features(model))
    M = big_m(model, bounds)
    n_p = model.n_params

    one = sp.csr_matrix(np.ones((n_ts, 1)))
    none = sp.csr_matrix((n_ts, 1))
    block = sp.csr_matrix((n_ts, n_ts))
    eye = sp.identity(n_ts, format="csr")

    # columns: theta | E0 | E1 | l | m
    A_ub = sp.vstack(
        [
            sp.hstack([-features, one, none, block, block]),
            sp.hstack([features, -one, none, M * eye, block]),
            sp.hstack([-features, none, one, -M * eye, block]),
            sp.hstack([features, none, -one, block, M * eye]),
            sp.hstack([sp.csr_matrix((n_ts, n_p)), none, none, eye, eye]),
        ],
        format="csr",
    )
    b_ub = np.concatenate([np.zeros(n_ts), np.full(n_ts, M), np.zeros(n_ts), np.full(n_ts, M), np.ones(n_ts)])

    A_eq = sp.csr_matrix(
        np.vstack(
            [
                np.concatenate([np.zeros(n_p + 2), np.ones(n_ts), np.zeros(n_ts)]),
                np.concatenate([np.zeros(n_p + 2), np.zeros(n_ts), np.ones(n_ts)]),
            ]
        )
    )
    b_eq = np.array([float(n_gs), 1.0])

    c = np.concatenate([np.zeros(n_p), [1.0, -1.0], np.zeros(2 * n_ts)])
    lb = np.concatenate([bounds.lower(), [-M, -M], np.zeros(2 * n_ts)])
    ub = np.concatenate([bounds.upper(), [M, M], np.ones(2 * n_ts)])
    integer_vars = tuple(range(n_p + 2, n_p + 2 + 2 * n_ts))

    problem = MilpProblem(c, A_ub, b_ub, A_eq, b_eq, lb, ub, integer_vars)
    logger.debug("GSM problem: %d variables, %d inequalities, %d equalities", problem.n_vars, problem.n_ub, problem.n_eq)
    return GsmProblem(problem, model, bounds, int(n_gs), M)


@dataclass
class EstimationResult:
    """Parameters found by an estimator together with their oracle-checked spectrum."""

    params: Params
    E0: float
    E1: float
    delta_E: float
    ground_states: tuple
    accepted: bool
    status: SolverStatus
    nodes_explored: int = 0
    lp_iterations: int = 0
    algorithm: str = "das"
    objective: float = math.nan
    n_gs: int = 0
    spectrum: Spectrum | None = None

    def theorem_report(self, betas, epsilons=(0.1, 1.0)) -> TheoremReport:
        if self.spectrum is None:
            raise InvalidArgument("result carries no spectrum")
        return check_theorem(self.spectrum, betas, epsilons)


def extract_and_validate(
    model: PottsModel,
    bounds: ParamBounds,
    solution: MilpSolution,
    data=None,
    n_gs: int | None = None,
    algorithm: str | None = None,
    threads: int = 1,
) -> EstimationResult:
    """Read theta from a solution and accept it only if the exhaustive spectrum agrees.

    DAS (`data` given): accepted iff the ground set equals the data set and the
    gap is positive. GSM (`n_gs` given): accepted iff there are exactly n_gs
    ground states and the gap is positive. Energies come from the oracle.
    """
    if (data is None) == (n_gs is None):
        raise InvalidArgument("give exactly one of data (DAS) or n_gs (GSM)")
    if solution.x is not None:
        params = Params.from_vector(model, bounds.clip(solution.x[: model.n_params]))
    else:
        params = Params.zeros(model)
    spectrum = compute_spectrum(model, params, threads=threads)

    positive = not spectrum.degenerate and spectrum.delta_E > ACCEPT_TOL
    if data is not None:
        expected = sorted(encode(state, model) for state in data)
        matches = list(spectrum.ground) == expected
        n_gs = len(expected)
        algorithm = algorithm or "das"
    else:
        matches = spectrum.n_ground == n_gs
        algorithm = algorithm or "gsm"
    accepted = solution.x is not None and positive and matches

    if accepted:
        logger.info("%s estimate accepted: delta_E=%.12g", algorithm, spectrum.delta_E)
    else:
        logger.info("%s estimate rejected (status %s, delta_E=%.3g)", algorithm, solution.status.value, spectrum.delta_E)

    return EstimationResult(
        params=params,
        E0=spectrum.E0,
        E1=spectrum.E1,
        delta_E=spectrum.delta_E,
        ground_states=spectrum.ground,
        accepted=accepted,
        status=solution.status,
        nodes_explored=solution.nodes_explored,
        lp_iterations=solution.lp_iterations,
        algorithm=algorithm,
        objective=solution.objective,
        n_gs=int(n_gs),
        spectrum=spectrum,
    )


def estimate_das(model: PottsModel, bounds: ParamBounds, data, config: SolverConfig | None = None, threads: int = 1) -> EstimationResult:
    """Build, solve and validate DAS; the tightness LP optimum seeds the search."""
    config = config or SolverConfig()
    das = build_das(model, bounds, data)
    relaxed = build_das_relaxed(model, bounds, data)
    start = solve_lp(relaxed.problem, config)
    x0 = das.lift(relaxed.theta(start.x)) if start.status is SolverStatus.OPTIMAL else None
    solution = solve_milp(das.problem, config, x0=x0)
    return extract_and_validate(model, bounds, solution, data=data, threads=threads)


class _GroundSetHeuristic:
    """Take the n_gs lowest states under the node's theta, solve their tightness LP, repeat to a fixed point."""

    def __init__(self, gsm: GsmProblem, config: SolverConfig):
        self.gsm = gsm
        self.config = config
        self.features = _all_features(gsm.model)
        self.tried = {}

    def _lowest(self, theta):
        energies = self.features @ theta
        return tuple(sorted(int(i) for i in np.argsort(energies, kind="stable")[: self.gsm.n_gs]))

    def _tightness(self, ground):
        if ground not in self.tried:
            states = [decode(i, self.gsm.model) for i in ground]
            relaxed = build_das_relaxed(self.gsm.model, self.gsm.bounds, states)
            solution = solve_lp(relaxed.problem, self.config)
            if solution.status is SolverStatus.OPTIMAL:
                self.tried[ground] = (-solution.objective, relaxed.theta(solution.x))
            else:
                self.tried[ground] = (-math.inf, None)
        return self.tried[ground]

    def __call__(self, x_lp):
        ground = self._lowest(self.gsm.theta(x_lp))
        best_gap, best = -math.inf, None
        for _ in range(HEURISTIC_ROUNDS):
            gap, theta = self._tightness(ground)
            if theta is None or gap <= best_gap:
                break
            best_gap, best = gap, (theta, ground)
            ground = self._lowest(theta)
        if best is None:
            return None
        return self.gsm.lift(*best)


def estimate_gsm(model: PottsModel, bounds: ParamBounds, n_gs: int, config: SolverConfig | None = None, threads: int = 1) -> EstimationResult:
    """Build, solve and validate GSM with the ground-set heuristic registered.

    The heuristic also runs once from theta = 0 before the root LP, so a run
    stopped by a limit still carries an incumbent. The l block is branched
    on before m.
    """
    config = config or SolverConfig()
    gsm = build_gsm(model, bounds, n_gs)
    heuristic = _GroundSetHeuristic(gsm, config)
    x0 = heuristic(np.zeros(gsm.problem.n_vars))
    solution = solve_milp(gsm.problem, config, x0=x0, heuristic=heuristic, priority=gsm.ground_columns)
    return extract_and_validate(model, bounds, solution, n_gs=n_gs, threads=threads)


def gsm_bruteforce(
    model: PottsModel,
    bounds: ParamBounds,
    n_gs: int,
    cap: int = BRUTEFORCE_CAP,
    config: SolverConfig | None = None,
    threads: int = 1,
) -> EstimationResult:
    """Exact GSM reference: the tightness LP of every size-n_gs candidate ground set.

    The best gap wins; ties go to the lexicographically smallest candidate.
    """
    check_bounds(model, bounds)
    n_ts = model.n_states
    if isinstance(n_gs, bool) or not isinstance(n_gs, (int, np.integer)) or not 1 <= n_gs <= n_ts - 1:
        raise InvalidArgument(f"n_gs must be an integer in 1..{n_ts - 1}, got {n_gs!r}")
    total = math.comb(n_ts, n_gs)
    if total > cap:
        raise TooLarge(f"{total} candidate ground sets exceed the brute-force cap of {cap}")
    config = config or SolverConfig()

    def evaluate(candidate):
        states = [decode(i, model) for i in candidate]
        relaxed = build_das_relaxed(model, bounds, states)
        solution = solve_lp(relaxed.problem, config)
        if solution.status is not SolverStatus.OPTIMAL:
            return -math.inf, solution
        return -solution.objective, solution

    candidates = list(itertools.combinations(range(n_ts), n_gs))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(evaluate, candidates))
    else:
        outcomes = [evaluate(candidate) for candidate in candidates]

    best = None
    for candidate, (gap, solution) in zip(candidates, outcomes):
        if best is None or gap > best[1] + TIE_TOL:
            best = (candidate, gap, solution)
    candidate, gap, solution = best
    logger.info("brute force over %d candidate ground sets: best gap %.12g at %s", total, gap, candidate)

    result = extract_and_validate(model, bounds, solution, n_gs=n_gs, algorithm="gsm-oracle", threads=threads)
    result.nodes_explored = total
    result.objective = -gap
    return result


def result_to_dict(result: EstimationResult, model: PottsModel) -> dict:
    return {
        "algorithm": result.algorithm,
        "params": params_to_dict(result.params),
        "E0": result.E0,
        "E1": result.E1,
        "delta_E": result.delta_E,
        "n_gs": result.n_gs,
        "ground_states": [list(decode(i, model)) for i in result.ground_states],
        "accepted": result.accepted,
        "solver": {
            "status": result.status.value,
            "objective": None if math.isnan(result.objective) else result.objective,
            "nodes_explored": result.nodes_explored,
            "lp_iterations": result.lp_iterations,
        },
    }


def result_from_dict(model: PottsModel, data, threads: int = 1) -> EstimationResult:
    """Parse a result object; the spectrum is recomputed from its parameters."""
    if not isinstance(data, dict):
        raise InputFormatError("result must be a JSON object")
    params = params_from_dict(model, data)
    if not isinstance(data.get("accepted"), bool):
        raise InputFormatError("result.accepted must be true or false")
    solver = data.get("solver", {})
    if not isinstance(solver, dict):
        raise InputFormatError("result.solver must be an object")
    try:
        status = SolverStatus(solver.get("status", SolverStatus.OPTIMAL.value))
    except ValueError:
        raise InputFormatError(f"result.solver.status {solver.get('status')!r} is unknown")
    ground = tuple(sorted(encode(parse_state(model, state), model) for state in data.get("ground_states", [])))
    spectrum = compute_spectrum(model, params, threads=threads)
    objective = solver.get("objective")
    return EstimationResult(
        params=params,
        E0=float(data.get("E0", spectrum.E0)),
        E1=float(data.get("E1", spectrum.E1)),
        delta_E=float(data.get("delta_E", spectrum.delta_E)),
        ground_states=ground or spectrum.ground,
        accepted=data["accepted"],
        status=status,
        nodes_explored=int(solver.get("nodes_explored", 0)),
        lp_iterations=int(solver.get("lp_iterations", 0)),
        algorithm=str(data.get("algorithm", "das")),
        objective=math.nan if objective is None else float(objective),
        n_gs=int(data.get("n_gs", spectrum.n_ground)),
        spectrum=spectrum,
    )
