"""
Exhaustive enumeration oracle for Potts models.

Computes every state energy, the ground set and band gap, Boltzmann statistics,
the negative log-likelihood (NLL) of a data set and its theorem bounds, and a
projected gradient descent NLL trainer used as the likelihood baseline.

Everything here is exact: the state space is enumerated in full, so the
module is limited to small graphs (N_TS <= MAX_STATES by default).
"""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from scripts.errors import DegenerateGap, EmptyDataSet, InvalidArgument, InvalidState, TooLarge
from scripts.potts import ParamBounds, Params, PottsModel, check_bounds, check_params, decode, feature_matrix

logger = logging.getLogger(__name__)

MAX_STATES = 2 ** 24
CHUNK_SIZE = 2 ** 16
TOL_DEGENERACY = 1e-9

DEFAULT_BETA_MIN = 1e-2
DEFAULT_BETA_MAX = 1e2
DEFAULT_BETA_POINTS = 64

DEFAULT_TRAIN_STEPS = 5000
DEFAULT_LEARNING_RATE = 0.5
TRAIN_GRADIENT_TOL = 1e-9
MAX_HALVINGS = 50

CSV_HEADER = ["beta", "eta", "xi_upper", "eta_inf"]


@dataclass(frozen=True, eq=False)
class Spectrum:
    """All N_TS energies and the derived ground set, first excited energy and band gap."""

    energies: np.ndarray
    E0: float
    E1: float
    delta_E: float
    ground: tuple
    n_excited: int
    degenerate: bool
    tol: float

    @property
    def n_states(self) -> int:
        return int(self.energies.size)

    @property
    def n_ground(self) -> int:
        return len(self.ground)

    @property
    def excited_gaps(self) -> np.ndarray:
        """E(S) - E0 for every excited state, in StateIndex order."""
        mask = np.ones(self.n_states, dtype=bool)
        mask[list(self.ground)] = False
        return self.energies[mask] - self.E0


@dataclass
class TheoremReport:
    """Grid check of the band-gap theorem for data equal to the ground set."""

    betas: list
    excess: list
    monotone: bool
    lower_bound: bool
    upper_bound: bool
    beta_star: dict = field(default_factory=dict)
    within_epsilon: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.monotone and self.lower_bound and self.upper_bound and all(self.within_epsilon.values())


@dataclass(frozen=True)
class CurveRow:
    beta: float
    eta: float
    xi_upper: float
    eta_inf: float


def _check_budget(model: PottsModel, max_states: int):
    if model.n_states > max_states:
        raise TooLarge(
            f"{model.n_labels}^{model.n_vertices} = {model.n_states} states exceed the "
            f"enumeration budget of {max_states}"
        )


def state_energies(model: PottsModel, params: Params, threads: int = 1, max_states: int = MAX_STATES) -> np.ndarray:
    """Energies of all states in StateIndex order.

    The index range is cut into fixed CHUNK_SIZE blocks and the blocks are
    concatenated in order, so the result does not depend on `threads`.
    """
    check_params(model, params)
    _check_budget(model, max_states)
    theta = params.as_vector()
    starts = range(0, model.n_states, CHUNK_SIZE)

    def block(start):
        indices = np.arange(start, min(start + CHUNK_SIZE, model.n_states), dtype=np.int64)
        return feature_matrix(model, indices) @ theta

    if threads > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            blocks = list(pool.map(block, starts))
    else:
        blocks = [block(start) for start in starts]
    return np.concatenate(blocks)


def spectrum_from_energies(energies) -> Spectrum:
    energies = np.array(energies, dtype=float)
    energies.setflags(write=False)
    E0 = float(energies.min())
    tol = TOL_DEGENERACY * max(1.0, abs(E0))
    is_ground = energies - E0 <= tol
    ground = tuple(int(i) for i in np.flatnonzero(is_ground))
    n_excited = int(energies.size - len(ground))
    if n_excited == 0:
        # fully degenerate: no excited state, gap defined as 0 and flagged
        return Spectrum(energies, E0, E0, 0.0, ground, 0, True, tol)
    E1 = float(energies[~is_ground].min())
    return Spectrum(energies, E0, E1, E1 - E0, ground, n_excited, False, tol)


def compute_spectrum(model: PottsModel, params: Params, threads: int = 1, max_states: int = MAX_STATES) -> Spectrum:
    """Enumerate all states and group the ground set with the degeneracy tolerance."""
    return spectrum_from_energies(state_energies(model, params, threads=threads, max_states=max_states))


def _check_beta(beta):
    if not beta >= 0 or math.isinf(beta):
        raise InvalidArgument(f"beta must be a finite non-negative number, got {beta!r}")


def data_indices(n_states: int, data) -> np.ndarray:
    """Sorted unique state indices of a data set."""
    indices = sorted({int(i) for i in data})
    if not indices:
        raise EmptyDataSet("data set is empty")
    if indices[0] < 0 or indices[-1] >= n_states:
        raise InvalidState(f"data state index outside 0..{n_states - 1}")
    return np.asarray(indices, dtype=np.int64)


def log_partition_function(spectrum: Spectrum, beta: float) -> float:
    """log Z = -beta E0 + log sum exp(-beta (E - E0))."""
    _check_beta(beta)
    return float(-beta * spectrum.E0 + logsumexp(-beta * (spectrum.energies - spectrum.E0)))


def partition_function(spectrum: Spectrum, beta: float) -> float:
    return math.exp(log_partition_function(spectrum, beta))


def log_probability(spectrum: Spectrum, state_index: int, beta: float) -> float:
    if not 0 <= state_index < spectrum.n_states:
        raise InvalidState(f"state index {state_index} outside 0..{spectrum.n_states - 1}")
    return float(-beta * spectrum.energies[state_index] - log_partition_function(spectrum, beta))


def probability(spectrum: Spectrum, state_index: int, beta: float) -> float:
    """Boltzmann probability exp(-beta E) / Z."""
    return math.exp(log_probability(spectrum, state_index, beta))


def probabilities(spectrum: Spectrum, beta: float) -> np.ndarray:
    log_z = log_partition_function(spectrum, beta)
    return np.exp(-beta * spectrum.energies - log_z)


def nll(spectrum: Spectrum, data, beta: float) -> float:
    """eta = -sum_{S in data} log p(S), evaluated in log space."""
    indices = data_indices(spectrum.n_states, data)
    log_z = log_partition_function(spectrum, beta)
    return float(beta * spectrum.energies[indices].sum() + indices.size * log_z)


def nll_limits(n_ds: int, n_ts: int, n_gs: int) -> tuple[float, float]:
    """High- and low-temperature limits (N_DS log N_TS, N_DS log N_GS)."""
    if n_ds < 1 or n_ts < 1 or n_gs < 1:
        raise InvalidArgument("state counts must be positive")
    return n_ds * math.log(n_ts), n_ds * math.log(n_gs)


def nll_upper_bound(n_gs: int, n_es: int, delta_E: float, beta: float) -> float:
    """xi(beta) = N_GS log(N_GS + N_ES exp(-beta dE))."""
    if n_gs < 1 or n_es < 0:
        raise InvalidArgument(f"need n_gs >= 1 and n_es >= 0, got {n_gs}, {n_es}")
    _check_beta(beta)
    if not delta_E > 0:
        raise DegenerateGap(f"band gap must be positive, got {delta_E}")
    return n_gs * math.log(n_gs + n_es * math.exp(-beta * delta_E))


def beta_star(n_gs: int, n_es: int, delta_E: float, epsilon: float) -> float:
    """Inverse temperature beyond which eta is within epsilon of N_GS log N_GS."""
    if not delta_E > 0:
        raise InvalidArgument(f"band gap must be positive, got {delta_E}")
    if not epsilon > 0:
        raise InvalidArgument(f"epsilon must be positive, got {epsilon}")
    if n_gs < 1 or n_es < 1:
        raise InvalidArgument(f"need n_gs >= 1 and n_es >= 1, got {n_gs}, {n_es}")
    return (math.log(n_es / n_gs) - math.log(math.expm1(epsilon / n_gs))) / delta_E


def expected_energy(spectrum: Spectrum, beta: float) -> float:
    return float(probabilities(spectrum, beta) @ spectrum.energies)


def nll_beta_derivative(spectrum: Spectrum, beta: float) -> float:
    """d eta / d beta = N_GS (E0 - E_p[E]) when the data set is the ground set."""
    return spectrum.n_ground * (spectrum.E0 - expected_energy(spectrum, beta))


def nll_excess(spectrum: Spectrum, beta: float) -> float:
    """eta - N_GS log N_GS for data = ground set.

    Ground energies are taken as exactly E0 and the sum over excited states goes
    through log1p, so the value stays positive long after eta itself has
    rounded to its floor.
    """
    _check_beta(beta)
    weights = np.exp(-beta * spectrum.excited_gaps)
    return spectrum.n_ground * math.log1p(float(weights.sum()) / spectrum.n_ground)


def check_theorem(spectrum: Spectrum, betas, epsilons=(0.1, 1.0), slack: float = 1e-10) -> TheoremReport:
    """Check monotone decrease, the two-sided bound and the beta* criterion on a grid."""
    if spectrum.degenerate or not spectrum.delta_E > 0:
        raise DegenerateGap("theorem bounds need a positive band gap")
    betas = sorted(float(b) for b in betas)
    n_gs, n_es, gap = spectrum.n_ground, spectrum.n_excited, spectrum.delta_E
    excess = [nll_excess(spectrum, b) for b in betas]
    bound_excess = [n_gs * math.log1p(n_es * math.exp(-b * gap) / n_gs) for b in betas]

    tiny = np.finfo(float).tiny
    monotone = all(later < earlier or earlier <= tiny for earlier, later in zip(excess, excess[1:]))
    lower = all(e > -slack for e in excess)
    upper = all(e <= xi + slack for e, xi in zip(excess, bound_excess))

    stars, within = {}, {}
    for eps in epsilons:
        stars[eps] = beta_star(n_gs, n_es, gap, eps)
        within[eps] = all(e < eps for b, e in zip(betas, excess) if b > stars[eps])

    return TheoremReport(betas, excess, monotone, lower, upper, stars, within)


def beta_grid(
    beta_min: float = DEFAULT_BETA_MIN,
    beta_max: float = DEFAULT_BETA_MAX,
    points: int = DEFAULT_BETA_POINTS,
    scale: str = "log",
) -> np.ndarray:
    if points < 2:
        raise InvalidArgument(f"a beta grid needs at least 2 points, got {points}")
    if not beta_max > beta_min:
        raise InvalidArgument(f"beta_max must exceed beta_min, got [{beta_min}, {beta_max}]")
    if scale == "log":
        if not beta_min > 0:
            raise InvalidArgument("a log-spaced beta grid needs beta_min > 0")
        return np.logspace(math.log10(beta_min), math.log10(beta_max), points)
    if scale == "linear":
        if beta_min < 0:
            raise InvalidArgument("beta_min must be non-negative")
        return np.linspace(beta_min, beta_max, points)
    raise InvalidArgument(f"unknown beta grid scale {scale!r}")


def nll_curve(spectrum: Spectrum, data, betas) -> list[CurveRow]:
    """Rows (beta, eta, xi, eta_inf) of the NLL curve and its bounds."""
    indices = data_indices(spectrum.n_states, data)
    ground = set(spectrum.ground)
    if set(indices.tolist()) <= ground:
        eta_inf = indices.size * math.log(spectrum.n_ground)
    else:
        eta_inf = math.inf
    rows = []
    for beta in betas:
        beta = float(beta)
        xi = nll_upper_bound(spectrum.n_ground, spectrum.n_excited, spectrum.delta_E, beta)
        rows.append(CurveRow(beta, nll(spectrum, indices, beta), xi, eta_inf))
    return rows


def format_float(value: float) -> str:
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return f"{value:.12g}"


def write_curve_csv(rows, stream):
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for row in rows:
        writer.writerow([format_float(row.beta), format_float(row.eta), format_float(row.xi_upper), format_float(row.eta_inf)])


def spectrum_summary(model: PottsModel, spectrum: Spectrum) -> dict:
    return {
        "E0": spectrum.E0,
        "E1": spectrum.E1,
        "delta_E": spectrum.delta_E,
        "n_gs": spectrum.n_ground,
        "n_es": spectrum.n_excited,
        "degenerate": spectrum.degenerate,
        "ground_states": [list(decode(i, model)) for i in spectrum.ground],
    }


class _NllObjective:
    """eta(theta) and its gradient at fixed beta over a precomputed feature matrix."""

    def __init__(self, model: PottsModel, data, beta: float, max_states: int = MAX_STATES):
        _check_budget(model, max_states)
        _check_beta(beta)
        self.features = feature_matrix(model)
        self.indices = data_indices(model.n_states, data)
        self.data_features = self.features[self.indices].sum(axis=0)
        self.beta = float(beta)

    def _log_z(self, energies):
        return float(logsumexp(-self.beta * energies))

    def value(self, theta) -> float:
        energies = self.features @ theta
        return float(self.beta * energies[self.indices].sum() + self.indices.size * self._log_z(energies))

    def gradient(self, theta) -> np.ndarray:
        energies = self.features @ theta
        weights = np.exp(-self.beta * energies - self._log_z(energies))
        expected = weights @ self.features
        return self.beta * (self.data_features - self.indices.size * expected)


def nll_gradient(model: PottsModel, params: Params, data, beta: float) -> np.ndarray:
    """d eta / d theta_j = beta sum_{S in data} (eps_j(S) - E_p[eps_j])."""
    check_params(model, params)
    return _NllObjective(model, data, beta).gradient(params.as_vector())


def projected_gradient_norm(model: PottsModel, bounds: ParamBounds, params: Params, data, beta: float) -> float:
    """Norm of theta - clip(theta - grad); zero exactly at a box-constrained stationary point."""
    theta = params.as_vector()
    step = bounds.clip(theta - nll_gradient(model, params, data, beta))
    return float(np.linalg.norm(theta - step))


def train_nll(
    model: PottsModel,
    bounds: ParamBounds,
    data,
    beta: float = 1.0,
    steps: int = DEFAULT_TRAIN_STEPS,
    learning_rate: float = DEFAULT_LEARNING_RATE,
) -> Params:
    """Projected gradient descent on eta at fixed beta, starting from theta = 0.

    Each step starts from `learning_rate` and halves it until eta does not
    increase, so the sequence of eta values is non-increasing.
    """
    check_bounds(model, bounds)
    if steps < 0 or not learning_rate > 0:
        raise InvalidArgument("steps must be >= 0 and learning_rate > 0")
    objective = _NllObjective(model, data, beta)
    theta = bounds.clip(np.zeros(model.n_params))
    value = objective.value(theta)

    for step in range(steps):
        grad = objective.gradient(theta)
        if np.linalg.norm(theta - bounds.clip(theta - grad)) < TRAIN_GRADIENT_TOL:
            logger.debug("NLL training converged after %d steps", step)
            break
        rate = learning_rate
        for _ in range(MAX_HALVINGS):
            trial = bounds.clip(theta - rate * grad)
            trial_value = objective.value(trial)
            if trial_value <= value:
                break
            rate /= 2
        else:
            logger.debug("NLL line search stalled at step %d", step)
            break
        if np.array_equal(trial, theta):
            break
        theta, value = trial, trial_value

    logger.info("NLL training finished: eta=%.12g", value)
    return Params.from_vector(model, theta)
