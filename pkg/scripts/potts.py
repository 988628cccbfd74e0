"""
Potts energy model on a graph.

    E(S) = sum_i H_i U(s_i) + sum_k J_k V(s_pi1(k), s_pi2(k)) = eps(S) . theta

with theta = [H_1..H_NV, J_1..J_NC]. Labels are 1..N_L at the interface and
0..N_L-1 inside the vectorized helpers. State indices use a mixed-radix code
with vertex 1 least significant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from scripts.errors import InputFormatError, InvalidArgument, InvalidState, ModelMismatch
from scripts.graph import Graph, graph_from_dict, graph_to_dict

# ising label map: label 1 is spin +1, label 2 is spin -1
ISING_SPINS = (1, -1)

# a State is a tuple of 1-based labels, one per vertex
State = tuple


def _frozen_array(values, dtype=float):
    array = np.array(values, dtype=dtype)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class PottsModel:
    """Graph plus the fixed label energy tables U (N_L) and V (N_L x N_L)."""

    graph: Graph
    n_labels: int
    U: np.ndarray
    V: np.ndarray
    spins: tuple | None = None

    def __post_init__(self):
        if isinstance(self.n_labels, bool) or not isinstance(self.n_labels, (int, np.integer)) or self.n_labels < 2:
            raise InvalidArgument(f"n_labels must be an integer >= 2, got {self.n_labels!r}")
        U = _frozen_array(self.U)
        V = _frozen_array(self.V)
        if U.shape != (self.n_labels,):
            raise ModelMismatch(f"U must have {self.n_labels} entries, got shape {U.shape}")
        if V.shape != (self.n_labels, self.n_labels):
            raise ModelMismatch(f"V must be {self.n_labels}x{self.n_labels}, got shape {V.shape}")
        if not (np.all(np.isfinite(U)) and np.all(np.isfinite(V))):
            raise InvalidArgument("U and V must be finite")
        if not np.array_equal(V, V.T):
            raise InvalidArgument("V must be symmetric: V(a, b) = V(b, a)")
        if self.spins is not None and len(self.spins) != self.n_labels:
            raise ModelMismatch("spin map must name one spin per label")
        object.__setattr__(self, "U", U)
        object.__setattr__(self, "V", V)

    @property
    def n_vertices(self) -> int:
        return self.graph.n_vertices

    @property
    def n_edges(self) -> int:
        return self.graph.n_edges

    @property
    def n_params(self) -> int:
        return self.graph.n_vertices + self.graph.n_edges

    @property
    def n_states(self) -> int:
        return self.n_labels ** self.graph.n_vertices

    @property
    def is_ising(self) -> bool:
        return self.spins == ISING_SPINS


@dataclass(frozen=True, eq=False)
class Params:
    """Field strengths H (one per vertex) and interaction strengths J (one per edge)."""

    H: np.ndarray
    J: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "H", _frozen_array(self.H).reshape(-1))
        object.__setattr__(self, "J", _frozen_array(self.J).reshape(-1))

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.H, self.J])

    @classmethod
    def from_vector(cls, model: PottsModel, theta) -> "Params":
        theta = np.asarray(theta, dtype=float).reshape(-1)
        if theta.size != model.n_params:
            raise ModelMismatch(f"theta has {theta.size} entries, model needs {model.n_params}")
        return cls(theta[: model.n_vertices], theta[model.n_vertices:])

    @classmethod
    def zeros(cls, model: PottsModel) -> "Params":
        return cls(np.zeros(model.n_vertices), np.zeros(model.n_edges))

    def __eq__(self, other):
        if not isinstance(other, Params):
            return NotImplemented
        return np.array_equal(self.H, other.H) and np.array_equal(self.J, other.J)


@dataclass(frozen=True, eq=False)
class ParamBounds:
    """Box bounds H_min <= H <= H_max, J_min <= J <= J_max."""

    H_min: np.ndarray
    H_max: np.ndarray
    J_min: np.ndarray
    J_max: np.ndarray

    def __post_init__(self):
        for name in ("H_min", "H_max", "J_min", "J_max"):
            object.__setattr__(self, name, _frozen_array(getattr(self, name)).reshape(-1))
        if self.H_min.shape != self.H_max.shape or self.J_min.shape != self.J_max.shape:
            raise ModelMismatch("lower and upper bounds must have the same length")
        if not all(np.all(np.isfinite(getattr(self, n))) for n in ("H_min", "H_max", "J_min", "J_max")):
            raise InvalidArgument("parameter bounds must be finite")
        if np.any(self.H_min > self.H_max) or np.any(self.J_min > self.J_max):
            raise InvalidArgument("every lower bound must not exceed its upper bound")

    def lower(self) -> np.ndarray:
        return np.concatenate([self.H_min, self.J_min])

    def upper(self) -> np.ndarray:
        return np.concatenate([self.H_max, self.J_max])

    def clip(self, theta) -> np.ndarray:
        """Project theta onto the box."""
        return np.clip(np.asarray(theta, dtype=float), self.lower(), self.upper())

    def contains(self, params: Params, tol: float = 0.0) -> bool:
        theta = params.as_vector()
        return bool(np.all(theta >= self.lower() - tol) and np.all(theta <= self.upper() + tol))


def box_bounds(graph: Graph, h: float = 1.0, j: float = 1.0) -> ParamBounds:
    """Symmetric bounds |H_i| <= h and |J_k| <= j."""
    if h < 0 or j < 0:
        raise InvalidArgument("box half-widths must be non-negative")
    return ParamBounds(
        np.full(graph.n_vertices, -float(h)),
        np.full(graph.n_vertices, float(h)),
        np.full(graph.n_edges, -float(j)),
        np.full(graph.n_edges, float(j)),
    )


def ising(graph: Graph) -> PottsModel:
    """Two-label Ising model: U(+1)=+1, U(-1)=-1, V(s, t) = s * t."""
    return PottsModel(
        graph=graph,
        n_labels=2,
        U=[1.0, -1.0],
        V=[[1.0, -1.0], [-1.0, 1.0]],
        spins=ISING_SPINS,
    )


def check_params(model: PottsModel, params: Params):
    if params.H.size != model.n_vertices or params.J.size != model.n_edges:
        raise ModelMismatch(
            f"params have {params.H.size} fields and {params.J.size} interactions, "
            f"model needs {model.n_vertices} and {model.n_edges}"
        )


def check_bounds(model: PottsModel, bounds: ParamBounds):
    if bounds.H_min.size != model.n_vertices or bounds.J_min.size != model.n_edges:
        raise ModelMismatch("bounds do not match the model's vertex and edge counts")


def check_state(model: PottsModel, state) -> State:
    try:
        whole = all(s == int(s) for s in state)
    except (TypeError, ValueError, OverflowError):
        raise InvalidState(f"state {state!r} is not a sequence of integer labels")
    if not whole:
        raise InvalidState(f"state {state!r} has a non-integer label")
    state = tuple(int(s) for s in state)
    if len(state) != model.n_vertices:
        raise ModelMismatch(f"state has {len(state)} labels, graph has {model.n_vertices} vertices")
    for label in state:
        if not 1 <= label <= model.n_labels:
            raise InvalidState(f"label {label} outside 1..{model.n_labels}")
    return state


def feature_row(model: PottsModel, state) -> np.ndarray:
    """eps(S) = [U(s_1)..U(s_NV), V(s_pi1(1), s_pi2(1))..V(s_pi1(NC), s_pi2(NC))]."""
    labels = np.asarray(check_state(model, state), dtype=np.int64) - 1
    first, second = model.graph.endpoints()
    return np.concatenate([model.U[labels], model.V[labels[first], labels[second]]])


def energy(model: PottsModel, params: Params, state) -> float:
    check_params(model, params)
    state = check_state(model, state)
    total = 0.0
    for i, label in enumerate(state):
        total += params.H[i] * model.U[label - 1]
    for k, (a, b) in enumerate(model.graph.edges):
        total += params.J[k] * model.V[state[a - 1] - 1, state[b - 1] - 1]
    return float(total)


def encode(state, model: PottsModel) -> int:
    """Mixed-radix index, vertex 1 least significant: sum_i (s_i - 1) N_L^(i-1)."""
    try:
        state = check_state(model, state)
    except ModelMismatch as exc:
        raise InvalidState(str(exc))
    index = 0
    for label in reversed(state):
        index = index * model.n_labels + (label - 1)
    return index


def decode(index: int, model: PottsModel) -> State:
    if isinstance(index, bool) or not isinstance(index, (int, np.integer)):
        raise InvalidState(f"state index must be an integer, got {index!r}")
    if not 0 <= index < model.n_states:
        raise InvalidState(f"state index {index} outside 0..{model.n_states - 1}")
    labels = []
    index = int(index)
    for _ in range(model.n_vertices):
        index, digit = divmod(index, model.n_labels)
        labels.append(digit + 1)
    return tuple(labels)


def decode_block(model: PottsModel, indices) -> np.ndarray:
    """0-based label matrix (len(indices), N_V) for an array of state indices."""
    indices = np.asarray(indices, dtype=np.int64).reshape(-1)
    radix = model.n_labels ** np.arange(model.n_vertices, dtype=np.int64)
    return (indices[:, None] // radix[None, :]) % model.n_labels


def feature_matrix(model: PottsModel, indices=None) -> np.ndarray:
    """Rows eps(S) for the given state indices (all states when omitted)."""
    if indices is None:
        indices = np.arange(model.n_states, dtype=np.int64)
    labels = decode_block(model, indices)
    first, second = model.graph.endpoints()
    return np.hstack([model.U[labels], model.V[labels[:, first], labels[:, second]]])


def spins(model: PottsModel, state) -> tuple:
    if model.spins is None:
        raise InvalidArgument("model has no spin map")
    return tuple(model.spins[label - 1] for label in check_state(model, state))


def flip(model: PottsModel, state) -> State:
    """Global spin flip of a two-label state (label 1 <-> label 2)."""
    if model.n_labels != 2:
        raise InvalidArgument("spin flip is only defined for two-label models")
    return tuple(3 - label for label in check_state(model, state))


def parse_state(model: PottsModel, raw) -> State:
    """Parse integer labels; models with a spin map also accept the strings "+1" and "-1"."""
    if not isinstance(raw, (list, tuple)):
        raise InputFormatError(f"state {raw!r} must be a list of labels")
    labels = []
    for item in raw:
        if isinstance(item, str):
            if model.spins is None or item.strip() not in ("+1", "-1"):
                raise InputFormatError(f"label {item!r} in state {raw!r} is not a label or spin alias")
            spin = int(item.strip())
            labels.append(model.spins.index(spin) + 1)
        elif isinstance(item, int) and not isinstance(item, bool):
            labels.append(item)
        else:
            raise InputFormatError(f"label {item!r} in state {raw!r} must be an integer")
    return check_state(model, labels)


def format_state(model: PottsModel, state) -> list:
    return list(check_state(model, state))


def _bound_pairs(raw, count, name):
    if isinstance(raw, list) and len(raw) == 2 and all(isinstance(v, (int, float)) for v in raw):
        raw = [raw] * count
    if not isinstance(raw, list) or len(raw) != count:
        raise InputFormatError(f"bounds.{name} must hold {count} [min, max] pairs")
    lows, highs = [], []
    for pair in raw:
        if not isinstance(pair, list) or len(pair) != 2:
            raise InputFormatError(f"bounds.{name} entry {pair!r} is not a [min, max] pair")
        lows.append(float(pair[0]))
        highs.append(float(pair[1]))
    return lows, highs


def bounds_from_dict(model: PottsModel, data) -> ParamBounds:
    if not isinstance(data, dict):
        raise InputFormatError("bounds must be a JSON object with H and J entries")
    if "H" not in data or "J" not in data:
        raise InputFormatError("bounds.H and bounds.J are both required")
    h_min, h_max = _bound_pairs(data["H"], model.n_vertices, "H")
    j_min, j_max = _bound_pairs(data["J"], model.n_edges, "J")
    return ParamBounds(h_min, h_max, j_min, j_max)


def bounds_to_dict(bounds: ParamBounds) -> dict:
    return {
        "H": [[float(a), float(b)] for a, b in zip(bounds.H_min, bounds.H_max)],
        "J": [[float(a), float(b)] for a, b in zip(bounds.J_min, bounds.J_max)],
    }


def model_from_dict(data) -> tuple[PottsModel, ParamBounds | None]:
    """Parse a model object; returns the model and its bounds (None when absent)."""
    if not isinstance(data, dict):
        raise InputFormatError("model file must hold a JSON object")
    if "graph" not in data:
        raise InputFormatError("model.graph is missing")
    graph = graph_from_dict(data["graph"])

    preset = data.get("preset")
    if preset is not None:
        if preset != "ising":
            raise InputFormatError(f"model.preset {preset!r} is unknown (only 'ising')")
        model = ising(graph)
    else:
        for key in ("n_labels", "U", "V"):
            if key not in data:
                raise InputFormatError(f"model.{key} is missing")
        try:
            model = PottsModel(graph, data["n_labels"], data["U"], data["V"])
        except (TypeError, ValueError) as exc:
            raise InputFormatError(f"model tables are malformed: {exc}")

    bounds = bounds_from_dict(model, data["bounds"]) if "bounds" in data else None
    return model, bounds


def model_to_dict(model: PottsModel, bounds: ParamBounds | None = None) -> dict:
    data = {"graph": graph_to_dict(model.graph)}
    if model.is_ising:
        data["preset"] = "ising"
    data["n_labels"] = int(model.n_labels)
    data["U"] = [float(u) for u in model.U]
    data["V"] = [[float(v) for v in row] for row in model.V]
    if bounds is not None:
        data["bounds"] = bounds_to_dict(bounds)
    return data


def params_from_dict(model: PottsModel, data) -> Params:
    """Accept {"H": [...], "J": [...]} or a result object holding one under "params"."""
    if isinstance(data, dict) and "params" in data:
        data = data["params"]
    if not isinstance(data, dict) or "H" not in data or "J" not in data:
        raise InputFormatError("params must be an object with H and J lists")
    try:
        params = Params([float(h) for h in data["H"]], [float(j) for j in data["J"]])
    except (TypeError, ValueError):
        raise InputFormatError("params.H and params.J must be lists of numbers")
    check_params(model, params)
    if not all(math.isfinite(v) for v in params.as_vector()):
        raise InputFormatError("params must be finite")
    return params


def params_to_dict(params: Params) -> dict:
    return {"H": [float(h) for h in params.H], "J": [float(j) for j in params.J]}
