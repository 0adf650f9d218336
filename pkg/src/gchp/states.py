"""Price-move state spaces and the Markov chain over them.

A state space maps each nonzero mid-price move to one of ``n`` states,
each carrying a representative move size ``a(i)``.  Four constructions
are supported:

* ``DO``      - two states fixed at +tick and -tick.
* ``TWO_SDO``  - two states at the mean up-move and mean down-move.
* ``FOUR_DO``  - four states split at one tick and half a tick per sign.
* ``NSDO``    - n states from evenly spaced per-sign quantiles.

States are always ordered by ``a(i)`` descending (most positive first),
and indices are 0-based.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import NonConvergent, OneSidedData, ZeroDelta

__all__ = [
    "StateKind",
    "PriceMoveSeries",
    "StateSpace",
    "TransitionMatrix",
    "StationaryDistribution",
    "build_state_space",
    "space_from_values",
    "classify_move",
    "classify_moves",
    "estimate_transition_matrix",
    "stationary_distribution",
    "simulate_chain",
]


class StateKind(enum.Enum):
    DO = "do"
    TWO_SDO = "2sdo"
    FOUR_DO = "4do"
    NSDO = "nsdo"

    @classmethod
    def parse(cls, name: str) -> "StateKind":
        key = name.strip().lower()
        for kind in cls:
            if kind.value == key:
                return kind
        raise ValueError(f"unknown state kind {name!r}; expected one of "
                         f"{[k.value for k in cls]}")


def _frozen_array(values, dtype=np.float64) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class PriceMoveSeries:
    """Timestamps and signed sizes of mid-price changes within one session.

    Every delta is nonzero and, because mid-prices live on the half-tick
    grid, an integer multiple of tick/2 (checked to 1e-6 relative).
    """

    times: np.ndarray
    deltas: np.ndarray
    tick: float

    def __post_init__(self):
        times = _frozen_array(np.atleast_1d(self.times))
        deltas = _frozen_array(np.atleast_1d(self.deltas))
        if times.shape != deltas.shape:
            raise ValueError("times and deltas must have matching shapes")
        if times.size > 1 and not np.all(np.diff(times) > 0):
            raise ValueError("move timestamps must be strictly increasing")
        if not (self.tick > 0):
            raise ValueError(f"tick must be positive, got {self.tick}")
        if np.any(deltas == 0):
            raise ValueError("every delta must be nonzero")
        half = self.tick / 2.0
        steps = deltas / half
        if np.any(np.abs(steps - np.round(steps)) > 1e-6 * np.maximum(np.abs(steps), 1.0)):
            raise ValueError("deltas must be integer multiples of tick/2")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "deltas", deltas)

    def __len__(self) -> int:
        return int(self.deltas.size)


@dataclass(frozen=True)
class StateSpace:
    """State values plus the per-sign breakpoints used to classify a move.

    ``pos_edges`` are ascending breakpoints over positive deltas; a positive
    move at an edge maps to the cell above it.  ``neg_edges`` mirror this
    for negative deltas with ties mapping to the cell below.  The cell maps
    translate per-sign cells into indices of ``values``.
    """

    kind: StateKind
    values: np.ndarray
    tick: float
    pos_edges: np.ndarray
    neg_edges: np.ndarray
    pos_cell_to_state: np.ndarray
    neg_cell_to_state: np.ndarray

    def __post_init__(self):
        values = _frozen_array(self.values)
        if values.size == 0:
            raise ValueError("state space needs at least one state")
        if np.any(np.diff(values) > 0):
            raise ValueError("state values must be sorted descending")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "pos_edges", _frozen_array(self.pos_edges))
        object.__setattr__(self, "neg_edges", _frozen_array(self.neg_edges))
        object.__setattr__(self, "pos_cell_to_state",
                           _frozen_array(self.pos_cell_to_state, dtype=np.int64))
        object.__setattr__(self, "neg_cell_to_state",
                           _frozen_array(self.neg_cell_to_state, dtype=np.int64))

    @property
    def n(self) -> int:
        return int(self.values.size)


@dataclass(frozen=True)
class TransitionMatrix:
    """Row-stochastic transition probabilities with the raw counts kept."""

    P: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        P = _frozen_array(self.P)
        counts = _frozen_array(self.counts)
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            raise ValueError("P must be square")
        if counts.shape != P.shape:
            raise ValueError("counts must match P's shape")
        if np.any(P < 0) or np.any(P > 1):
            raise ValueError("P entries must lie in [0, 1]")
        if np.any(np.abs(P.sum(axis=1) - 1.0) > 1e-12):
            raise ValueError("P rows must sum to 1")
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "counts", counts)

    @property
    def n(self) -> int:
        return int(self.P.shape[0])


@dataclass(frozen=True)
class StationaryDistribution:
    """Probability vector pi with pi @ P = pi."""

    pi: np.ndarray

    def __post_init__(self):
        pi = _frozen_array(self.pi)
        if np.any(pi < 0) or abs(pi.sum() - 1.0) > 1e-12:
            raise ValueError("pi must be a probability vector")
        object.__setattr__(self, "pi", pi)


def _bucket_positive(edges: np.ndarray, deltas: np.ndarray) -> np.ndarray:
    # ties at a positive edge go to the upper cell ("at least" boundaries)
    return np.searchsorted(edges, deltas, side="right")


def _bucket_negative(edges: np.ndarray, deltas: np.ndarray) -> np.ndarray:
    # mirrored: ties at a negative edge go to the more negative cell
    return np.searchsorted(edges, deltas, side="left")


def _cells(kind: StateKind, tick: float, pos: np.ndarray, neg: np.ndarray,
           n: int | None) -> tuple[np.ndarray, np.ndarray]:
    if kind in (StateKind.DO, StateKind.TWO_SDO):
        return np.array([]), np.array([])
    if kind is StateKind.FOUR_DO:
        return np.array([tick]), np.array([-tick])
    if kind is StateKind.NSDO:
        per_sign = (8 if n is None else n) // 2
        levels = np.arange(1, per_sign) / per_sign
        pos_edges = np.unique(np.quantile(pos, levels)) if per_sign > 1 else np.array([])
        neg_edges = np.unique(np.quantile(neg, levels)) if per_sign > 1 else np.array([])
        return pos_edges, neg_edges
    raise ValueError(f"unsupported kind {kind}")


def build_state_space(moves: PriceMoveSeries, kind: StateKind,
                      n: int | None = None) -> StateSpace:
    """Construct the state space of the requested kind from training moves.

    State values are the means of the training deltas landing in each cell
    (fixed at +/-tick for DO); cells that catch no training delta are
    dropped, shrinking the state count.  Raises OneSidedData when all
    deltas share a sign.
    """
    if kind is StateKind.NSDO and n is not None and (n < 2 or n % 2):
        raise ValueError(f"NSDO state count must be an even number >= 2, got {n}")
    deltas = moves.deltas
    pos = deltas[deltas > 0]
    neg = deltas[deltas < 0]
    if pos.size == 0 or neg.size == 0:
        raise OneSidedData(
            f"need moves of both signs, got {pos.size} up / {neg.size} down"
        )

    pos_edges, neg_edges = _cells(kind, moves.tick, pos, neg, n)
    pos_cells = _bucket_positive(pos_edges, pos)
    neg_cells = _bucket_negative(neg_edges, neg)

    entries = []  # (value, sign, cell)
    for cell in range(pos_edges.size + 1):
        members = pos[pos_cells == cell]
        if members.size:
            value = moves.tick if kind is StateKind.DO else float(members.mean())
            entries.append((value, +1, cell))
    for cell in range(neg_edges.size + 1):
        members = neg[neg_cells == cell]
        if members.size:
            value = -moves.tick if kind is StateKind.DO else float(members.mean())
            entries.append((value, -1, cell))

    order = sorted(range(len(entries)), key=lambda i: -entries[i][0])
    values = np.array([entries[i][0] for i in order])
    pos_map = np.full(pos_edges.size + 1, -1, dtype=np.int64)
    neg_map = np.full(neg_edges.size + 1, -1, dtype=np.int64)
    for state, i in enumerate(order):
        _, sign, cell = entries[i]
        (pos_map if sign > 0 else neg_map)[cell] = state

    # deltas falling in a dropped cell at classify time take the nearest
    # surviving cell of the same sign
    def fill(mapping):
        known = np.flatnonzero(mapping >= 0)
        for i in range(mapping.size):
            if mapping[i] < 0:
                mapping[i] = mapping[known[np.argmin(np.abs(known - i))]]

    fill(pos_map)
    fill(neg_map)
    return StateSpace(kind=kind, values=values, tick=moves.tick,
                      pos_edges=pos_edges, neg_edges=neg_edges,
                      pos_cell_to_state=pos_map, neg_cell_to_state=neg_map)


def space_from_values(values, tick: float,
                      kind: StateKind = StateKind.NSDO) -> StateSpace:
    """Build a state space directly from explicit state values.

    Cell boundaries sit at midpoints between adjacent same-sign values, so
    every value classifies back to its own state.  Used by the synthetic
    path generator and anywhere a model is specified rather than fitted.
    """
    values = np.sort(np.asarray(values, dtype=np.float64))[::-1]
    if values.size == 0 or np.any(values == 0):
        raise ValueError("state values must be nonzero")
    if np.unique(values).size != values.size:
        raise ValueError("state values must be distinct")

    def side(sign):
        vals = values[values > 0] if sign > 0 else values[values < 0]
        if vals.size == 0:
            # no states of this sign: fall back to the nearest-signed state
            edge = np.array([])
            cell_map = np.array([values.size - 1 if sign > 0 else 0], dtype=np.int64)
            return edge, cell_map
        asc = np.sort(vals)
        edges = (asc[:-1] + asc[1:]) / 2.0
        state_of = {v: i for i, v in enumerate(values)}
        cell_map = np.array([state_of[v] for v in asc], dtype=np.int64)
        return edges, cell_map

    pos_edges, pos_map = side(+1)
    neg_edges, neg_map = side(-1)
    return StateSpace(kind=kind, values=values, tick=tick,
                      pos_edges=pos_edges, neg_edges=neg_edges,
                      pos_cell_to_state=pos_map, neg_cell_to_state=neg_map)


def classify_move(space: StateSpace, delta: float) -> int:
    """Map one nonzero delta to its 0-based state index."""
    if delta == 0:
        raise ZeroDelta("a zero price move cannot be classified")
    return int(classify_moves(space, np.array([float(delta)]))[0])


def classify_moves(space: StateSpace, deltas: np.ndarray) -> np.ndarray:
    """Vectorized classify_move; raises ZeroDelta if any delta is zero."""
    deltas = np.asarray(deltas, dtype=np.float64)
    if np.any(deltas == 0):
        raise ZeroDelta("a zero price move cannot be classified")
    out = np.empty(deltas.size, dtype=np.int64)
    up = deltas > 0
    out[up] = space.pos_cell_to_state[_bucket_positive(space.pos_edges, deltas[up])]
    out[~up] = space.neg_cell_to_state[_bucket_negative(space.neg_edges, deltas[~up])]
    return out


def estimate_transition_matrix(states: np.ndarray, n: int) -> TransitionMatrix:
    """Empirical transition frequencies; unobserved rows become uniform."""
    states = np.asarray(states, dtype=np.int64)
    if states.size < 2:
        raise ValueError("need at least 2 states to count a transition")
    counts = np.zeros((n, n))
    np.add.at(counts, (states[:-1], states[1:]), 1.0)
    row_sums = counts.sum(axis=1, keepdims=True)
    with np.errstate(invalid="ignore"):
        P = np.where(row_sums > 0, counts / np.where(row_sums > 0, row_sums, 1.0),
                     1.0 / n)
    return TransitionMatrix(P=P, counts=counts)


def _power_iteration(P: np.ndarray, tol: float = 1e-12,
                     max_iter: int = 10**6) -> np.ndarray | None:
    # Deliberately non-uniform start: the uniform vector is already
    # stationary for doubly-stochastic chains, which would mask
    # periodicity instead of exposing it.
    n = P.shape[0]
    pi = np.arange(1.0, n + 1.0)
    pi /= pi.sum()
    prev = pi
    for it in range(max_iter):
        nxt = pi @ P
        nxt /= nxt.sum()
        if np.max(np.abs(nxt - pi)) < tol:
            return nxt
        if (it > 0 and np.max(np.abs(nxt - prev)) < tol
                and np.max(np.abs(nxt - pi)) > 1e-6):
            return None  # genuine period-2 oscillation, not oscillatory decay
        prev = pi
        pi = nxt
    return None


def _solve_stationary(P: np.ndarray) -> np.ndarray:
    # (P^T - I) pi = 0 with the last equation replaced by sum(pi) = 1
    n = P.shape[0]
    A = P.T - np.eye(n)
    A[-1, :] = 1.0
    rhs = np.zeros(n)
    rhs[-1] = 1.0
    return np.linalg.solve(A, rhs)


def stationary_distribution(P: TransitionMatrix) -> StationaryDistribution:
    """Stationary vector by power iteration, cross-checked by a direct solve.

    Raises NonConvergent when the iteration stalls (periodic or reducible
    chain) or the two routes disagree beyond 1e-10.
    """
    pi = _power_iteration(P.P)
    if pi is None:
        raise NonConvergent("power iteration did not converge; "
                            "chain looks periodic or reducible")
    try:
        direct = _solve_stationary(P.P)
    except np.linalg.LinAlgError as exc:
        raise NonConvergent(f"direct stationary solve failed: {exc}") from exc
    if np.max(np.abs(direct - pi)) > 1e-10:
        raise NonConvergent("power iteration and direct solve disagree; "
                            "chain looks non-ergodic")
    pi = np.clip(pi, 0.0, None)
    return StationaryDistribution(pi=pi / pi.sum())


@njit(cache=True)
def _chain_core(cum_rows: np.ndarray, initial: int, uniforms: np.ndarray) -> np.ndarray:
    out = np.empty(uniforms.size, dtype=np.int64)
    state = initial
    last = cum_rows.shape[1] - 1
    for i in range(uniforms.size):
        j = np.searchsorted(cum_rows[state], uniforms[i])
        if j > last:
            j = last
        out[i] = j
        state = j
    return out


def simulate_chain(P: TransitionMatrix, initial: int, k: int, seed: int) -> np.ndarray:
    """Draw ``k`` successive states starting from (and excluding) ``initial``."""
    if not (0 <= initial < P.n):
        raise ValueError(f"initial state {initial} outside 0..{P.n - 1}")
    if k < 0:
        raise ValueError("k must be non-negative")
    if k == 0:
        return np.empty(0, dtype=np.int64)
    uniforms = np.random.default_rng(seed).random(k)
    return _chain_core(np.cumsum(P.P, axis=1), initial, uniforms)
