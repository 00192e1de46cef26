"""Normalized CGLMP functional, classical strategies and quantum values.

A behavior is a dense table ``P[a, b, A, B]``.  Alice has settings ``a in {0, 1}``;
Bob has ``b in {0, 1}`` and, for protocol simulation, an extra key setting ``b = 2``.
The functional is the win probability of the four-term game

    (a, b) = (0, 0): A <= B      (0, 1): B <= A
    (1, 1): A <= B               (1, 0): B <  A

weighted by the setting distribution ``p[a, b]``.  Its classical value at uniform
inputs is 3/4.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple

import numpy as np

PROB_ATOL = 1e-12
NUMERIC_ATOL = 1e-9
MAX_ENUM_DIM = 8
MAX_STATE_OPT_DIM = 16

# Reference quantum values quoted for the normalized game; the two d=2 values disagree.
# The d=5 value belongs to the optimal (not maximally entangled) state.
REFERENCE_QUANTUM_VALUES: dict[int, tuple[float, ...]] = {
    2: (0.8177, 0.801777),
    5: (0.8516,),
}


class DimensionError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Behavior:
    """Conditional outcome table ``P(A, B | a, b)``.

    ``table`` has shape ``(2, n_b, d, d)`` with ``n_b`` equal to 2, or 3 when the
    key setting ``b = 2`` is present.
    """

    d: int
    table: np.ndarray

    def __post_init__(self):
        table = np.array(self.table, dtype=float)
        if self.d < 2:
            raise DimensionError(f"d must be >= 2, got {self.d}")
        if table.ndim != 4 or table.shape[0] != 2 or table.shape[1] not in (2, 3) \
                or table.shape[2:] != (self.d, self.d):
            raise DimensionError(
                f"table shape {table.shape} does not match (2, 2|3, {self.d}, {self.d})")
        if np.any(table < -PROB_ATOL):
            raise ValueError("behavior has negative entries")
        sums = table.sum(axis=(2, 3))
        if np.any(np.abs(sums - 1.0) > PROB_ATOL):
            raise ValueError(f"conditional distributions do not sum to 1: {sums}")
        table = np.clip(table, 0.0, None)
        table.setflags(write=False)
        object.__setattr__(self, "table", table)

    @property
    def settings(self) -> tuple[int, int]:
        return (self.table.shape[0], self.table.shape[1])

    @property
    def has_key_setting(self) -> bool:
        return self.table.shape[1] == 3

    def to_json(self) -> dict:
        return {"d": self.d, "settings": list(self.settings),
                "table": self.table.ravel().tolist()}

    @classmethod
    def from_json(cls, obj: dict | str) -> "Behavior":
        if isinstance(obj, str):
            obj = json.loads(obj)
        d = int(obj["d"])
        na, nb = obj.get("settings", (2, 2))
        table = np.asarray(obj["table"], dtype=float)
        if table.size != na * nb * d * d:
            raise DimensionError(
                f"table has {table.size} entries, expected {na * nb * d * d}")
        return cls(d, table.reshape(na, nb, d, d))


@dataclass(frozen=True, eq=False)
class InputDistribution:
    """Setting probabilities ``p[a, b]`` for the two test settings per side."""

    p: np.ndarray = field(default_factory=lambda: np.full((2, 2), 0.25))

    def __post_init__(self):
        p = np.array(self.p, dtype=float).reshape(2, 2)
        if np.any(p < 0):
            raise ValueError("setting probabilities must be nonnegative")
        if abs(p.sum() - 1.0) > PROB_ATOL:
            raise ValueError(f"setting probabilities sum to {p.sum()}, not 1")
        p.setflags(write=False)
        object.__setattr__(self, "p", p)

    @classmethod
    def uniform(cls) -> "InputDistribution":
        return cls(np.full((2, 2), 0.25))

    @property
    def r(self) -> float:
        return float(self.p.min())

    @property
    def h_min(self) -> float:
        return float(-math.log2(self.p.max()))


@dataclass(frozen=True)
class PhaseSet:
    """Phase offsets of the Fourier-basis measurements (alpha0, alpha1, beta0, beta1).

    Offsets are in outcome units: shifting a phase by 1 relabels that party's
    outcomes cyclically, so the physical period is ``d``, not 1.  Values are
    reduced modulo ``period`` when one is given.
    """

    alpha0: float = 0.0
    alpha1: float = 0.0
    beta0: float = 0.0
    beta1: float = 0.0

    def reduced(self, period: float) -> "PhaseSet":
        return PhaseSet(*(float(x % period) for x in self.as_tuple()))

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.alpha0, self.alpha1, self.beta0, self.beta1)


# Winning indicator for each (a, b) term, as functions of outcome grids.
def _win_masks(d: int) -> np.ndarray:
    A = np.arange(d)[:, None]
    B = np.arange(d)[None, :]
    masks = np.zeros((2, 2, d, d), dtype=bool)
    masks[0, 0] = A <= B
    masks[0, 1] = B <= A
    masks[1, 1] = A <= B
    masks[1, 0] = B < A
    return masks


def term_values(behavior: Behavior) -> np.ndarray:
    """Winning probability of each of the four terms, as a 2x2 array indexed (a, b)."""
    masks = _win_masks(behavior.d)
    return (behavior.table[:, :2] * masks).sum(axis=(2, 3))


def evaluate_cglmp(behavior: Behavior, inputs: InputDistribution | None = None) -> float:
    if inputs is None:
        inputs = InputDistribution.uniform()
    if not isinstance(behavior, Behavior):
        raise TypeError("behavior must be a Behavior")
    return float(np.sum(inputs.p * term_values(behavior)))


def deterministic_behavior(d: int, outputs: tuple[int, int, int, int],
                           key_output: int | None = None) -> Behavior:
    """Behavior where Alice answers ``A_a`` and Bob ``B_b`` with certainty."""
    a0, a1, b0, b1 = outputs
    nb = 2 if key_output is None else 3
    bobs = [b0, b1] if key_output is None else [b0, b1, key_output]
    table = np.zeros((2, nb, d, d))
    for a, A in enumerate((a0, a1)):
        for b, B in enumerate(bobs):
            table[a, b, A, B] = 1.0
    return Behavior(d, table)


def _enumerate_all(d: int, p: np.ndarray) -> np.ndarray:
    # values[a0, a1, b0, b1] for every deterministic strategy
    A = np.arange(d)
    le = (A[:, None] <= A[None, :]).astype(float)   # le[x, y] = x <= y
    lt = (A[:, None] < A[None, :]).astype(float)
    a0 = A[:, None, None, None]
    a1 = A[None, :, None, None]
    b0 = A[None, None, :, None]
    b1 = A[None, None, None, :]
    return (p[0, 0] * le[a0, b0] + p[0, 1] * le[b1, a0]
            + p[1, 1] * le[a1, b1] + p[1, 0] * lt[b0, a1])


def local_bound_enumeration(d: int, inputs: InputDistribution | None = None
                            ) -> tuple[float, tuple[int, int, int, int]]:
    """Maximum of the functional over all ``d**4`` deterministic strategies.

    Returns the value and the first maximizing strategy ``(A0, A1, B0, B1)`` in
    lexicographic order.
    """
    if not 2 <= d <= MAX_ENUM_DIM:
        raise DimensionError(f"enumeration supports 2 <= d <= {MAX_ENUM_DIM}, got {d}")
    if inputs is None:
        inputs = InputDistribution.uniform()
    values = _enumerate_all(d, inputs.p)
    flat = int(np.argmax(values))
    strategy = tuple(int(i) for i in np.unravel_index(flat, values.shape))
    return float(values.flat[flat]), strategy


def local_bound(inputs: InputDistribution) -> float:
    """Closed form of the classical value: one minus the smallest setting probability."""
    return 1.0 - inputs.r


def difference_distribution(d: int, delta: float) -> np.ndarray:
    """``P(A - B = m mod d)`` for the maximally entangled state, phase difference delta.

    Each joint entry equals ``sin^2(pi delta) / (d^3 sin^2(pi (m + delta) / d))``;
    the returned array holds ``d`` times that (the mass on each difference class).
    """
    m = np.arange(d)
    x = (m + delta) / d
    s = np.sin(np.pi * x)
    out = np.empty(d)
    near = np.abs(s) < 1e-6
    far = ~near
    out[far] = np.sin(np.pi * delta) ** 2 / (d ** 2 * s[far] ** 2)
    if np.any(near):
        # Exact Fejér sum near the removable singularity.
        j = np.arange(d)
        phase = np.exp(2j * np.pi * np.outer(x[near], j))
        out[near] = np.abs(phase.sum(axis=1)) ** 2 / d ** 2
    return out


def _pair_table(d: int, delta: float) -> np.ndarray:
    diff = difference_distribution(d, delta)
    A = np.arange(d)[:, None]
    B = np.arange(d)[None, :]
    return diff[(A - B) % d] / d


def honest_quantum_behavior(d: int, phases: PhaseSet | None = None,
                            key_setting: bool = True) -> Behavior:
    """Maximally entangled ``d``-level state measured in phase-shifted Fourier bases.

    With ``key_setting`` Bob's third measurement is aligned with Alice's ``a = 0``,
    so ``(a, b) = (0, 2)`` gives ``A = B`` with certainty.
    """
    if d < 2:
        raise DimensionError(f"d must be >= 2, got {d}")
    if phases is None:
        phases = PhaseSet()
    alphas = (phases.alpha0, phases.alpha1)
    betas = [phases.beta0, phases.beta1]
    if key_setting:
        betas.append(phases.alpha0)
    table = np.empty((2, len(betas), d, d))
    for a, al in enumerate(alphas):
        for b, be in enumerate(betas):
            table[a, b] = _pair_table(d, al - be)
    # Renormalize away rounding (closed form is exact up to ~1e-15).
    table /= table.sum(axis=(2, 3), keepdims=True)
    return Behavior(d, table)


def no_signaling_check(behavior: Behavior, atol: float = NUMERIC_ATOL) -> bool:
    t = behavior.table
    alice = t.sum(axis=3)       # [a, b, A]
    bob = t.sum(axis=2)         # [a, b, B]
    if np.any(np.abs(alice - alice[:, :1]) > atol):
        return False
    return not np.any(np.abs(bob - bob[:1]) > atol)


class QuantumOptimum(NamedTuple):
    value: float
    phases: PhaseSet


def _term_curves(d: int, grid: np.ndarray) -> np.ndarray:
    """Win probability of each term as a function of the phase difference on ``grid``.

    Returns shape ``(2, 2, len(grid))`` indexed like the terms.
    """
    masks = _win_masks(d)
    curves = np.empty((2, 2, grid.size))
    for i, delta in enumerate(grid):
        t = _pair_table(d, delta)
        curves[:, :, i] = (t[None, None] * masks).sum(axis=(2, 3))
    return curves


def _uniform_value(d: int, x: np.ndarray) -> float:
    alpha1, beta0, beta1 = x
    phases = PhaseSet(0.0, alpha1, beta0, beta1)
    return evaluate_cglmp(honest_quantum_behavior(d, phases, key_setting=False))


@lru_cache(maxsize=None)
def optimize_quantum_value(d: int, resolution: int = 8, tol: float = 1e-7) -> QuantumOptimum:
    """Best uniform-input value over Fourier-basis phases for the maximally entangled state.

    A grid of step ``1 / (resolution * d)`` over the full phase period ``[0, d)``
    is searched exactly (the functional splits into a ``beta0`` part and a
    ``beta1`` part once ``alpha0 = 0`` and ``alpha1`` are fixed), then refined by
    coordinate search with step halving down to ``tol``.
    """
    if d < 2:
        raise DimensionError(f"d must be >= 2, got {d}")
    step = 1.0 / (resolution * d)
    n = resolution * d * d
    grid = np.arange(n) * step
    curves = _term_curves(d, grid)
    idx = np.arange(n)
    # alpha0 = 0; differences are (0 - beta) and (alpha1 - beta), taken mod d.
    neg = (-idx) % n
    fixed0 = curves[0, 0][neg]
    fixed1 = curves[0, 1][neg]
    best0 = np.empty(n, dtype=np.int64)
    best1 = np.empty(n, dtype=np.int64)
    totals = np.empty(n)
    chunk = max(1, 2 ** 22 // n)
    for start in range(0, n, chunk):
        rows = idx[start:start + chunk]
        diff = (rows[:, None] - idx[None, :]) % n           # [alpha1, beta]
        part0 = fixed0[None, :] + curves[1, 0][diff]         # beta0 terms
        part1 = fixed1[None, :] + curves[1, 1][diff]         # beta1 terms
        b0 = part0.argmax(axis=1)
        b1 = part1.argmax(axis=1)
        r = np.arange(rows.size)
        best0[rows], best1[rows] = b0, b1
        totals[rows] = part0[r, b0] + part1[r, b1]
    i_alpha = int(totals.argmax())
    x = np.array([grid[i_alpha], grid[best0[i_alpha]], grid[best1[i_alpha]]])
    value = _uniform_value(d, x)

    h = step
    while h >= tol:
        improved = False
        for coord in range(3):
            for sign in (1.0, -1.0):
                trial = x.copy()
                trial[coord] += sign * h
                v = _uniform_value(d, trial)
                if v > value + 1e-15:
                    x, value, improved = trial, v, True
                    break
        if not improved:
            h /= 2
    phases = PhaseSet(0.0, *x).reduced(d)
    return QuantumOptimum(value, phases)


class StateOptimum(NamedTuple):
    value: float
    phases: PhaseSet
    schmidt: np.ndarray


def _fourier_basis(d: int, phase: float, sign: float) -> np.ndarray:
    j = np.arange(d)[:, None]
    k = np.arange(d)[None, :]
    return np.exp(sign * 2j * np.pi * j * (k + phase) / d) / math.sqrt(d)


def bell_operator(d: int, phases: PhaseSet) -> np.ndarray:
    """Hermitian operator whose expectation in any two-qudit state is the uniform-input value.

    Measurements are the Fourier bases used throughout this module; column ``k``
    of each basis matrix is the outcome-``k`` vector.
    """
    alice = [_fourier_basis(d, phases.alpha0, 1.0), _fourier_basis(d, phases.alpha1, 1.0)]
    bob = [_fourier_basis(d, phases.beta0, -1.0), _fourier_basis(d, phases.beta1, -1.0)]
    masks = _win_masks(d)
    W = np.zeros((d * d, d * d), dtype=complex)
    for a in range(2):
        for b in range(2):
            K = np.kron(alice[a], bob[b])
            W += 0.25 * (K * masks[a, b].reshape(-1)) @ K.conj().T
    return W


def _state_value(d: int, x: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(bell_operator(d, PhaseSet(0.0, *x)))[-1])


@lru_cache(maxsize=None)
def optimize_state_value(d: int, tol: float = 1e-7) -> StateOptimum:
    """Best uniform-input value over all two-qudit pure states with Fourier-basis measurements.

    For fixed phases the best state is the top eigenvector of the Bell operator.
    Phases start at the maximally entangled optimum and are refined by coordinate
    search with step halving.  ``schmidt`` holds the state's Schmidt coefficients
    in decreasing order.
    """
    if not (2 <= d <= MAX_STATE_OPT_DIM):
        raise DimensionError(f"d must lie in [2, {MAX_STATE_OPT_DIM}], got {d}")
    start = optimize_quantum_value(d).phases
    x = np.array([start.alpha1, start.beta0, start.beta1])
    value = _state_value(d, x)
    h = 1.0 / (8 * d)
    while h >= tol:
        improved = False
        for coord in range(3):
            for sign in (1.0, -1.0):
                trial = x.copy()
                trial[coord] += sign * h
                v = _state_value(d, trial)
                if v > value + 1e-15:
                    x, value, improved = trial, v, True
                    break
        if not improved:
            h /= 2
    phases = PhaseSet(0.0, *x).reduced(d)
    vec = np.linalg.eigh(bell_operator(d, phases))[1][:, -1]
    schmidt = np.linalg.svd(vec.reshape(d, d), compute_uv=False)
    return StateOptimum(value, phases, schmidt)


def match_reference(d: int, value: float, atol: float = 5e-3) -> dict[float, bool]:
    """Which quoted reference values for ``d`` (if any) agree with ``value``."""
    return {ref: abs(value - ref) <= atol for ref in REFERENCE_QUANTUM_VALUES.get(d, ())}
