"""Weak randomness sources and seeded adversarial generators.

Every stochastic routine takes an explicit integer seed and draws from
``numpy.random.Generator(PCG64(SeedSequence(seed)))``.  For a fixed seed and
package version the output is bit-for-bit reproducible.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Union

import numpy as np

from .sampling import sample_fixing_loss


def make_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True)
class WeakSourceSpec:
    """An ``(M, b)`` source: ``M``-bit strings with min-entropy ``b``."""

    M: int
    b: float

    def __post_init__(self):
        if self.M <= 0 or not (0.0 <= self.b <= self.M):
            raise ValueError(f"need 0 <= b <= M, M > 0; got M={self.M}, b={self.b}")

    @property
    def L(self) -> float:
        return (self.M - self.b) / self.M


def sv_loss_rate(eps: float) -> float:
    """Min-entropy loss rate of a Santha-Vazirani source with bias ``eps``.

    Each bit has min-entropy ``-log2(1/2 + eps)``, so ``L = 1 + log2(1/2 + eps)``.
    """
    if not (0.0 <= eps < 0.5):
        raise ValueError(f"eps must lie in [0, 1/2), got {eps}")
    return 1.0 + math.log2(0.5 + eps)


def min_entropy(probabilities: Iterable[float]) -> float:
    p = np.asarray(list(probabilities), dtype=float)
    if p.size == 0:
        raise ValueError("empty distribution")
    if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
        raise ValueError("probabilities must be nonnegative and sum to 1")
    return float(-math.log2(p.max()))


# Source kinds ---------------------------------------------------------------

@dataclass(frozen=True)
class Uniform:
    kind = "uniform"

    def to_dict(self) -> dict:
        return {"kind": self.kind}


@dataclass(frozen=True)
class SanthaVazirani:
    """Each bit equals the adversary's target with probability ``1/2 + eps``."""

    eps: float
    kind = "santha_vazirani"

    def __post_init__(self):
        if not (0.0 <= self.eps <= 0.5):
            raise ValueError(f"eps must lie in [0, 1/2], got {self.eps}")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "eps": self.eps}


@dataclass(frozen=True)
class SampleFixing:
    """Adversary-chosen round set the test sample is forced onto."""

    forced: frozenset = field(default_factory=frozenset)
    kind = "sample_fixing"

    def __post_init__(self):
        forced = frozenset(int(i) for i in self.forced)
        if any(i < 0 for i in forced):
            raise ValueError("forced rounds must be nonnegative indices")
        object.__setattr__(self, "forced", forced)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "forced": sorted(self.forced)}


@dataclass(frozen=True)
class BiasedIID:
    """Independent setting bits with a fixed distribution ``(P(0), P(1))``."""

    probs: tuple = (0.5, 0.5)
    kind = "biased_iid"

    def __post_init__(self):
        probs = tuple(float(x) for x in self.probs)
        if len(probs) != 2 or min(probs) < 0 or abs(sum(probs) - 1.0) > 1e-12:
            raise ValueError(f"probs must be a distribution over {{0, 1}}, got {probs}")
        object.__setattr__(self, "probs", probs)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "probs": list(self.probs)}


SourceKind = Union[Uniform, SanthaVazirani, SampleFixing, BiasedIID]


def source_from_dict(obj: dict) -> SourceKind:
    kind = obj.get("kind")
    if kind == "uniform":
        return Uniform()
    if kind == "santha_vazirani":
        return SanthaVazirani(float(obj["eps"]))
    if kind == "sample_fixing":
        return SampleFixing(frozenset(obj.get("forced", ())))
    if kind == "biased_iid":
        return BiasedIID(tuple(obj["probs"]))
    raise ValueError(f"unknown source kind {kind!r}")


# Generators ---------------------------------------------------------------

def floyd_sample(n_pool: int, m: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform ``m``-subset of ``range(n_pool)`` by Floyd's algorithm."""
    if not (0 <= m <= n_pool):
        raise ValueError(f"cannot draw {m} items from {n_pool}")
    if m == 0:
        return np.empty(0, dtype=np.int64)
    u = rng.random(m)
    chosen: set[int] = set()
    for i, j in enumerate(range(n_pool - m, n_pool)):
        t = int(u[i] * (j + 1))
        chosen.add(j if t in chosen else t)
    return np.fromiter(sorted(chosen), dtype=np.int64, count=m)


def sample_size(N: int, f: float) -> int:
    return int(math.floor(f * N + 1e-9))


def choose_sample(N: int, n_test: int, forced: Iterable[int] = (), seed=None) -> np.ndarray:
    """Uniformly seeded ``n_test``-subset of ``range(N)`` shaped by a forced set.

    If the forced set is no larger than the sample it is included entirely and the
    rest is drawn from its complement.  If it is larger, the sample is drawn from
    inside it (the sample is confined to prepared rounds).
    """
    forced_arr = np.unique(np.fromiter(forced, dtype=np.int64))
    if forced_arr.size and (forced_arr[0] < 0 or forced_arr[-1] >= N):
        raise ValueError("forced rounds out of range")
    if not (0 <= n_test <= N):
        raise ValueError(f"infeasible sample size {n_test} for N={N}")
    rng = make_rng(seed)
    F = forced_arr.size
    if F > n_test:
        picks = floyd_sample(F, n_test, rng)
        return forced_arr[picks]
    mask = np.ones(N, dtype=bool)
    mask[forced_arr] = False
    complement = np.flatnonzero(mask)
    picks = floyd_sample(complement.size, n_test - F, rng)
    return np.sort(np.concatenate([forced_arr, complement[picks]]))


def sample_fixing_chooser(N: int, f: float, forced: Iterable[int] = (), seed=None) -> np.ndarray:
    """Test-round set of ``floor(fN)`` rounds containing every forced round."""
    forced = list(forced)
    n = sample_size(N, f)
    if len(set(forced)) > n:
        raise ValueError(f"{len(set(forced))} forced rounds exceed sample size {n}")
    return choose_sample(N, n, forced, seed)


def chooser_loss(N: int, n_test: int, n_forced: int) -> float:
    """Loss rate realized by ``choose_sample`` with a forced set of the given size."""
    return sample_fixing_loss(N, n_test, n_forced)


def sv_bitstream(eps: float, targets=None, count: int | None = None, seed=None) -> np.ndarray:
    """Santha-Vazirani bits: bit ``i`` equals ``targets[i]`` with probability ``1/2 + eps``.

    Without targets the bits are unbiased regardless of ``eps``.
    """
    if not (0.0 <= eps <= 0.5):
        raise ValueError(f"eps must lie in [0, 1/2], got {eps}")
    rng = make_rng(seed)
    if targets is None:
        if count is None:
            raise ValueError("count is required without targets")
        return rng.integers(0, 2, size=count, dtype=np.int8)
    targets = np.asarray(targets, dtype=np.int8)
    if targets.ndim == 0:
        if count is None:
            raise ValueError("count is required with a scalar target")
        targets = np.full(count, targets, dtype=np.int8)
    agree = rng.random(targets.size) < 0.5 + eps
    return np.where(agree, targets, 1 - targets).astype(np.int8)


def draw_setting_bits(source: SourceKind, count: int, rng: np.random.Generator,
                      target: int = 0) -> np.ndarray:
    """Setting bits for one party from its source description."""
    if isinstance(source, SanthaVazirani):
        return sv_bitstream(source.eps, target, count, rng)
    if isinstance(source, BiasedIID):
        return (rng.random(count) < source.probs[1]).astype(np.int8)
    return rng.integers(0, 2, size=count, dtype=np.int8)


def setting_loss(source: SourceKind) -> float:
    """Per-bit min-entropy loss rate of a source's setting bits."""
    if isinstance(source, SanthaVazirani):
        return 1.0 if source.eps >= 0.5 else sv_loss_rate(source.eps)
    if isinstance(source, BiasedIID):
        return 1.0 - min_entropy(source.probs)
    return 0.0
