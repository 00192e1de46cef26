"""Seeded Monte Carlo simulation of the DIQKD protocol and its attacks.

Protocol: of ``N`` rounds Bob picks a test sample of ``n_test`` rounds with his
(possibly compromised) source.  In test rounds both parties pick settings in
{0, 1}; in the other rounds Bob uses the key setting ``b = 2`` and rounds where
Alice chose ``a = 1`` are discarded.  The test rounds estimate the game value;
the ``(a, b) = (0, 2)`` rounds form the sifted key.

Eve prepares each round with either the violating (honest-looking) behavior or
a product state ``|x>|x>`` whose key-basis outcome ``x`` she records.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from typing import NamedTuple

import numpy as np

from . import randomness as rnd
from .bounds import product_state_bound
from .cglmp_engine import (Behavior, _win_masks, evaluate_cglmp, honest_quantum_behavior,
                           optimize_quantum_value)
from .sampling import binary_entropy, sample_fixing_loss

SCHEMA_VERSION = 1
ALARM_SIGMAS = 3.0
PRODUCT_MODELS = ("uniform", "aligned")
ATTACK_KINDS = ("none", "combined", "sublinear", "noisy")


class InfeasibleAttack(ValueError):
    pass


class NoAdmissibleAttack(InfeasibleAttack):
    """The noisy-correlation constraint set is empty."""


@dataclass(frozen=True, eq=False)
class ProtocolConfig:
    N: int
    f: float
    d: int = 2
    alice_source: rnd.SourceKind = field(default_factory=rnd.Uniform)
    bob_source: rnd.SourceKind = field(default_factory=rnd.Uniform)
    honest_behavior: Behavior | None = None
    test_size: int | None = None
    assumed_loss: float = 0.0
    threshold: float | None = None

    def __post_init__(self):
        if self.N < 1:
            raise ValueError(f"N must be >= 1, got {self.N}")
        if not (0.0 < self.f < 1.0):
            raise ValueError(f"f must lie in (0, 1), got {self.f}")
        if self.honest_behavior is None:
            phases = optimize_quantum_value(self.d).phases
            object.__setattr__(self, "honest_behavior", honest_quantum_behavior(self.d, phases))
        b = self.honest_behavior
        if b.d != self.d:
            raise ValueError(f"behavior dimension {b.d} does not match d={self.d}")
        if not b.has_key_setting:
            raise ValueError("honest behavior needs the key setting b=2")
        if self.test_size is not None and not (1 <= self.test_size < self.N):
            raise ValueError(f"test_size must lie in [1, N), got {self.test_size}")
        if not (0.0 <= self.assumed_loss <= 1.0):
            raise ValueError(f"assumed_loss must lie in [0, 1], got {self.assumed_loss}")

    @property
    def n_test(self) -> int:
        return self.test_size if self.test_size is not None else rnd.sample_size(self.N, self.f)

    @property
    def alarm_threshold(self) -> float:
        return self.threshold if self.threshold is not None else product_state_bound(self.assumed_loss)

    def with_test_size(self, n: int) -> "ProtocolConfig":
        return replace(self, test_size=n, f=n / self.N)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "N": self.N, "f": self.f, "d": self.d,
            "test_size": self.test_size,
            "alice_source": self.alice_source.to_dict(),
            "bob_source": self.bob_source.to_dict(),
            "behavior": self.honest_behavior.to_json(),
            "assumed_loss": self.assumed_loss,
            "threshold": self.threshold,
        }


@dataclass(frozen=True, eq=False)
class AttackStrategy:
    """Eve's round preparation and her control over Bob's sample.

    ``entangled`` lists rounds carrying the violating behavior (``None``: all of
    them).  ``forced`` and ``excluded`` constrain the test sample.  In noisy
    strategies, the remaining rounds get a product state with probability
    ``mix_weight``.
    """

    kind: str = "none"
    k: float = 0.0
    alpha: float | None = None
    entangled: np.ndarray | None = None
    forced: np.ndarray | None = None
    excluded: np.ndarray | None = None
    product_model: str = "uniform"
    mix_weight: float = 0.0
    noisy: "NoisyAttack | None" = None
    setting_targets: tuple[int, int] = (0, 0)

    def __post_init__(self):
        if self.kind not in ATTACK_KINDS:
            raise ValueError(f"unknown attack kind {self.kind!r}")
        if self.product_model not in PRODUCT_MODELS:
            raise ValueError(f"product_model must be one of {PRODUCT_MODELS}")
        if not (0.0 <= self.mix_weight <= 1.0):
            raise ValueError(f"mix_weight must lie in [0, 1], got {self.mix_weight}")


@dataclass(frozen=True)
class SimulationReport:
    R_obs_hat: float
    sigma: float
    test_count: int
    sift_count: int
    key_bits: float
    eve_guess_fraction: float
    eve_known_fraction: float
    key_error_rate: float
    realized_loss: float
    settings_loss: float
    threshold: float
    verdict: str
    attack: str
    N: int
    d: int
    seed: int | None
    term_counts: list = field(default_factory=list)
    schema_version: int = SCHEMA_VERSION

    @property
    def alarm(self) -> bool:
        return self.verdict == "alarm"

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


# Behaviors ---------------------------------------------------------------

def product_state_behavior(d: int, model: str = "uniform") -> Behavior:
    """Average behavior of Eve's ``|x>|x>`` rounds over a uniform ``x``.

    ``uniform``: Alice at ``a = 0`` and Bob at ``b = 2`` both output ``x``, every
    other measurement gives an independent uniform outcome.  ``aligned``: every
    measurement outputs ``x``.
    """
    table = np.zeros((2, 3, d, d))
    eye = np.eye(d) / d
    flat = np.full((d, d), 1.0 / d ** 2)
    for a in range(2):
        for b in range(3):
            if model == "aligned" or (a == 0 and b == 2):
                table[a, b] = eye
            else:
                table[a, b] = flat
    return Behavior(d, table)


# Estimation ----------------------------------------------------------------

def estimate_cglmp_from_counts(counts, weights=None) -> tuple[float, float]:
    """Plug-in estimate of the game value from per-term ``(wins, trials)`` counts.

    ``counts`` is a 2x2 nested sequence indexed ``(a, b)``.  ``weights`` are the
    setting probabilities; by default the empirical cell frequencies.  The
    standard error propagates an independent binomial error per term.
    """
    c = np.asarray(counts, dtype=float).reshape(2, 2, 2)
    wins, trials = c[..., 0], c[..., 1]
    if np.any(c < 0):
        raise ValueError("counts must be nonnegative")
    if np.any(wins > trials):
        raise ValueError("wins exceed trials")
    w = trials / trials.sum() if weights is None else np.asarray(weights, dtype=float).reshape(2, 2)
    used = w > 0
    if np.any(trials[used] == 0):
        raise ValueError("zero trials in a weighted (a, b) cell")
    q = np.divide(wins, trials, out=np.zeros_like(wins), where=trials > 0)
    value = float(np.sum(w * q))
    var = np.divide(w ** 2 * q * (1 - q), trials, out=np.zeros_like(q), where=trials > 0)
    return value, float(math.sqrt(var.sum()))


# Strategy builders -----------------------------------------------------------

def _random_rounds(N: int, count: int, rng: np.random.Generator) -> np.ndarray:
    return np.sort(rng.choice(N, size=count, replace=False)) if count else np.empty(0, np.int64)


def build_combined_attack(config: ProtocolConfig, k: float, seed=None,
                          product_model: str = "uniform") -> AttackStrategy:
    """Violating states on ``kN`` predetermined rounds forced into the test sample."""
    if not (0.0 <= k <= config.f + 1e-12):
        raise InfeasibleAttack(f"need 0 <= k <= f={config.f}, got k={k}")
    n_test = config.n_test
    count = n_test if abs(k - config.f) <= 1e-12 else min(round(k * config.N), n_test)
    rounds = _random_rounds(config.N, count, rnd.make_rng(seed))
    return AttackStrategy("combined", k=k, entangled=rounds, forced=rounds,
                          product_model=product_model)


def build_sublinear_attack(config: ProtocolConfig, alpha: float, k: float, seed=None,
                           product_model: str = "uniform") -> AttackStrategy:
    """Test sample of size ``N**(1 - alpha)`` confined to ``kN`` prepared rounds."""
    if not (0.0 < alpha < 1.0):
        raise InfeasibleAttack(f"alpha must lie in (0, 1), got {alpha}")
    n_sub = round(config.N ** (1.0 - alpha))
    if config.n_test != n_sub:
        raise InfeasibleAttack(
            f"config test size {config.n_test} is not N**(1-alpha) = {n_sub}")
    count = round(k * config.N)
    if not (0.0 < k <= 1.0) or count <= n_sub:
        raise InfeasibleAttack(f"need kN > N**(1-alpha): kN={count}, sample={n_sub}")
    rounds = _random_rounds(config.N, count, rnd.make_rng(seed))
    return AttackStrategy("sublinear", k=k, alpha=alpha, entangled=rounds, forced=rounds,
                          product_model=product_model)


class NoisyAttack(NamedTuple):
    a: float
    b: float
    I: float
    p_G: float
    p_av: float
    beta_qm: float


def noisy_budget(a: float, b: float, f: float) -> float:
    """Asymptotic loss of knowing ``aN`` surely-tested and ``bN`` surely-untested rounds."""
    rest = 1.0 - a - b
    if rest <= 0.0:
        return 1.0
    x = (f - a) / rest
    return (binary_entropy(f) - rest * binary_entropy(min(max(x, 0.0), 1.0))) / binary_entropy(f)


def noisy_guess_bound(I: float, L: float) -> float:
    """Guessing probability allowed in a round with game value ``I`` at loss rate ``L``."""
    h_min = 2.0 * (1.0 - L)
    return min(1.0, max(0.0, 1.0 - 2.0 ** (h_min - 1.0) * (I - product_state_bound(L))))


def noisy_strategy_optimize(L: float, f: float, R_obs_min: float, d: int = 2,
                            beta_qm: float | None = None, step: float = 1e-3) -> NoisyAttack:
    """Eve's best (a, b, I) split when key correlations need not be perfect.

    ``a`` runs over a grid of spacing ``step``.  For each ``a`` the largest
    affordable ``b`` is found by bisection (the budget grows with ``b``) and the
    smallest admissible ``I`` is taken in closed form (the guessing bound falls
    with ``I``).
    """
    if not (0.0 <= L < 1.0):
        raise ValueError(f"L must lie in [0, 1), got {L}")
    if not (0.0 < f < 1.0):
        raise ValueError(f"f must lie in (0, 1), got {f}")
    beta = optimize_quantum_value(d).value if beta_qm is None else beta_qm
    tol = 1e-12
    best = None
    n_a = int(math.floor(f / step + 1e-9))
    for i in range(n_a + 1):
        a = i * step
        if a >= f:
            break
        if noisy_budget(a, 0.0, f) > L:
            break       # budget grows with a
        I = max(0.0, (R_obs_min - a / f * beta) * f / (f - a))
        if I > beta + tol:
            continue
        lo, hi = 0.0, 1.0 - f
        if noisy_budget(a, hi, f) <= L:
            b = hi
        else:
            for _ in range(100):
                mid = 0.5 * (lo + hi)
                if noisy_budget(a, mid, f) <= L:
                    lo = mid
                else:
                    hi = mid
            b = math.floor(lo / tol) * tol     # round down: stays within budget
        p_G = noisy_guess_bound(I, L)
        p_av = b / (1 - f) + (1 - f - b) / (1 - f) * p_G
        if best is None or p_av > best.p_av + 1e-15:
            best = NoisyAttack(a, b, I, p_G, p_av, beta)
    if best is None:
        raise NoAdmissibleAttack(
            f"no admissible attack for L={L}, f={f}, R_obs_min={R_obs_min}, beta={beta}")
    return best


def build_noisy_attack(config: ProtocolConfig, L: float, R_obs_min: float, seed=None,
                       beta_qm: float | None = None, product_model: str = "uniform"
                       ) -> AttackStrategy:
    """Realize the optimized noisy strategy round by round.

    Rounds Eve knows are tested carry the violating behavior and are forced into
    the sample; rounds she knows are untested carry product states and are kept
    out.  The rest mix product and violating rounds so their average game value
    equals the optimized ``I``.
    """
    opt = noisy_strategy_optimize(L, config.f, R_obs_min, config.d, beta_qm)
    rng = rnd.make_rng(seed)
    N, n_test = config.N, config.n_test
    n_a = min(round(opt.a * N), n_test)
    n_b = min(round(opt.b * N), N - n_test)
    order = rng.permutation(N)
    known_tested = np.sort(order[:n_a])
    known_untested = np.sort(order[n_a:n_a + n_b])
    r_q = evaluate_cglmp(config.honest_behavior)
    r_p = evaluate_cglmp(product_state_behavior(config.d, product_model))
    w = 0.0 if r_q <= r_p else min(1.0, max(0.0, (r_q - opt.I) / (r_q - r_p)))
    rest = np.setdiff1d(np.arange(N), np.concatenate([known_tested, known_untested]))
    entangled = np.sort(np.concatenate([known_tested, rest]))
    return AttackStrategy("noisy", entangled=entangled, forced=known_tested,
                          excluded=known_untested, product_model=product_model,
                          mix_weight=w, noisy=opt)


# Simulation --------------------------------------------------------------

def _sample_outcomes(table: np.ndarray, a: np.ndarray, b: np.ndarray,
                     rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    d = table.shape[-1]
    cdf = np.cumsum(table.reshape(table.shape[0], table.shape[1], d * d), axis=-1)
    cdf[..., -1] = 1.0
    u = rng.random(a.size)
    idx = np.empty(a.size, dtype=np.int64)
    for ai in range(table.shape[0]):
        for bi in range(table.shape[1]):
            sel = (a == ai) & (b == bi)
            if sel.any():
                idx[sel] = np.searchsorted(cdf[ai, bi], u[sel], side="right")
    idx = np.minimum(idx, d * d - 1)
    return idx // d, idx % d


def _forced_sets(config: ProtocolConfig, strategy: AttackStrategy):
    forced = strategy.forced
    if forced is None and isinstance(config.bob_source, rnd.SampleFixing):
        forced = np.fromiter(sorted(config.bob_source.forced), dtype=np.int64)
    excluded = strategy.excluded
    return (np.empty(0, np.int64) if forced is None else np.asarray(forced, np.int64),
            np.empty(0, np.int64) if excluded is None else np.asarray(excluded, np.int64))


def _draw_test_set(N, n_test, forced, excluded, rng):
    if excluded.size == 0:
        return rnd.choose_sample(N, n_test, forced, rng)
    keep = np.ones(N, dtype=bool)
    keep[excluded] = False
    pool = np.flatnonzero(keep)
    position = np.searchsorted(pool, forced)
    if np.any(pool[position] != forced):
        raise InfeasibleAttack("forced and excluded round sets overlap")
    local = rnd.choose_sample(pool.size, n_test, position, rng)
    return pool[local]


def _realized_loss(N, n_test, n_forced, n_excluded) -> float:
    total = math.lgamma(N + 1) - math.lgamma(n_test + 1) - math.lgamma(N - n_test + 1)
    if total == 0.0:
        return 0.0
    if n_excluded == 0:
        return sample_fixing_loss(N, n_test, n_forced)
    pool = N - n_excluded
    left = (math.lgamma(pool - n_forced + 1) - math.lgamma(n_test - n_forced + 1)
            - math.lgamma(pool - n_test + 1))
    return (total - left) / total


def run_protocol(config: ProtocolConfig, strategy: AttackStrategy | None = None,
                 seed: int | None = 0) -> SimulationReport:
    if strategy is None:
        strategy = AttackStrategy()
    N, d, n_test = config.N, config.d, config.n_test
    streams = [rnd.make_rng(s) for s in np.random.SeedSequence(seed).spawn(5)]
    rng_sample, rng_alice, rng_bob, rng_out, rng_eve = streams

    forced, excluded = _forced_sets(config, strategy)
    if excluded.size > N - n_test:
        raise InfeasibleAttack("excluded rounds leave too few candidates for the sample")
    test_rounds = _draw_test_set(N, n_test, forced, excluded, rng_sample)
    is_test = np.zeros(N, dtype=bool)
    is_test[test_rounds] = True

    ta, tb = strategy.setting_targets
    a = rnd.draw_setting_bits(config.alice_source, N, rng_alice, ta).astype(np.int64)
    b = np.full(N, 2, dtype=np.int64)
    b[is_test] = rnd.draw_setting_bits(config.bob_source, n_test, rng_bob, tb)

    product = np.zeros(N, dtype=bool)
    if strategy.entangled is not None:
        product[:] = True
        product[np.asarray(strategy.entangled, dtype=np.int64)] = False
        if strategy.mix_weight > 0.0:
            mixed = np.ones(N, dtype=bool)
            if strategy.forced is not None:
                mixed[np.asarray(strategy.forced, np.int64)] = False
            mixed &= ~product
            flip = rng_eve.random(N) < strategy.mix_weight
            product |= mixed & flip

    A = np.empty(N, dtype=np.int64)
    B = np.empty(N, dtype=np.int64)
    q = ~product
    A[q], B[q] = _sample_outcomes(config.honest_behavior.table, a[q], b[q], rng_out)
    x = rng_eve.integers(0, d, size=N)
    free_a = rng_out.integers(0, d, size=N)
    free_b = rng_out.integers(0, d, size=N)
    if strategy.product_model == "aligned":
        A[product] = x[product]
        B[product] = x[product]
    else:
        A[product] = np.where(a[product] == 0, x[product], free_a[product])
        B[product] = np.where(b[product] == 2, x[product], free_b[product])

    # Parameter estimation.
    masks = _win_masks(d)
    wins = masks[a[is_test], b[is_test], A[is_test], B[is_test]]
    counts = np.zeros((2, 2, 2), dtype=np.int64)
    for ai in range(2):
        for bi in range(2):
            cell = (a[is_test] == ai) & (b[is_test] == bi)
            counts[ai, bi] = (int(wins[cell].sum()), int(cell.sum()))
    R_hat, sigma = estimate_cglmp_from_counts(counts)

    # Sifting and Eve's guess: exact on product rounds, uniform otherwise.
    sift = (~is_test) & (a == 0)
    sift_count = int(sift.sum())
    guess = np.where(product, x, rng_eve.integers(0, d, size=N))
    if sift_count:
        eve_frac = float(np.mean(guess[sift] == A[sift]))
        known = float(np.mean(product[sift]))
        qber = float(np.mean(A[sift] != B[sift]))
    else:
        eve_frac = known = qber = 0.0

    loss = _realized_loss(N, n_test, forced.size, excluded.size)
    settings_loss = max(rnd.setting_loss(config.alice_source), rnd.setting_loss(config.bob_source))
    threshold = config.alarm_threshold
    verdict = "secure" if R_hat - ALARM_SIGMAS * sigma > threshold else "alarm"
    return SimulationReport(
        R_obs_hat=R_hat, sigma=sigma, test_count=n_test, sift_count=sift_count,
        key_bits=sift_count * math.log2(d), eve_guess_fraction=eve_frac,
        eve_known_fraction=known, key_error_rate=qber, realized_loss=loss,
        settings_loss=settings_loss, threshold=threshold, verdict=verdict,
        attack=strategy.kind, N=N, d=d, seed=seed, term_counts=counts.tolist())


# JSON config ---------------------------------------------------------------

def config_from_dict(obj: dict) -> ProtocolConfig:
    beh = obj.get("behavior", "optimal")
    d = int(obj.get("d", 2))
    behavior = None if beh == "optimal" else Behavior.from_json(beh)
    return ProtocolConfig(
        N=int(obj["N"]), f=float(obj["f"]), d=d,
        alice_source=rnd.source_from_dict(obj.get("alice_source", {"kind": "uniform"})),
        bob_source=rnd.source_from_dict(obj.get("bob_source", {"kind": "uniform"})),
        honest_behavior=behavior,
        test_size=obj.get("test_size"),
        assumed_loss=float(obj.get("assumed_loss", 0.0)),
        threshold=obj.get("threshold"),
    )
