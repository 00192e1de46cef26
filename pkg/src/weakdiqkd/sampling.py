"""Test-sample combinatorics for sample-fixing attacks.

Eve forces part of the parameter-estimation sample onto rounds she prepared
with the maximally violating state.  The cost is min-entropy of Bob's sample
choice; these functions convert between that cost (a loss rate), the fraction
``k`` of rounds Eve controls and the test fraction ``f``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .bounds import product_state_bound

LN2 = math.log(2.0)
BISECT_TOL = 1e-6


class NoSecureFraction(ValueError):
    """Raised when no test fraction can certify security at the requested point."""


@dataclass(frozen=True)
class SamplePlan:
    N: int
    f: float
    k: float = 0.0
    alpha: float | None = None

    def __post_init__(self):
        if self.N < 1:
            raise ValueError(f"N must be >= 1, got {self.N}")
        if not (0.0 <= self.k <= self.f < 1.0):
            raise ValueError(f"need 0 <= k <= f < 1, got k={self.k}, f={self.f}")
        if self.alpha is not None and not (0.0 < self.alpha < 1.0):
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")


def log2_binom(n: float, r: float) -> float:
    """log2 C(n, r) through log-gamma; exact enough for n up to ~1e15."""
    if r < 0 or r > n:
        raise ValueError(f"infeasible binomial C({n}, {r})")
    return (math.lgamma(n + 1) - math.lgamma(r + 1) - math.lgamma(n - r + 1)) / LN2


def binary_entropy(p: float) -> float:
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


def _xlog2x(x: float) -> float:
    return x * math.log2(x) if x > 0 else 0.0


def loss_exact(N: int, f: float, k: float) -> float:
    """Finite-N min-entropy loss of forcing ``kN`` prepared rounds into an ``fN`` sample.

    ``fN`` and ``kN`` are rounded to the nearest integer.
    """
    if not (0.0 <= k <= f < 1.0):
        raise ValueError(f"need 0 <= k <= f < 1, got k={k}, f={f}")
    n = round(f * N)
    forced = round(k * N)
    if n < 1 or n >= N or forced > n:
        raise ValueError(f"infeasible cardinalities N={N}, fN={n}, kN={forced}")
    if forced == 0:
        return 0.0
    if forced == n:
        return 1.0
    total = log2_binom(N, n)
    remaining = log2_binom(N - forced, N - n)
    return (total - remaining) / total


def loss_asymptotic(k: float, f: float) -> float:
    """Large-N limit of ``loss_exact`` (0 log 0 taken as 0)."""
    if not (0.0 < f < 1.0):
        raise ValueError(f"f must lie in (0, 1), got {f}")
    if not (0.0 <= k <= f):
        raise ValueError(f"need 0 <= k <= f, got k={k}, f={f}")
    if k == 0.0:
        return 0.0
    if k == f:
        return 1.0
    num = -_xlog2x(f) - _xlog2x(1.0 - k) + _xlog2x(f - k)
    return num / binary_entropy(f)


def sample_fixing_loss(N: int, n_test: int, n_forced: int) -> float:
    """Loss rate of a uniformly random ``n_test``-subset constrained by a forced set.

    With ``n_forced <= n_test`` the sample must contain the forced rounds; with
    ``n_forced > n_test`` it must lie inside them.
    """
    if not (0 <= n_test <= N) or not (0 <= n_forced <= N):
        raise ValueError(f"infeasible cardinalities N={N}, n={n_test}, forced={n_forced}")
    total = log2_binom(N, n_test)
    if total == 0.0:
        return 0.0
    if n_forced <= n_test:
        left = log2_binom(N - n_forced, n_test - n_forced)
    else:
        left = log2_binom(n_forced, n_test)
    return (total - left) / total


def required_k_ratio(R_obs: float, L: float, R_Q: float = 1.0) -> float:
    """Minimal ``k / f`` Eve needs to produce an observed value ``R_obs``."""
    R_L = product_state_bound(L)
    if R_Q > 1.0 or R_obs > R_Q + 1e-15:
        raise ValueError(f"need R_obs <= R_Q <= 1, got R_obs={R_obs}, R_Q={R_Q}")
    if R_Q <= R_L:
        raise ValueError(f"R_Q={R_Q} must exceed R(L)={R_L}")
    return min(1.0, max(0.0, (R_obs - R_L) / (R_Q - R_L)))


def _attack_margin(f: float, ratio: float, L: float) -> float:
    # positive: Eve needs more loss than available (secure side)
    return loss_asymptotic(ratio * f, f) - L


def _bisect(fn, lo: float, hi: float, tol: float = BISECT_TOL) -> float:
    f_lo = fn(lo)
    f_hi = fn(hi)
    if f_lo == 0.0:
        return lo
    if f_hi == 0.0:
        return hi
    if (f_lo > 0) == (f_hi > 0):
        raise ValueError("bisection bracket does not straddle a sign change")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        f_mid = fn(mid)
        if (f_mid > 0) == (f_lo > 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _sign_changes(fn, lo: float, hi: float, n: int = 400) -> list[tuple[float, float]]:
    xs = [lo + (hi - lo) * i / n for i in range(n + 1)]
    vals = [fn(x) for x in xs]
    return [(xs[i], xs[i + 1]) for i in range(n) if (vals[i] > 0) != (vals[i + 1] > 0)]


F_EDGE = 1e-9


def solve_secure_fraction(L: float, R_obs: float, R_Q: float = 1.0,
                          tol: float = BISECT_TOL) -> float:
    """Largest test fraction ``f`` for which the sample-fixing attack costs more than ``L``.

    Returns 1.0 when every ``f`` in (0, 1) is secure.  Raises ``NoSecureFraction``
    when ``R_obs`` does not exceed R(L), and ``ValueError`` if the margin crosses
    zero more than once on the scan grid.
    """
    R_L = product_state_bound(L)
    if R_obs <= R_L:
        raise NoSecureFraction(f"R_obs={R_obs} does not exceed R(L)={R_L}")
    ratio = required_k_ratio(min(R_obs, R_Q), L, R_Q)
    margin = lambda f: _attack_margin(f, ratio, L)  # noqa: E731
    lo, hi = F_EDGE, 1.0 - F_EDGE
    crossings = _sign_changes(margin, lo, hi)
    if len(crossings) > 1:
        raise ValueError(f"multiple admissibility crossings at {crossings}")
    if not crossings:
        if margin(hi) > 0:
            return 1.0
        raise NoSecureFraction(f"no admissible f for L={L}, R_obs={R_obs}")
    a, b = crossings[0]
    return _bisect(margin, a, b, tol)


def required_violation(L: float, f: float, R_Q: float = 1.0,
                       tol: float = BISECT_TOL) -> float:
    """Smallest observed value that makes test fraction ``f`` secure at loss rate ``L``."""
    from .bounds import critical_loss_rate

    if not (0.0 < f < 1.0):
        raise ValueError(f"f must lie in (0, 1), got {f}")
    if not (0.0 < L < critical_loss_rate(R_Q)):
        raise ValueError(f"L must lie in (0, {critical_loss_rate(R_Q)}), got {L}")
    R_L = product_state_bound(L)

    def margin(R_obs: float) -> float:
        return _attack_margin(f, required_k_ratio(R_obs, L, R_Q), L)

    if margin(R_Q) <= 0:
        raise NoSecureFraction(f"no R_obs <= R_Q={R_Q} secures f={f} at L={L}")
    return _bisect(margin, R_L, R_Q, tol)


def sublinear_loss(N: int, alpha: float, k: float) -> float:
    """Loss of confining an ``N**(1-alpha)`` test sample to ``kN`` prepared rounds."""
    if not (0.0 < alpha < 1.0):
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if not (0.0 < k <= 1.0):
        raise ValueError(f"k must lie in (0, 1], got {k}")
    n = round(N ** (1.0 - alpha))
    prepared = round(k * N)
    if prepared < n:
        raise ValueError(f"kN={prepared} smaller than test sample {n}")
    return sample_fixing_loss(N, n, prepared) if prepared < N else 0.0


def min_sample_for_precision(target_sigma: float, R: float) -> int:
    """Rounds needed for a Bernoulli standard error ``sqrt(R(1-R)/n) <= target_sigma``."""
    if not (0.0 < R < 1.0):
        raise ValueError(f"R must lie in (0, 1), got {R}")
    if target_sigma <= 0:
        raise ValueError(f"target_sigma must be positive, got {target_sigma}")
    need = R * (1.0 - R) / target_sigma ** 2
    return max(1, math.ceil(need - 1e-9))
