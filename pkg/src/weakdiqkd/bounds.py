"""Closed-form security bounds under weak settings randomness.

All logarithms are base 2 except in ``eve_min_entropy_bound``, whose
denominator ``2 ln 2`` comes from a first-order expansion of ``-log2 p``.
Out-of-range outcomes are clamped so sweeps stay total: a vacuous bound
returns ``H = 0`` or ``p_guess = 1`` rather than raising.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

LOG2_3 = math.log2(3.0)
GAP = 2.0 - LOG2_3                    # entropy saved per fully-biased round
CLASSICAL_VALUE = 0.75
SATURATION_LOSS = 2.0 * GAP / 4.0     # loss rate at which R(L) reaches 1


def _check_unit(name: str, x: float) -> None:
    if not (0.0 <= x <= 1.0) or math.isnan(x):
        raise ValueError(f"{name} must lie in [0, 1], got {x}")


def product_state_bound(L: float) -> float:
    """R(L): best product-state value of the game when the settings have loss rate L."""
    _check_unit("L", L)
    return min(CLASSICAL_VALUE + L / (2.0 * GAP), 1.0)


def biased_round_bound(h_min: float) -> float:
    """Local bound for one round whose settings have min-entropy ``h_min`` bits."""
    if not (0.0 <= h_min <= 2.0):
        raise ValueError(f"h_min must lie in [0, 2], got {h_min}")
    return min(3.0 * 2.0 ** (-h_min), 1.0)


def critical_loss_rate(Q: float) -> float:
    """Loss rate at which R(L) reaches the quantum value ``Q``; no security beyond it."""
    if not (CLASSICAL_VALUE <= Q <= 1.0):
        raise ValueError(f"Q must lie in [3/4, 1], got {Q}")
    return (Q - CLASSICAL_VALUE) * 2.0 * GAP


def critical_min_entropy(Q: float) -> float:
    """Per-round settings min-entropy at which ``biased_round_bound`` equals ``Q``."""
    if not (CLASSICAL_VALUE <= Q <= 1.0):
        raise ValueError(f"Q must lie in [3/4, 1], got {Q}")
    return math.log2(3.0 / Q)


def eve_min_entropy_bound(R_obs: float, L: float) -> float:
    """H(L) = max(0, (R_obs - R(L)) / (2 ln 2)), per round."""
    _check_unit("R_obs", R_obs)
    _check_unit("L", L)
    return max(0.0, (R_obs - product_state_bound(L)) / (2.0 * math.log(2.0)))


def guessing_probability_bound(Q: float, R: float, h_min: float) -> float:
    """Upper bound on Eve's guessing probability of one outcome.

    Returns 1 when ``Q <= R`` (no violation, no constraint).
    """
    if h_min < 0:
        raise ValueError(f"h_min must be nonnegative, got {h_min}")
    if Q <= R:
        return 1.0
    return min(1.0, max(0.0, 1.0 - 2.0 ** (h_min - 1.0) * (Q - R)))


def key_rate_lower_bound(h_min_AE: float, n_pub: float, n_key: float) -> float:
    if n_key <= 0:
        raise ValueError(f"n_key must be positive, got {n_key}")
    if h_min_AE < 0:
        raise ValueError(f"h_min_AE must be nonnegative, got {h_min_AE}")
    return h_min_AE - n_pub / n_key


def optimal_entropy_allocation(M: int, H_sigma: float) -> tuple[float, float]:
    """Worst-case split of a total settings entropy ``H_sigma`` over ``M`` rounds.

    The adversary runs ``m`` rounds at entropy log2(3) (local bound 1) and the rest
    at 2 bits (local bound 3/4).  Returns ``(m, average bound)``.
    """
    if M <= 0:
        raise ValueError(f"M must be positive, got {M}")
    lo, hi = M * LOG2_3, 2.0 * M
    eps = 1e-12 * M
    if not (lo - eps <= H_sigma <= hi + eps):
        raise ValueError(f"H_sigma={H_sigma} outside feasible band [{lo}, {hi}]")
    m = (2.0 * M - H_sigma) / GAP
    m = min(max(m, 0.0), float(M))
    return m, (m + CLASSICAL_VALUE * (M - m)) / M


def ecpa_conjecture_check(H_of_L: float, H_A_given_B: float, L: float) -> bool:
    """Conjectured sufficient condition for error correction and privacy amplification.

    Advisory only: this never enters the secure/insecure verdict.
    """
    if min(H_of_L, H_A_given_B, L) < 0:
        raise ValueError("inputs must be nonnegative")
    return H_of_L - H_A_given_B > L


@dataclass(frozen=True)
class SecurityAssessment:
    L: float
    R_of_L: float
    R_obs: float | None
    H_of_L: float | None
    k_ratio: float | None
    f_max: float | None
    key_rate: float | None
    key_bits_per_round: float | None
    status: str
    ecpa_conjecture: bool | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def assess(L: float, R_obs: float | None = None, R_Q: float = 1.0, d: int = 2,
           n_pub: float = 0.0, n_key: float | None = None,
           H_A_given_B: float | None = None) -> SecurityAssessment:
    """Bundle the bounds for one parameter point.

    ``status`` is ``secure`` when R_obs strictly exceeds R(L), ``boundary`` on
    equality and ``insecure`` below it (or when no R_obs is given).
    """
    from .sampling import required_k_ratio, solve_secure_fraction

    R_L = product_state_bound(L)
    if R_obs is None:
        return SecurityAssessment(L, R_L, None, None, None, None, None, None, "insecure")
    H = eve_min_entropy_bound(R_obs, L)
    if R_obs > R_L + 1e-15:
        status = "secure"
    elif abs(R_obs - R_L) <= 1e-15:
        status = "boundary"
    else:
        status = "insecure"
    k = f_max = None
    if R_Q > R_L:
        k = required_k_ratio(min(R_obs, R_Q), L, R_Q)
        if status == "secure":
            f_max = solve_secure_fraction(L, R_obs, R_Q)
    rate = key_rate_lower_bound(H, n_pub, n_key) if n_key else None
    ecpa = ecpa_conjecture_check(H, H_A_given_B, L) if H_A_given_B is not None else None
    return SecurityAssessment(L, R_L, R_obs, H, k, f_max, rate, H * math.log2(d),
                              status, ecpa)
