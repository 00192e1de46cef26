"""Security bounds and attack simulation for device-independent QKD with biased setting choices."""

from .bounds import (
    SecurityAssessment,
    assess,
    biased_round_bound,
    critical_loss_rate,
    critical_min_entropy,
    ecpa_conjecture_check,
    eve_min_entropy_bound,
    guessing_probability_bound,
    key_rate_lower_bound,
    optimal_entropy_allocation,
    product_state_bound,
)
from .cglmp_engine import (
    Behavior,
    InputDistribution,
    PhaseSet,
    evaluate_cglmp,
    honest_quantum_behavior,
    local_bound_enumeration,
    no_signaling_check,
    optimize_quantum_value,
    optimize_state_value,
)
from .sampling import (
    loss_asymptotic,
    loss_exact,
    min_sample_for_precision,
    required_k_ratio,
    required_violation,
    solve_secure_fraction,
    sublinear_loss,
)

__version__ = "0.1.0"
