import math

import numpy as np
import pytest

from weakdiqkd.attack_sim import (
    AttackStrategy,
    InfeasibleAttack,
    NoAdmissibleAttack,
    ProtocolConfig,
    build_combined_attack,
    build_noisy_attack,
    build_sublinear_attack,
    config_from_dict,
    estimate_cglmp_from_counts,
    noisy_budget,
    noisy_guess_bound,
    noisy_strategy_optimize,
    product_state_behavior,
    run_protocol,
)
from weakdiqkd.bounds import product_state_bound
from weakdiqkd.cglmp_engine import evaluate_cglmp, optimize_quantum_value
from weakdiqkd.randomness import SampleFixing, SanthaVazirani
from weakdiqkd.sampling import sublinear_loss

R_Q2 = optimize_quantum_value(2).value


@pytest.fixture(scope="module")
def honest_cfg():
    return ProtocolConfig(N=100_000, f=0.5, d=2)


# --- estimator ---------------------------------------------------------------

def test_estimator_all_wins():
    counts = [[[10, 10], [10, 10]], [[10, 10], [10, 10]]]
    assert estimate_cglmp_from_counts(counts) == (1.0, 0.0)


def test_estimator_binomial_sigma():
    value, sigma = estimate_cglmp_from_counts([[[75, 100], [0, 0]], [[0, 0], [0, 0]]])
    assert value == pytest.approx(0.75)
    assert sigma == pytest.approx(math.sqrt(0.75 * 0.25 / 100), abs=1e-12)
    # four equal cells: sigma = sqrt(R(1-R)/400)
    value, sigma = estimate_cglmp_from_counts([[[75, 100]] * 2] * 2)
    assert value == pytest.approx(0.75)
    assert sigma == pytest.approx(0.02165, abs=1e-5)


def test_estimator_fixed_weights_and_errors():
    counts = [[[30, 40], [20, 40]], [[10, 40], [40, 40]]]
    v, _ = estimate_cglmp_from_counts(counts, weights=[[0.25, 0.25], [0.25, 0.25]])
    assert v == pytest.approx(0.25 * (0.75 + 0.5 + 0.25 + 1.0))
    with pytest.raises(ValueError):
        estimate_cglmp_from_counts([[[5, 4], [0, 0]], [[0, 0], [0, 0]]])
    with pytest.raises(ValueError):
        estimate_cglmp_from_counts([[[0, 0], [1, 1]], [[1, 1], [1, 1]]],
                                   weights=[[0.25, 0.25], [0.25, 0.25]])


# --- product behaviors ---------------------------------------------------------

@pytest.mark.parametrize("d", [2, 3, 5])
def test_product_state_values(d):
    assert evaluate_cglmp(product_state_behavior(d, "uniform")) == pytest.approx(
        (2 * d + 1) / (4 * d), abs=1e-12)
    assert evaluate_cglmp(product_state_behavior(d, "aligned")) == pytest.approx(0.75, abs=1e-12)


# --- honest protocol -----------------------------------------------------------

def test_run_is_deterministic(honest_cfg):
    assert run_protocol(honest_cfg, seed=5) == run_protocol(honest_cfg, seed=5)
    assert run_protocol(honest_cfg, seed=5).to_json() == run_protocol(honest_cfg, seed=5).to_json()
    assert run_protocol(honest_cfg, seed=5) != run_protocol(honest_cfg, seed=6)


def test_honest_run_matches_quantum_value(honest_cfg):
    rep = run_protocol(honest_cfg, seed=1)
    assert abs(rep.R_obs_hat - R_Q2) < 3 * rep.sigma
    assert rep.test_count == 50_000
    assert rep.verdict == "secure" and not rep.alarm
    assert rep.eve_known_fraction == 0.0
    assert rep.key_error_rate < 1e-12     # key setting shares Alice's phase
    assert abs(rep.eve_guess_fraction - 0.5) < 0.02
    assert rep.realized_loss == 0.0


def test_honest_d3_and_sv_settings_loss():
    cfg = ProtocolConfig(N=20_000, f=0.5, d=3, alice_source=SanthaVazirani(0.1))
    rep = run_protocol(cfg, seed=2)
    assert abs(rep.R_obs_hat - optimize_quantum_value(3).value) < 4 * rep.sigma
    assert rep.settings_loss == pytest.approx(1 + math.log2(0.6))
    assert rep.key_bits == pytest.approx(rep.sift_count * math.log2(3))


# --- combined attack -------------------------------------------------------------

def test_combined_attack_full_control(honest_cfg):
    strat = build_combined_attack(honest_cfg, honest_cfg.f, seed=3)
    rep = run_protocol(honest_cfg, strat, seed=3)
    assert abs(rep.R_obs_hat - R_Q2) < 4 * rep.sigma
    assert rep.eve_guess_fraction == 1.0
    assert rep.eve_known_fraction == 1.0
    assert rep.realized_loss == pytest.approx(1.0, abs=1e-12)
    assert rep.verdict == "secure"      # the attack passes the test


def test_product_only_raises_alarm(honest_cfg):
    rep = run_protocol(honest_cfg, build_combined_attack(honest_cfg, 0.0, seed=4), seed=4)
    assert rep.alarm
    assert abs(rep.R_obs_hat - 0.625) < 4 * rep.sigma


def test_combined_mixture_law(honest_cfg):
    k = 0.1
    rep = run_protocol(honest_cfg, build_combined_attack(honest_cfg, k, seed=7), seed=7)
    t = k / honest_cfg.f
    expected = t * R_Q2 + (1 - t) * 0.625
    assert abs(rep.R_obs_hat - expected) < 4 * rep.sigma


def test_combined_rejects_k_above_f(honest_cfg):
    with pytest.raises(InfeasibleAttack):
        build_combined_attack(honest_cfg, 0.6)


def test_sample_fixing_source_forces_rounds():
    forced = frozenset(range(0, 500, 5))
    cfg = ProtocolConfig(N=2000, f=0.1, bob_source=SampleFixing(forced))
    rep = run_protocol(cfg, seed=0)
    assert 0.0 < rep.realized_loss < 1.0


# --- sublinear attack ------------------------------------------------------------

@pytest.fixture(scope="module")
def sublinear_cfg():
    return ProtocolConfig(N=10 ** 6, f=0.001, d=2, test_size=1000)


def test_sublinear_attack(sublinear_cfg):
    strat = build_sublinear_attack(sublinear_cfg, 0.5, 0.01, seed=1)
    rep = run_protocol(sublinear_cfg, strat, seed=1)
    assert rep.realized_loss == pytest.approx(sublinear_loss(10 ** 6, 0.5, 0.01), abs=1e-9)
    assert rep.eve_known_fraction > 0.98
    assert abs(rep.R_obs_hat - R_Q2) < 4 * rep.sigma


def test_sublinear_full_preparation_has_no_loss(sublinear_cfg):
    strat = build_sublinear_attack(sublinear_cfg, 0.5, 1.0, seed=1)
    rep = run_protocol(sublinear_cfg, strat, seed=1)
    assert rep.realized_loss == 0.0
    assert rep.eve_known_fraction == 0.0


def test_sublinear_rejects_linear_sample():
    cfg = ProtocolConfig(N=10 ** 4, f=0.5)
    with pytest.raises(InfeasibleAttack):
        build_sublinear_attack(cfg, 0.5, 0.6)


def test_sublinear_rejects_small_prepared_set(sublinear_cfg):
    with pytest.raises(InfeasibleAttack):
        build_sublinear_attack(sublinear_cfg, 0.5, 0.0005)


# --- noisy attack --------------------------------------------------------------

def test_noisy_budget_properties():
    assert noisy_budget(0.0, 0.0, 0.3) == pytest.approx(0.0, abs=1e-12)
    assert noisy_budget(0.0, 0.7, 0.3) == pytest.approx(1.0, abs=1e-12)
    assert noisy_budget(0.3, 0.0, 0.3) == pytest.approx(1.0, abs=1e-12)
    vals = [noisy_budget(0.01, b, 0.3) for b in np.linspace(0, 0.69, 30)]
    assert all(x < y for x, y in zip(vals, vals[1:]))


def test_noisy_guess_bound():
    L = 0.03
    assert noisy_guess_bound(product_state_bound(L), L) == 1.0
    assert noisy_guess_bound(1.0, 0.0) == pytest.approx(0.5)


def test_noisy_zero_loss_gives_no_advantage():
    opt = noisy_strategy_optimize(0.0, 0.5, 0.78)
    assert opt.a == 0.0 and opt.b == 0.0
    assert opt.I == pytest.approx(0.78)


def check_constraints(opt, L, f, R_min):
    assert noisy_budget(opt.a, opt.b, f) <= L
    assert opt.a / f * opt.beta_qm + (1 - opt.a / f) * opt.I >= R_min - 1e-12
    assert opt.I <= opt.beta_qm + 1e-12
    assert opt.p_G == pytest.approx(noisy_guess_bound(opt.I, L))


def test_noisy_optimizer_constraints_and_monotone():
    f, R_min = 0.5, 0.79
    p = []
    for L in (0.0, 0.01, 0.02, 0.03, 0.04):
        opt = noisy_strategy_optimize(L, f, R_min)
        check_constraints(opt, L, f, R_min)
        p.append(opt.p_av)
    assert all(x <= y + 1e-12 for x, y in zip(p, p[1:]))
    assert p[-1] > p[0]


def test_noisy_optimizer_infeasible():
    with pytest.raises(NoAdmissibleAttack):
        noisy_strategy_optimize(0.01, 0.5, 0.95)


def test_noisy_attack_realization():
    cfg = ProtocolConfig(N=50_000, f=0.5, d=2)
    strat = build_noisy_attack(cfg, 0.03, 0.79, seed=2)
    rep = run_protocol(cfg, strat, seed=2)
    assert rep.attack == "noisy"
    assert rep.R_obs_hat > 0.79 - 4 * rep.sigma
    assert rep.eve_guess_fraction > 0.5


# --- configs ---------------------------------------------------------------------

def test_config_roundtrip():
    cfg = ProtocolConfig(N=1000, f=0.2, d=3, alice_source=SanthaVazirani(0.05),
                         test_size=150, assumed_loss=0.02)
    back = config_from_dict(cfg.to_dict())
    assert back.to_dict() == cfg.to_dict()
    np.testing.assert_array_equal(back.honest_behavior.table, cfg.honest_behavior.table)


def test_config_validation():
    with pytest.raises(ValueError):
        ProtocolConfig(N=100, f=1.0)
    with pytest.raises(ValueError):
        ProtocolConfig(N=100, f=0.5, test_size=100)
    with pytest.raises(ValueError):
        AttackStrategy(kind="bogus")
