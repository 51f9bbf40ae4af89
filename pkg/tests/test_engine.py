"""Calibration, noise plans, samplers, the ledger, and detection."""

from __future__ import annotations

import math

import numpy as np
import pytest

from privdist.engine import (BudgetError, BudgetLedger, CalibrationError,
                             NoiseKind, NoisePlan, PrivacyParams, Sampler,
                             SvtState, calibrate, calibration_residual,
                             exact_plan, measure, mistake_budget,
                             sample_gaussian, sample_laplace, svt_step,
                             tail_probability)


def test_privacy_params_validation():
    PrivacyParams(1.0, 0.0, 0.1, 10)
    with pytest.raises(ValueError):
        PrivacyParams(0.0, 0.0, 0.1, 10)
    with pytest.raises(ValueError):
        PrivacyParams(1.0, 1.0, 0.1, 10)
    with pytest.raises(ValueError):
        PrivacyParams(1.0, 0.0, 0.0, 10)
    with pytest.raises(ValueError):
        PrivacyParams(1.0, 0.0, 0.1, 0)


def test_mistake_budget_formula():
    # dim * ceil(3 / sqrt(alpha / (2 dim)))
    assert mistake_budget(0.2, 1) == math.ceil(3 / math.sqrt(0.1))
    assert mistake_budget(0.2, 2) == 2 * math.ceil(3 / math.sqrt(0.05))
    assert mistake_budget(0.05, 4) == 4 * math.ceil(3 / math.sqrt(0.00625))


def test_exact_plan_is_silent():
    plan = exact_plan(0.2, 2)
    assert plan.noise_kind is NoiseKind.OFF
    assert plan.svt_threshold_scale == 0.0
    assert plan.measurement_scale == 0.0
    assert plan.eps_per_mistake == 0.0
    assert plan.m == mistake_budget(0.2, 2)
    assert plan.alpha1 == pytest.approx(0.1)
    assert plan.tolerance == pytest.approx(0.025)
    assert plan.threshold == pytest.approx(0.1)
    assert plan.coord_threshold == pytest.approx(0.05)


def test_plan_rejects_underfunded_budget():
    with pytest.raises(ValueError, match="below required"):
        NoisePlan(alpha=0.2, dim=1, m=2, s_count=2, sensitivity=0.0,
                  noise_kind=NoiseKind.OFF, svt_threshold_scale=0.0,
                  svt_query_scale=0.0, measurement_scale=0.0,
                  eps_per_mistake=0.0, eps_per_measurement=0.0,
                  delta_per_measurement=0.0)


# Fixed points computed independently of the implementation:
# alpha_pure(q) = 4 d (3000/(n eps)) (2d)(dq) ln(k/beta) at the smallest
# self-consistent q, and similarly for the approximate regime.
PURE_CASES = [
    ((30.0, 0.0, 0.1, 100), 10**5, 1, 7, 0.38683429562299965),
    ((5.0, 0.0, 0.05, 1000), 10**6, 1, 8, 0.38029392201738726),
    ((2.0, 0.0, 0.1, 500), 10**7, 2, 16, 0.6541204371007671),
    ((1.0, 0.0, 0.1, 100), 10**8, 4, 36, 0.9549280897664906),
]

APPROX_CASES = [
    ((30.0, 1e-6, 0.1, 100), 10**6, 1, 10, 0.1878482214968711),
    ((5.0, 1e-6, 0.1, 100), 10**7, 1, 13, 0.1285079554795872),
    ((2.0, 1e-8, 0.05, 500), 10**8, 2, 26, 0.22325014593431694),
    ((1.0, 1e-6, 0.1, 100), 10**9, 4, 92, 0.1367452479357485),
]


@pytest.mark.parametrize("p, n, dim, m, alpha", PURE_CASES)
def test_calibrate_pure_fixed_points(p, n, dim, m, alpha):
    params = PrivacyParams(*p)
    plan = calibrate(params, n, dim, NoiseKind.LAPLACE)
    assert plan.m == m
    assert plan.alpha == pytest.approx(alpha, rel=1e-12)
    assert calibration_residual(plan, params, n) <= 1e-9
    assert plan.m >= mistake_budget(plan.alpha, dim)


@pytest.mark.parametrize("p, n, dim, m, alpha", APPROX_CASES)
def test_calibrate_approx_fixed_points(p, n, dim, m, alpha):
    params = PrivacyParams(*p)
    plan = calibrate(params, n, dim, NoiseKind.GAUSSIAN)
    assert plan.m == m
    assert plan.alpha == pytest.approx(alpha, rel=1e-12)
    assert calibration_residual(plan, params, n) <= 1e-9


def test_calibrate_noise_scales_and_charges():
    params = PrivacyParams(30.0, 0.0, 0.1, 100)
    n = 10**5
    plan = calibrate(params, n, 1, NoiseKind.LAPLACE)
    delta_sens = 2.0 / n
    assert plan.sensitivity == delta_sens
    assert plan.svt_threshold_scale == pytest.approx(4 * plan.m * delta_sens / 30.0)
    assert plan.svt_query_scale == pytest.approx(8 * plan.m * delta_sens / 30.0)
    assert plan.measurement_scale == pytest.approx(
        2 * plan.m * plan.s_count * delta_sens / 30.0)
    assert plan.eps_per_mistake == pytest.approx(30.0 / (2 * plan.m))
    assert plan.eps_per_measurement == pytest.approx(
        30.0 / (2 * plan.m * plan.s_count))
    # spending every mistake and every measurement exactly exhausts epsilon
    total = plan.m * plan.eps_per_mistake \
        + plan.m * plan.s_count * plan.eps_per_measurement
    assert total == pytest.approx(30.0)


def test_calibrate_gaussian_scales():
    params = PrivacyParams(30.0, 1e-6, 0.1, 100)
    n = 10**6
    plan = calibrate(params, n, 1, NoiseKind.GAUSSIAN)
    delta_sens = 2.0 / n
    expect = (2 * delta_sens / 30.0) * math.sqrt(
        2 * plan.m * plan.s_count * math.log(2 / 1e-6))
    assert plan.measurement_scale == pytest.approx(expect)
    assert plan.delta_per_measurement == pytest.approx(
        1e-6 / (plan.m * plan.s_count))
    total_delta = plan.m * plan.s_count * plan.delta_per_measurement
    assert total_delta == pytest.approx(1e-6)


def test_calibrate_off_follows_delta_regime():
    pure = calibrate(PrivacyParams(30.0, 0.0, 0.1, 100), 10**5, 1, NoiseKind.OFF)
    assert pure.noise_kind is NoiseKind.OFF
    assert pure.measurement_scale == 0.0
    assert pure.alpha == pytest.approx(PURE_CASES[0][4], rel=1e-12)
    approx = calibrate(PrivacyParams(30.0, 1e-6, 0.1, 100), 10**6, 1, NoiseKind.OFF)
    assert approx.alpha == pytest.approx(APPROX_CASES[0][4], rel=1e-12)


def test_calibrate_infeasible_reports_min_alpha():
    with pytest.raises(CalibrationError) as exc:
        calibrate(PrivacyParams(1.0, 0.0, 0.1, 100), 100, 1, NoiseKind.LAPLACE)
    assert exc.value.min_alpha > 1.0


def test_calibrate_gaussian_needs_delta():
    with pytest.raises(ValueError, match="delta"):
        calibrate(PrivacyParams(1.0, 0.0, 0.1, 100), 10**6, 1, NoiseKind.GAUSSIAN)


def test_calibrated_alpha_decreases_with_n():
    params = PrivacyParams(1.0, 0.0, 0.1, 100)
    alphas = [calibrate(params, n, 1, NoiseKind.LAPLACE).alpha
              for n in (10**8, 10**9, 10**10)]
    assert alphas[0] > alphas[1] > alphas[2]


# ---------------------------------------------------------------------------
# Sampling

def test_zero_scale_draws_nothing():
    rng = np.random.default_rng(5)
    before = rng.bit_generator.state
    assert sample_laplace(rng, 0.0) == 0.0
    assert sample_gaussian(rng, 0.0) == 0.0
    assert rng.bit_generator.state == before


def test_off_sampler_is_silent():
    s = Sampler.from_seed(1, NoiseKind.OFF)
    plan = exact_plan(0.2, 1)
    assert s.laplace(1.0) == 0.0
    assert s.measurement_noise(plan) == 0.0


def test_sampler_reproducible():
    a = [Sampler.from_seed(3).laplace(0.5) for _ in range(3)]
    s = Sampler.from_seed(3)
    b = [s.laplace(0.5) for _ in range(3)]
    assert a[0] == b[0]  # fresh generator per construction
    assert len(set(b)) == 3


def test_tail_probability_formulas():
    assert tail_probability(NoiseKind.LAPLACE, 2.0, 2.0) == pytest.approx(
        math.exp(-1.0))
    assert tail_probability(NoiseKind.GAUSSIAN, 1.0, 2.0) == pytest.approx(
        math.erfc(2.0 / math.sqrt(2.0)))
    assert tail_probability(NoiseKind.OFF, 1.0, 0.5) == 0.0
    with pytest.raises(ValueError):
        tail_probability(NoiseKind.LAPLACE, 1.0, -1.0)


# ---------------------------------------------------------------------------
# Ledger and detection

def _noisy_plan():
    return calibrate(PrivacyParams(30.0, 0.0, 0.1, 100), 10**5, 1,
                     NoiseKind.LAPLACE)


def test_ledger_mistake_accounting():
    plan = _noisy_plan()
    params = PrivacyParams(30.0, 0.0, 0.1, 100)
    ledger = BudgetLedger.for_run(params, plan)
    for _ in range(plan.m):
        ledger.charge_mistake(plan)
    assert ledger.exhausted
    assert ledger.epsilon_spent == pytest.approx(15.0)
    with pytest.raises(BudgetError, match="mistake"):
        ledger.charge_mistake(plan)


def test_ledger_measurement_cap():
    plan = _noisy_plan()
    ledger = BudgetLedger.for_run(PrivacyParams(30.0, 0.0, 0.1, 100), plan)
    for _ in range(plan.m * plan.s_count):
        ledger.charge_measurement(plan)
    assert ledger.epsilon_spent == pytest.approx(15.0)
    with pytest.raises(BudgetError, match="measurement"):
        ledger.charge_measurement(plan)


def test_ledger_never_exceeds_epsilon():
    plan = _noisy_plan()
    ledger = BudgetLedger.for_run(PrivacyParams(30.0, 0.0, 0.1, 100), plan)
    for _ in range(plan.m):
        ledger.charge_mistake(plan)
    for _ in range(plan.m * plan.s_count):
        ledger.charge_measurement(plan)
    assert ledger.epsilon_spent <= 30.0 + 1e-9


def test_svt_noise_free_fires_exactly_on_threshold_crossing():
    plan = exact_plan(0.2, 1)
    sampler = Sampler.from_seed(0, NoiseKind.OFF)
    ledger = BudgetLedger.for_run(PrivacyParams(1.0, 0.0, 0.1, 10), plan)
    state = SvtState.fresh(plan, sampler)
    assert not svt_step(state, 0.05, plan, sampler, ledger)  # below alpha/2
    assert not svt_step(state, 0.1, plan, sampler, ledger)   # ties stay below
    assert svt_step(state, 0.11, plan, sampler, ledger)
    assert ledger.mistakes_used == 1


def test_svt_respects_custom_threshold():
    plan = exact_plan(0.2, 2)
    sampler = Sampler.from_seed(0, NoiseKind.OFF)
    ledger = BudgetLedger.for_run(PrivacyParams(1.0, 0.0, 0.1, 10), plan)
    state = SvtState.fresh(plan, sampler)
    assert svt_step(state, 0.06, plan, sampler, ledger,
                    threshold=plan.coord_threshold)
    assert not svt_step(state, 0.04, plan, sampler, ledger,
                        threshold=plan.coord_threshold)


def test_svt_rearms_threshold_noise_on_fire():
    plan = _noisy_plan()
    params = PrivacyParams(30.0, 0.0, 0.1, 100)
    sampler = Sampler.from_seed(12, NoiseKind.LAPLACE)
    ledger = BudgetLedger.for_run(params, plan)
    state = SvtState.fresh(plan, sampler)
    seen = {state.threshold_noise}
    fired = 0
    while not ledger.exhausted and fired < 3:
        if svt_step(state, 10.0, plan, sampler, ledger):
            fired += 1
            seen.add(state.threshold_noise)
    assert len(seen) == fired + 1  # fresh draw after every firing


def test_svt_refuses_exhausted_ledger():
    plan = exact_plan(0.5, 1)
    sampler = Sampler.from_seed(0, NoiseKind.OFF)
    ledger = BudgetLedger.for_run(PrivacyParams(1.0, 0.0, 0.1, 10), plan)
    state = SvtState.fresh(plan, sampler)
    while not ledger.exhausted:
        svt_step(state, 1.0, plan, sampler, ledger)
    with pytest.raises(BudgetError):
        svt_step(state, 1.0, plan, sampler, ledger)


def test_measure_charges_and_perturbs():
    plan = _noisy_plan()
    sampler = Sampler.from_seed(2, NoiseKind.LAPLACE)
    ledger = BudgetLedger.for_run(PrivacyParams(30.0, 0.0, 0.1, 100), plan)
    got = measure(0.5, plan, sampler, ledger)
    assert ledger.measurements_used == 1
    assert got != 0.5
    silent = Sampler.from_seed(2, NoiseKind.OFF)
    assert measure(0.5, plan, silent, ledger) == 0.5
