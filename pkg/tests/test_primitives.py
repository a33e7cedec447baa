from __future__ import annotations

import math

import numpy as np
import pytest
from scipy.integrate import trapezoid

from primitives import (
    DomainError, EnvParams, Environment, ModelParams, ParameterError, QueryType,
    SharedParams, ability_mass, answer_cdf, answer_peak_density, answer_surplus,
    averaged_failure, cost_shift, outside_option, posting_cdf, private_failure,
    private_resolution, semi_elasticity, shutdown_margin,
)


def test_outside_option_scales_with_archive_and_routine_share(params: ModelParams) -> None:
    assert outside_option(0.1, 1.0, Environment.AI, params) == pytest.approx(0.1 * 1.5 * 1.2)
    # human-only outside option ignores the archive
    assert outside_option(0.1, 3.0, Environment.HO, params) == pytest.approx(0.1)


def test_cost_shift_decays_from_its_intercept(params: ModelParams) -> None:
    assert cost_shift(0.0, params) == pytest.approx(1.25)
    assert cost_shift(0.5, params) == pytest.approx(1.25 / 3.5)
    assert cost_shift(2.0, params) < cost_shift(1.0, params)


def test_empty_archive_shuts_the_platform_down(params: ModelParams) -> None:
    assert shutdown_margin(params) == pytest.approx(0.05)


def test_private_resolution_and_failure_are_complements(params: ModelParams) -> None:
    for theta in QueryType:
        a = private_resolution(theta, 0.8, Environment.AI, params)
        assert a + private_failure(theta, 0.8, Environment.AI, params) == pytest.approx(1.0)
    assert private_resolution(QueryType.H, 0.0, Environment.AI, params) == 0.0


def test_posting_cdf_uses_type_specific_scales() -> None:
    p = ModelParams(shared=SharedParams(d_bar_h=1.0))
    assert posting_cdf(1.0, p, QueryType.H) == pytest.approx(1.0 - math.exp(-1.0))
    assert posting_cdf(1.0, p, QueryType.L) == pytest.approx(1.0 - math.exp(-2.0))
    assert posting_cdf(1.0, p) == pytest.approx(1.0 - math.exp(-2.0))


def test_answer_surplus_is_continuous_at_the_support_bound(params: ModelParams) -> None:
    assert answer_surplus(0.5, params) == pytest.approx(0.125)
    assert answer_surplus(1.0, params) == pytest.approx(0.5)
    assert answer_surplus(1.0 + 1e-12, params) == pytest.approx(0.5)
    assert answer_surplus(1.5, params) == pytest.approx(1.0)


def test_h_queries_are_less_elastic_than_l_queries(params: ModelParams) -> None:
    for sigma in np.linspace(0.01, 1.0, 25):
        assert semi_elasticity(QueryType.H, float(sigma), params) < semi_elasticity(
            QueryType.L, float(sigma), params
        )
    with pytest.raises(DomainError):
        semi_elasticity(QueryType.H, 0.0, params)


def test_averaged_failure_matches_closed_form_without_slope(params: ModelParams) -> None:
    for k in (0.0, 0.3, 2.5):
        closed = math.exp(-params.ai.rho_h * k)
        assert averaged_failure(QueryType.H, k, Environment.AI, params) == pytest.approx(closed, abs=1e-12)


def test_ability_slope_switches_to_averaged_failure() -> None:
    ai = EnvParams(gamma_w=0.5, delta_w=0.5, rho_h=0.5, rho_l=1.0, rho_slope=2.0)
    p = ModelParams(ai=ai)
    sloped = private_failure(QueryType.H, 1.0, Environment.AI, p)
    assert sloped < math.exp(-0.5)
    assert sloped == pytest.approx(averaged_failure(QueryType.H, 1.0, Environment.AI, p))


def test_averaged_failure_rejects_negative_rates(params: ModelParams) -> None:
    with pytest.raises(DomainError):
        averaged_failure(QueryType.H, 1.0, Environment.AI, params, rate_fn=lambda a: a - 1.0)


@pytest.mark.parametrize(
    "kwargs",
    [{"lam": 1.0}, {"pi": 0.0}, {"kappa": 0.0}, {"v_h": 0.5}, {"alpha_lo": 0.3}, {"d_bar_h": -1.0}],
)
def test_shared_params_reject_invalid_values(kwargs: dict) -> None:
    with pytest.raises(ParameterError):
        SharedParams(**kwargs)


def test_env_params_require_routine_rate_at_least_h_rate() -> None:
    with pytest.raises(ParameterError):
        EnvParams(gamma_w=0.0, delta_w=0.0, rho_h=0.5, rho_l=0.2)


def test_ai_must_weakly_dominate_human_only() -> None:
    weak_ai = EnvParams(gamma_w=0.5, delta_w=0.5, rho_h=0.05, rho_l=1.0)
    with pytest.raises(ParameterError, match="ai.rho_h"):
        ModelParams(ai=weak_ai)


def test_with_value_accepts_lambda_and_rejects_unknown_paths(params: ModelParams) -> None:
    assert params.with_value("shared.lambda", 0.2).shared.lam == 0.2
    assert params.with_value("ai.gamma_w", 0.7).ai.gamma_w == 0.7
    assert params.ai.gamma_w == 0.5
    with pytest.raises(KeyError):
        params.with_value("ai.gamma", 0.7)
    with pytest.raises(KeyError):
        params.with_value("market.pi", 0.3)


def test_negative_archive_is_a_domain_error(params: ModelParams) -> None:
    with pytest.raises(DomainError):
        cost_shift(-0.1, params)
    with pytest.raises(DomainError):
        outside_option(0.1, -1.0, Environment.HO, params)


def test_closed_form_values_of_the_parametric_example(params: ModelParams) -> None:
    assert cost_shift(1.0, params) == pytest.approx(1.25 / 6.0)
    assert private_resolution(QueryType.H, 2.0, Environment.AI, params) == pytest.approx(0.63212, abs=1e-5)
    assert private_resolution(QueryType.L, 1.0, Environment.AI, params) == pytest.approx(0.63212, abs=1e-5)
    assert posting_cdf(0.0, params) == 0.0
    assert posting_cdf(0.5, params) == pytest.approx(0.63212, abs=1e-5)
    assert ability_mass(0.1, params) == pytest.approx(0.49749, abs=1e-5)
    assert ability_mass(params.shared.alpha_lo, params) == 0.0
    assert ability_mass(params.shared.alpha_hi, params) == 1.0
    assert answer_cdf(0.3, params) == pytest.approx(0.3)
    assert answer_cdf(2.0, params) == 1.0
    assert answer_peak_density(params) == 1.0
    assert answer_surplus(0.0, params) == 0.0
    assert answer_surplus(0.3, params) == pytest.approx(0.045)
    assert answer_surplus(1.2, params) == pytest.approx(0.7)


def test_semi_elasticities_at_one_half(params: ModelParams) -> None:
    l_h = semi_elasticity(QueryType.H, 0.5, params)
    l_l = semi_elasticity(QueryType.L, 0.5, params)
    assert l_h == pytest.approx(0.6261, abs=1e-4)
    assert l_l == pytest.approx(1.1640, abs=1e-4)
    assert l_h - l_l == pytest.approx(-0.538, abs=1e-3)


def test_averaged_failure_against_fine_quadrature(params: ModelParams) -> None:
    alphas = np.linspace(0.001, 0.2, 100_001)
    oracle = trapezoid(np.exp(-(0.5 + alphas)), alphas) / (0.2 - 0.001)
    value = averaged_failure(QueryType.H, 1.0, Environment.AI, params, rate_fn=lambda a: 0.5 + a)
    assert value == pytest.approx(oracle, abs=1e-6)
    assert averaged_failure(QueryType.H, 0.0, Environment.AI, params, rate_fn=lambda a: 0.5 + a) == pytest.approx(1.0)


def test_primitives_are_monotone_on_random_grids(params: ModelParams) -> None:
    rng = np.random.default_rng(11)
    s = params.shared
    ks = np.sort(rng.uniform(0.0, 20.0, 200))
    alphas = np.sort(rng.uniform(s.alpha_lo, s.alpha_hi, 50))
    for env in Environment:
        for alpha in alphas:
            w = [outside_option(float(alpha), float(k), env, params) for k in ks]
            assert all(a <= b for a, b in zip(w, w[1:]))
        for theta in QueryType:
            a = [private_resolution(theta, float(k), env, params) for k in ks]
            assert all(x <= y for x, y in zip(a, a[1:]))
    for k in ks[::20]:
        w = [outside_option(float(alpha), float(k), Environment.AI, params) for alpha in np.unique(alphas)]
        assert all(x < y for x, y in zip(w, w[1:]))
    c = [cost_shift(float(k), params) for k in np.unique(ks)]
    assert all(x > y for x, y in zip(c, c[1:]))


def test_ai_dominates_human_only_on_a_random_grid(params: ModelParams) -> None:
    rng = np.random.default_rng(13)
    s = params.shared
    for k, alpha in zip(rng.uniform(0.0, 20.0, 500), rng.uniform(s.alpha_lo, s.alpha_hi, 500)):
        k, alpha = float(k), float(alpha)
        assert outside_option(alpha, k, Environment.AI, params) >= outside_option(
            alpha, k, Environment.HO, params
        )
        for theta in QueryType:
            assert private_resolution(theta, k, Environment.AI, params) >= private_resolution(
                theta, k, Environment.HO, params
            )
