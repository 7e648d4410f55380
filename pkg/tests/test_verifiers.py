"""Drift certificates: report structure, fitted constants, frozen examples."""

import json
import math

import numpy as np
import pytest

from driftlab import (
    AMParam,
    CompoundSpec,
    AdaptationRule,
    FAMILY_UNIFORM,
    GridSpec,
    METHOD_MONTE_CARLO,
    METHOD_QUADRATURE,
    PARAM_SCALAR_LOG_SCALE,
    ParamLyapunov,
    ProposalSpec,
    RULE_COERCED,
    SCENARIO_COERCED,
    ScalarParam,
    StateLyapunov,
    W_EXP_ABS,
    accept_reject_profile,
    apply_kernel_to_function,
    cross_check_kernel,
    decomposition_terms,
    deficit_loglog_slope,
    gaussian_target,
    mean_acceptance,
    normalized_kernel_gain,
    scenario_coefficients,
    smoothed_subexp_target,
    verify_acceptance_bounds,
    verify_compound_drift,
    verify_decomposition,
    verify_fixed_theta_drift,
    verify_toy,
    verify_w_drift,
)

UNIFORM_1D = ProposalSpec(family=FAMILY_UNIFORM, parametrization=PARAM_SCALAR_LOG_SCALE)


def coerced_coef(**kw):
    kw.setdefault("iota", 1.0)
    return scenario_coefficients(SCENARIO_COERCED, alpha_star=0.44, gamma_max=0.05, **kw)


# -- two-state chain ---------------------------------------------------------


def test_verify_toy_passes_with_exact_values():
    report = verify_toy(range(-3, 4))
    assert report.passed
    assert len(report.rows) == 7
    by_theta = {row.point["theta"]: row for row in report.rows}
    assert by_theta[0.0].lhs == -1.0
    assert by_theta[-3.0].lhs == pytest.approx(0.9004258632642721, abs=1e-15)
    for row in report.rows:
        assert abs(row.lhs - row.rhs) <= 1e-12
        assert row.se <= 1e-14  # invariance residual rides in the se slot


def test_report_json_contract():
    report = verify_toy([0.0, 1.0])
    doc = report.to_json_dict()
    for key in ("check", "grid", "fitted_constants", "rows", "pass"):
        assert key in doc
    for row in doc["rows"]:
        for key in ("point", "lhs", "rhs", "margin", "se", "pass"):
            assert key in row
    json.dumps(doc)  # serializable end to end


# -- fixed-parameter state drift ---------------------------------------------


def test_gaussian_tail_contracts_pointwise():
    # eta = 0.5, unit proposal radius: the kernel must strictly shrink V in
    # the tail at x in {6, 10, 20}
    t = gaussian_target(dim=1)
    lyap = StateLyapunov(t, 0.5)
    for x in (6.0, 10.0, 20.0):
        pv, _ = apply_kernel_to_function(t, UNIFORM_1D, ScalarParam(theta=0.0), lyap, x)
        assert pv - float(lyap(x)) < 0.0


def test_fixed_theta_drift_gaussian_report():
    t = gaussian_target(dim=1)
    coef = coerced_coef()
    grid = GridSpec(
        x_grid=(0.0, 3.0, 6.0, 10.0, 20.0),
        theta_grid=(0.0,),
        gamma_grid=(0.05,),
        method=METHOD_QUADRATURE,
    )
    report = verify_fixed_theta_drift(t, UNIFORM_1D, StateLyapunov(t, 0.5), coef, grid)
    assert report.passed
    assert report.fitted["a0"] > 0.0
    assert math.isfinite(report.fitted["b"])
    assert all(r.passed for r in report.rows)


def test_fixed_theta_drift_degenerate_lyapunov():
    # eta = 0 collapses V to 1: the inequality survives with a huge rate
    # divisor and unit excursion bound
    t = gaussian_target(dim=1)
    coef = coerced_coef()
    grid = GridSpec(x_grid=(0.0, 6.0), theta_grid=(0.0,), method=METHOD_QUADRATURE)
    report = verify_fixed_theta_drift(t, UNIFORM_1D, StateLyapunov(t, 0.0), coef, grid)
    assert report.passed
    assert report.fitted["b"] == pytest.approx(1.0, abs=1e-8)


def test_fixed_theta_drift_refined_grid_keeps_verdict():
    t = smoothed_subexp_target(0.5)
    coef = coerced_coef(iota=0.9)
    lyap = StateLyapunov(t, 0.5)
    coarse = GridSpec(x_grid=(6.0, 12.0, 24.0), theta_grid=(0.0,), method=METHOD_QUADRATURE)
    fine = GridSpec(
        x_grid=(6.0, 9.0, 12.0, 18.0, 24.0), theta_grid=(0.0, 0.3), method=METHOD_QUADRATURE
    )
    r1 = verify_fixed_theta_drift(t, UNIFORM_1D, lyap, coef, coarse)
    r2 = verify_fixed_theta_drift(t, UNIFORM_1D, lyap, coef, fine)
    assert r1.passed and r2.passed


def test_deficit_slope_small_radius_quadratic():
    # small radii: the deficit grows like sigma^2 (log-log slope 2 +- 0.3)
    t = smoothed_subexp_target(0.5)
    slope, deficits = deficit_loglog_slope(t, 0.5, 40.0, (0.25, 0.5, 1.0, 2.0))
    assert all(d > 0 for d in deficits)
    assert slope == pytest.approx(2.0, abs=0.3)


# -- parameter drift ----------------------------------------------------------


def test_w_drift_vanishing_stepsize_is_tight():
    t = gaussian_target(dim=1)
    rule = AdaptationRule(kind=RULE_COERCED, alpha_star=0.44)
    weight = ParamLyapunov(W_EXP_ABS)
    coef = coerced_coef()
    grid = GridSpec(
        x_grid=(0.0,), theta_grid=(5.0, -5.0), gamma_grid=(1e-12,), method=METHOD_QUADRATURE
    )
    report = verify_w_drift(t, UNIFORM_1D, rule, weight, coef, grid)
    for row in report.rows:
        theta = row.point["theta"]
        assert abs(row.lhs - math.exp(abs(theta))) <= 1e-9 * math.exp(abs(theta))


def test_w_drift_coerced_contracts_both_directions():
    # sigma far too large (theta=5): proposals are rejected, alpha < alpha*
    # drives theta down; sigma tiny (theta=-5): alpha near 1 drives theta up.
    # Both moves shrink exp(|theta|).
    t = gaussian_target(dim=1)
    rule = AdaptationRule(kind=RULE_COERCED, alpha_star=0.44)
    weight = ParamLyapunov(W_EXP_ABS)
    coef = coerced_coef()
    grid = GridSpec(
        x_grid=(0.0,), theta_grid=(5.0, -5.0), gamma_grid=(0.05,), method=METHOD_QUADRATURE
    )
    report = verify_w_drift(t, UNIFORM_1D, rule, weight, coef, grid)
    assert report.passed
    assert report.fitted["slope_c"] is not None
    assert report.fitted["delta0"] > 0.0
    for row in report.rows:
        theta = row.point["theta"]
        assert row.lhs < math.exp(abs(theta))


def test_w_drift_monte_carlo_agrees():
    t = gaussian_target(dim=1)
    rule = AdaptationRule(kind=RULE_COERCED, alpha_star=0.44)
    weight = ParamLyapunov(W_EXP_ABS)
    coef = coerced_coef()
    gq = GridSpec(x_grid=(0.0,), theta_grid=(2.0,), gamma_grid=(0.05,), method=METHOD_QUADRATURE)
    gm = GridSpec(
        x_grid=(0.0,), theta_grid=(2.0,), gamma_grid=(0.05,),
        method=METHOD_MONTE_CARLO, mc_n=200_000, seed=4,
    )
    rq = verify_w_drift(t, UNIFORM_1D, rule, weight, coef, gq)
    rm = verify_w_drift(t, UNIFORM_1D, rule, weight, coef, gm)
    assert abs(rq.rows[0].lhs - rm.rows[0].lhs) <= 4.0 * rm.rows[0].se


# -- compound drift ------------------------------------------------------------


def test_compound_drift_single_far_point_one_row():
    t = gaussian_target(dim=1)
    rule = AdaptationRule(kind=RULE_COERCED, alpha_star=0.44)
    weight = ParamLyapunov(W_EXP_ABS)
    coef = coerced_coef()
    grid = GridSpec(
        x_grid=(20.0,), theta_grid=(8.0,), gamma_grid=(0.05,),
        method=METHOD_MONTE_CARLO, mc_n=4000, seed=11,
    )
    report = verify_compound_drift(
        t, UNIFORM_1D, rule, StateLyapunov(t, 0.5), weight, CompoundSpec(), grid, coef
    )
    assert len(report.rows) == 1
    assert report.passed
    assert report.fitted["delta"] > 0.0


def test_compound_drift_excludes_joint_center():
    t = gaussian_target(dim=1)
    rule = AdaptationRule(kind=RULE_COERCED, alpha_star=0.44)
    weight = ParamLyapunov(W_EXP_ABS)
    coef = coerced_coef()
    grid = GridSpec(
        x_grid=(0.0, 10.0), theta_grid=(0.0, 8.0), gamma_grid=(0.05,),
        method=METHOD_MONTE_CARLO, mc_n=4000, seed=12,
    )
    report = verify_compound_drift(
        t, UNIFORM_1D, rule, StateLyapunov(t, 0.5), weight, CompoundSpec(), grid, coef
    )
    assert report.passed
    labels = {(row.point["theta"], row.point["x"]) for row in report.rows}
    # theta=0 (weight at the floor) and x=0 (inside the center ball) is the
    # excluded joint-center combination
    assert (0.0, 0.0) not in labels
    assert len(report.rows) == 3
    # the searched ladder is the dyadic one
    assert report.notes["searched_lam"][:3] == [1.0, 2.0, 4.0]
    assert report.notes["searched_lam"][-1] == 1024.0


# -- acceptance-rate envelopes -------------------------------------------------


def test_acceptance_bounds_subexp_pass_and_scaling():
    t = smoothed_subexp_target(0.5)
    report = verify_acceptance_bounds(
        t, sigma_grid=(1e-3, 1e-2, 0.1, 0.5, 1.0, 10.0, 100.0, 400.0, 1000.0),
        x_grid=(20.0, 40.0, 80.0),
    )
    assert report.passed
    assert math.isfinite(report.fitted["c_plus"])
    assert math.isfinite(report.fitted["c_minus"])
    assert report.fitted["stabilized_small_sigma"]
    assert report.fitted["stabilized_large_sigma"]
    # 1/sigma law at the mode: a tenfold radius cuts acceptance by 5x-20x
    for s in (1e2, 1e3):
        ratio = mean_acceptance(t, 10.0 * s, 0.0) / mean_acceptance(t, s, 0.0)
        assert 0.05 <= ratio <= 0.2


def test_acceptance_near_half_at_vanishing_radius():
    t = smoothed_subexp_target(0.5)
    for x in (20.0, 40.0):
        assert mean_acceptance(t, 1e-6, x) >= 0.5 - 1e-4


def test_acceptance_laplace_profile_closed_form():
    # exact-tail exponent 1 has log-density -|x|: at the mode with unit
    # radius the acceptance integrates to 1 - 1/e
    from driftlab import exact_tail_subexp_target

    t = exact_tail_subexp_target(1.0)
    assert mean_acceptance(t, 1.0, 0.0) == pytest.approx(1.0 - math.exp(-1.0), abs=1e-9)


# -- kernel-gain decomposition --------------------------------------------------


def test_decomposition_report_passes():
    t = smoothed_subexp_target(0.5)
    report = verify_decomposition(
        t, StateLyapunov(t, 0.5),
        sigma_grid=(1.0, 10.0, 100.0, 400.0, 1000.0),
        x_grid=(20.0, 40.0, 80.0, 160.0),
    )
    assert report.passed
    assert report.fitted["profile_max"] <= 1e-9
    assert report.fitted["cross_accept_max"] <= 1e-9
    assert report.fitted["eps_t"] > 0.0
    assert report.fitted["r_t"] is not None and report.fitted["r_t"] <= 80.0
    assert all(r.passed for r in report.rows)


def test_decomposition_residual_at_reference_point():
    t = smoothed_subexp_target(0.5)
    lhs = normalized_kernel_gain(t, 0.5, 1.0, 50.0)
    terms = decomposition_terms(t, 0.5, 1.0, 50.0)
    rhs = terms["local"] + terms["outward"] + terms["cross_accept"] + terms["cross_reject"]
    assert abs(lhs - rhs) <= 1e-6


def test_decomposition_degenerate_eta_vanishes():
    t = smoothed_subexp_target(0.5)
    terms = decomposition_terms(t, 0.0, 2.0, 30.0)
    for key in ("local", "outward", "cross_accept", "cross_reject"):
        assert abs(terms[key]) <= 1e-10
    assert abs(normalized_kernel_gain(t, 0.0, 2.0, 30.0)) <= 1e-10


def test_profile_zero_at_origin():
    t = smoothed_subexp_target(0.5)
    for x in (5.0, 20.0, 80.0):
        assert accept_reject_profile(t, 0.5, x, 0.0) == 0.0


# -- cross-method agreement ------------------------------------------------------


def test_cross_check_kernel_quadrature_vs_mc():
    t = gaussian_target(dim=1)
    report = cross_check_kernel(t, UNIFORM_1D, StateLyapunov(t, 0.5))
    assert report.passed
    assert len(report.rows) == 20
