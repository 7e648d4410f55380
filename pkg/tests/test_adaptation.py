"""Update rules, stepsize schedules, sign-change counting."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from driftlab import (
    AdaptationRule,
    ConstantSchedule,
    KestenSchedule,
    MeanFieldAM,
    PolynomialSchedule,
    RULE_COERCED,
    RULE_FIXED,
    am_increment,
    am_update,
    coerced_update,
    fast_coerced_update,
    gamma_at,
    inverse_diff_limsup,
    kesten_advance,
    mean_field_am,
)


def test_polynomial_schedule_values():
    s = PolynomialSchedule(c0=1.0, c1=0.0, a=0.6)
    assert gamma_at(s, 100) == pytest.approx(0.06309573444801933, rel=1e-15)
    assert gamma_at(s, 1) == 1.0
    big = PolynomialSchedule(c0=100.0, c1=0.0, a=1.0)
    assert gamma_at(big, 1) == 100.0
    assert gamma_at(big, 4) == 25.0
    with pytest.raises(ValueError):
        gamma_at(s, 0)
    with pytest.raises(ValueError):
        PolynomialSchedule(c0=0.0)
    with pytest.raises(ValueError):
        PolynomialSchedule(c0=1.0, a=1.5)


def test_constant_schedule_values():
    s = ConstantSchedule(0.02)
    assert gamma_at(s, 1) == 0.02
    assert gamma_at(s, 10**6) == 0.02
    with pytest.raises(ValueError):
        ConstantSchedule(0.0)
    with pytest.raises(ValueError):
        ConstantSchedule(1.0)


def test_kesten_schedule_needs_count():
    s = KestenSchedule(c0=0.5, a=0.6)
    assert gamma_at(s, 7, kesten_count=0) == 0.5
    assert gamma_at(s, 7, kesten_count=3) == pytest.approx(0.5 / 4**0.6, rel=1e-15)
    with pytest.raises(ValueError):
        gamma_at(s, 7)


def test_inverse_diff_limsup():
    # a = 1: 1/gamma_{i+1} - 1/gamma_i = 1/c0 exactly
    assert inverse_diff_limsup(PolynomialSchedule(c0=4.0, c1=2.0, a=1.0)) == pytest.approx(0.25)
    # a < 1: differences vanish
    assert inverse_diff_limsup(PolynomialSchedule(c0=1.0, a=0.6)) == 0.0
    assert inverse_diff_limsup(ConstantSchedule(0.1)) == 0.0
    with pytest.raises(ValueError):
        inverse_diff_limsup(KestenSchedule(c0=1.0))


def test_am_update_frozen_values():
    mu2, cov2 = am_update(0.0, 1.0, 2.0, 0.1)
    assert mu2 == pytest.approx(np.array([0.2]), abs=0.0)
    assert cov2 == pytest.approx(np.array([[1.3]]), rel=1e-15)
    with pytest.raises(ValueError):
        am_update(0.0, 1.0, 2.0, 1.0)
    with pytest.raises(ValueError):
        am_update(0.0, 1.0, 2.0, 0.0)


def test_am_update_preserves_psd():
    rng = np.random.default_rng(3)
    cov = np.eye(2)
    mu = np.zeros(2)
    for _ in range(200):
        x = rng.normal(size=2) * 3.0
        mu, cov = am_update(mu, cov, x, 0.05)
        assert np.linalg.eigvalsh(cov).min() > 0.0


def test_am_increment_frozen():
    h = am_increment(0.0, 1.0, 2.0)
    assert h == pytest.approx(np.array([2.0, 3.0]), abs=0.0)


def test_coerced_updates_frozen_values():
    assert coerced_update(2.0, 1.0, 0.1, 0.44) == pytest.approx(2.056, rel=1e-15)
    assert coerced_update(-1.2, 0.24, 0.1, 0.44) == pytest.approx(-1.22, rel=1e-14)
    assert fast_coerced_update(2.0, 1.0, 0.1, 0.44) == pytest.approx(2.168, rel=1e-15)
    with pytest.raises(ValueError):
        coerced_update(0.0, 1.2, 0.1, 0.44)
    with pytest.raises(ValueError):
        coerced_update(0.0, 0.5, -0.1, 0.44)
    with pytest.raises(ValueError):
        coerced_update(0.0, 0.5, 0.1, 0.6)


@settings(max_examples=100, deadline=None)
@given(
    theta=st.floats(min_value=-50.0, max_value=50.0),
    alpha=st.floats(min_value=0.0, max_value=1.0),
    gamma=st.floats(min_value=1e-6, max_value=0.9),
)
def test_coerced_step_size_envelopes(theta, alpha, gamma):
    a_star = 0.44
    d1 = abs(coerced_update(theta, alpha, gamma, a_star) - theta)
    assert d1 <= gamma * max(a_star, 1.0 - a_star) + 1e-15
    d2 = abs(fast_coerced_update(theta, alpha, gamma, a_star) - theta)
    assert d2 <= gamma * (abs(theta) + 1.0) * max(a_star, 1.0 - a_star) * (1.0 + 1e-12)


def test_kesten_advance_strict_sign():
    assert kesten_advance(0, [1.0], [-1.0]) == 1
    assert kesten_advance(2, [1.0], [1.0]) == 2
    assert kesten_advance(2, [1.0], [0.0]) == 2  # zero product: no advance
    assert kesten_advance(0, [1.0, -1.0], [1.0, 1.0]) == 0
    with pytest.raises(ValueError):
        kesten_advance(-1, [1.0], [1.0])
    with pytest.raises(ValueError):
        kesten_advance(0, [1.0], [1.0, 2.0])


def test_mean_field_vanishes_at_true_moments():
    m = MeanFieldAM(mu_pi=np.array([-1.0]), cov_pi=np.array([[4.0]]))
    dmu, dcov = mean_field_am(np.array([-1.0]), np.array([[4.0]]), m)
    assert dmu == pytest.approx(np.zeros(1), abs=0.0)
    assert dcov == pytest.approx(np.zeros((1, 1)), abs=0.0)
    dmu2, dcov2 = mean_field_am(np.array([0.0]), np.array([[1.0]]), m)
    assert dmu2 == pytest.approx(np.array([-1.0]), abs=0.0)
    assert dcov2 == pytest.approx(np.array([[4.0]]), abs=0.0)


def test_rule_validation():
    with pytest.raises(ValueError):
        AdaptationRule(kind="nope")
    with pytest.raises(ValueError):
        AdaptationRule(kind=RULE_COERCED)  # missing alpha_star
    with pytest.raises(ValueError):
        AdaptationRule(kind=RULE_COERCED, alpha_star=0.5)
    AdaptationRule(kind=RULE_FIXED)  # no extra arguments needed
