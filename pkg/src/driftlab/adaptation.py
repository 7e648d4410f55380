"""Adaptation rules and stepsize schedules.

Parameter updates implemented here:

* running-moments update (mean and covariance driven by the new state);
* acceptance-coercion update ``theta += gamma * (alpha - alpha_star)`` keyed
  to the proposed move's acceptance probability, with a fast variant scaled
  by ``|theta| + 1``;
* the toy mean-tracking update ``theta += gamma * (1/2 - x)``.

Stepsizes come from polynomial or constant schedules, or from the
sign-change counting rule: the stepsize index advances only when successive
update increments point in opposing directions (strict negative inner
product).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

RULE_AM = "am"
RULE_COERCED = "coerced"
RULE_FAST_COERCED = "fast_coerced"
RULE_TOY_MEAN = "toy_mean"
RULE_FIXED = "fixed"
RULES = (RULE_AM, RULE_COERCED, RULE_FAST_COERCED, RULE_TOY_MEAN, RULE_FIXED)


@dataclass(frozen=True)
class AdaptationRule:
    """Which update map drives the kernel parameter.

    ``alpha_star`` is the coerced acceptance level; it must lie in (0, 1/2)
    and is ignored by the other kinds.  ``fixed`` freezes the parameter
    (useful for fixed-kernel diagnostics).
    """

    kind: str
    alpha_star: Optional[float] = None

    def __post_init__(self):
        if self.kind not in RULES:
            raise ValueError(f"unknown adaptation rule {self.kind!r}")
        if self.kind in (RULE_COERCED, RULE_FAST_COERCED):
            if self.alpha_star is None or not (0.0 < self.alpha_star < 0.5):
                raise ValueError("coerced rules require alpha_star in (0, 1/2)")


@dataclass(frozen=True)
class PolynomialSchedule:
    """gamma_i = c0 / (c1 + i)**a for step index i >= 1."""

    c0: float
    c1: float = 0.0
    a: float = 1.0

    def __post_init__(self):
        if not (self.c0 > 0):
            raise ValueError("c0 must be positive")
        if self.c1 < 0:
            raise ValueError("c1 must be non-negative")
        if not (0.0 < self.a <= 1.0):
            raise ValueError("exponent a must lie in (0, 1]")
        if self.c1 == 0.0 and self.a == 0.0:
            raise ValueError("degenerate schedule")


@dataclass(frozen=True)
class ConstantSchedule:
    """gamma_i = gamma0 for every step."""

    gamma0: float

    def __post_init__(self):
        if not (0.0 < self.gamma0 < 1.0):
            raise ValueError("gamma0 must lie in (0, 1)")


@dataclass(frozen=True)
class KestenSchedule:
    """Stepsize gamma(s) = c0 / (1 + s)**a indexed by the sign-change count.

    The count ``s`` lives in the chain state, not here; the schedule object
    is only the non-increasing map from counts to stepsizes.
    """

    c0: float
    a: float = 0.6

    def __post_init__(self):
        if not (self.c0 > 0):
            raise ValueError("c0 must be positive")
        if not (0.0 < self.a <= 1.0):
            raise ValueError("exponent a must lie in (0, 1]")

    def gamma_of_count(self, s: int) -> float:
        if s < 0:
            raise ValueError("sign-change count must be non-negative")
        return self.c0 / (1.0 + s) ** self.a


Schedule = PolynomialSchedule | ConstantSchedule | KestenSchedule


def gamma_at(schedule: Schedule, i: int, kesten_count: Optional[int] = None) -> float:
    """Stepsize at step index ``i`` (1-based).

    For the sign-change schedule the count must be supplied, since the
    stepsize is a function of the realized trajectory, not of ``i``.
    """
    if i < 1:
        raise ValueError("step index must be >= 1")
    if isinstance(schedule, PolynomialSchedule):
        return schedule.c0 / (schedule.c1 + i) ** schedule.a
    if isinstance(schedule, ConstantSchedule):
        return schedule.gamma0
    if isinstance(schedule, KestenSchedule):
        if kesten_count is None:
            raise ValueError("sign-change schedule requires the current count")
        return schedule.gamma_of_count(kesten_count)
    raise ValueError(f"unknown schedule {schedule!r}")


def inverse_diff_limsup(schedule: Schedule) -> float:
    """Limit superior of gamma_{i+1}**-1 - gamma_i**-1 along the schedule.

    For the polynomial schedule the successive inverse differences converge:
    to 0 when the exponent is below 1, and exactly to 1/c0 when the exponent
    equals 1 (so the slow-adaptation condition at exponent 1 requires
    1/c0 plus the limiting stepsize to stay below the drift slope at 0).
    Constant schedules give 0.  The sign-change schedule is data-dependent
    and has no analytic value.
    """
    if isinstance(schedule, PolynomialSchedule):
        if schedule.a < 1.0:
            return 0.0
        return 1.0 / schedule.c0
    if isinstance(schedule, ConstantSchedule):
        return 0.0
    if isinstance(schedule, KestenSchedule):
        raise ValueError("sign-change schedule has no analytic inverse-difference limit")
    raise ValueError(f"unknown schedule {schedule!r}")


# ---------------------------------------------------------------------------
# update maps


def am_update(mu, cov, x_new, gamma: float) -> tuple[np.ndarray, np.ndarray]:
    """Running-moments update driven by the new state.

    ``gamma`` must lie strictly inside (0, 1): the covariance update is a
    convex combination plus a rank-one term, and stepsizes at or beyond 1
    lose positive semidefiniteness.
    """
    if not (0.0 < gamma < 1.0):
        raise ValueError("gamma must lie strictly in (0, 1)")
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    cov = np.asarray(cov, dtype=float)
    if cov.shape == ():
        cov = cov.reshape(1, 1)
    x_new = np.atleast_1d(np.asarray(x_new, dtype=float))
    d = x_new - mu
    mu2 = mu + gamma * d
    cov2 = cov + gamma * (np.outer(d, d) - cov)
    return mu2, cov2


def am_increment(mu, cov, x_new) -> np.ndarray:
    """Flattened update direction of the running-moments rule.

    Used for sign-change detection: the inner product of successive
    increments decides whether the stepsize index advances.
    """
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    cov = np.asarray(cov, dtype=float)
    if cov.shape == ():
        cov = cov.reshape(1, 1)
    d = np.atleast_1d(np.asarray(x_new, dtype=float)) - mu
    return np.concatenate([d, (np.outer(d, d) - cov).ravel()])


def coerced_update(theta: float, alpha_val: float, gamma: float, alpha_star: float) -> float:
    """theta + gamma * (alpha - alpha_star)."""
    _check_coerced_args(alpha_val, gamma, alpha_star)
    return theta + gamma * (alpha_val - alpha_star)


def fast_coerced_update(theta: float, alpha_val: float, gamma: float, alpha_star: float) -> float:
    """theta + gamma * (|theta| + 1) * (alpha - alpha_star)."""
    _check_coerced_args(alpha_val, gamma, alpha_star)
    return theta + gamma * (abs(theta) + 1.0) * (alpha_val - alpha_star)


def _check_coerced_args(alpha_val: float, gamma: float, alpha_star: float) -> None:
    if not (0.0 <= alpha_val <= 1.0):
        raise ValueError("alpha must lie in [0, 1]")
    if not (gamma > 0.0):
        raise ValueError("gamma must be positive")
    if not (0.0 < alpha_star < 0.5):
        raise ValueError("alpha_star must lie in (0, 1/2)")


def kesten_advance(s: int, h_prev, h_cur) -> int:
    """Advance the sign-change count iff successive increments oppose.

    The comparison is strict: a zero inner product does not advance the
    count.
    """
    if s < 0:
        raise ValueError("sign-change count must be non-negative")
    hp = np.ravel(np.asarray(h_prev, dtype=float))
    hc = np.ravel(np.asarray(h_cur, dtype=float))
    if hp.shape != hc.shape:
        raise ValueError("increment shapes differ")
    return s + 1 if float(hp @ hc) < 0.0 else s


@dataclass(frozen=True)
class MeanFieldAM:
    """True first and second central moments of the target."""

    mu_pi: np.ndarray
    cov_pi: np.ndarray

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.mu_pi, dtype=float))
        cov = np.asarray(self.cov_pi, dtype=float)
        if cov.shape == ():
            cov = cov.reshape(1, 1)
        object.__setattr__(self, "mu_pi", mu)
        object.__setattr__(self, "cov_pi", cov)
        if cov.shape != (mu.shape[0], mu.shape[0]):
            raise ValueError("cov_pi shape must match mu_pi")


def mean_field_am(mu, cov, moments: MeanFieldAM) -> tuple[np.ndarray, np.ndarray]:
    """Mean field of the running-moments update at (mu, cov).

    Vanishes exactly at (mu_pi, cov_pi): the update's unique root.
    """
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    cov = np.asarray(cov, dtype=float)
    if cov.shape == ():
        cov = cov.reshape(1, 1)
    d = moments.mu_pi - mu
    return d, np.outer(d, d) + moments.cov_pi - cov
