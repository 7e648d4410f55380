"""Grid certificates for the drift inequalities.

Each verifier evaluates both sides of one inequality on a finite grid,
fits the free constants the inequality only asserts to exist, freezes
them, and reports per-point margins.  A report is a certificate over its
grid, not a proof over the whole space.

Margin rules: quadrature points pass at absolute tolerance ``1e-9``;
Monte-Carlo points pass only when the margin exceeds three standard
errors.  Fitted constants get a hair of headroom so frozen reports pass
their own rule strictly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .adaptation import (
    RULE_AM,
    RULE_COERCED,
    RULE_FAST_COERCED,
    RULE_FIXED,
    AdaptationRule,
    am_update,
)
from .kernels import (
    FAMILY_UNIFORM,
    PARAM_AM_COVARIANCE,
    PARAM_SCALAR_LOG_SCALE,
    AMParam,
    ProposalSpec,
    ScalarParam,
    accept_prob,
    apply_kernel_to_function,
    draw_increments,
    mean_acceptance,
    proposal_covariance,
    toy_transition_matrix,
)
from .lyapunov import (
    CompoundSpec,
    DriftCoefficients,
    ParamLyapunov,
    StateLyapunov,
    W_AM_POLY,
    W_EXP_ABS,
    W_ONE_PLUS_SQUARE,
)
from .quadrature import integrate_interval
from .streams import substream
from .targets import TailKind, TargetModel, matched_density_point

METHOD_QUADRATURE = "quadrature"
METHOD_MONTE_CARLO = "monte_carlo"

DEFAULT_QUAD_TOL = 1e-9
MC_SE_FACTOR = 3.0
HEADROOM = 1e-9


@dataclass(frozen=True)
class GridSpec:
    """Evaluation grid plus estimation method for one verifier run."""

    x_grid: tuple
    theta_grid: tuple = ()
    gamma_grid: tuple = (0.05,)
    method: str = METHOD_QUADRATURE
    mc_n: int = 10_000
    seed: int = 2024

    def __post_init__(self):
        if len(self.x_grid) == 0:
            raise ValueError("x_grid must be non-empty")
        if self.method not in (METHOD_QUADRATURE, METHOD_MONTE_CARLO):
            raise ValueError(f"unknown method {self.method!r}")
        if self.method == METHOD_MONTE_CARLO and self.mc_n < 1000:
            raise ValueError("Monte-Carlo grids need mc_n >= 1000")
        if any(g <= 0 for g in self.gamma_grid):
            raise ValueError("gamma_grid entries must be positive")


@dataclass
class DriftRow:
    point: dict
    lhs: float
    rhs: float
    margin: float
    se: float
    passed: bool


@dataclass
class DriftReport:
    check: str
    grid: dict
    fitted: dict
    rows: list[DriftRow]
    passed: bool
    notes: dict = field(default_factory=dict)

    @property
    def worst_point(self) -> Optional[dict]:
        if not self.rows:
            return None
        worst = min(self.rows, key=lambda r: r.margin)
        return {"point": worst.point, "margin": worst.margin}

    def to_json_dict(self) -> dict:
        return {
            "check": self.check,
            "grid": self.grid,
            "fitted_constants": {k: _jsonable(v) for k, v in self.fitted.items()},
            "rows": [
                {
                    "point": {k: _jsonable(v) for k, v in r.point.items()},
                    "lhs": _jsonable(r.lhs),
                    "rhs": _jsonable(r.rhs),
                    "margin": _jsonable(r.margin),
                    "se": _jsonable(r.se),
                    "pass": bool(r.passed),
                }
                for r in self.rows
            ],
            "pass": bool(self.passed),
            "worst_point": _jsonable_tree(self.worst_point),
            "notes": _jsonable_tree(self.notes),
        }


def _jsonable(v):
    if isinstance(v, (bool, int, str)) or v is None:
        return v
    if isinstance(v, (float, np.floating)):
        f = float(v)
        return f if math.isfinite(f) else repr(f)
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_jsonable(u) for u in np.asarray(v).tolist()] if isinstance(v, np.ndarray) else [
            _jsonable(u) for u in v
        ]
    if isinstance(v, dict):
        return {k: _jsonable(u) for k, u in v.items()}
    if isinstance(v, (np.integer,)):
        return int(v)
    return repr(v)


def _jsonable_tree(v):
    return _jsonable(v)


def _as_param(p):
    if isinstance(p, (ScalarParam, AMParam)):
        return p
    if isinstance(p, (int, float, np.floating)):
        return ScalarParam(theta=float(p))
    raise ValueError(f"cannot interpret {p!r} as a kernel parameter")


def _param_label(p) -> dict:
    if isinstance(p, AMParam):
        return {"mu": [float(u) for u in p.mu], "cov": [[float(u) for u in row] for row in p.cov]}
    return {"theta": float(p.theta)}


def _grid_dict(grid: GridSpec, theta_grid=None) -> dict:
    thetas = grid.theta_grid if theta_grid is None else theta_grid
    return {
        "x_grid": [_jsonable(np.asarray(x, dtype=float).tolist()) for x in grid.x_grid],
        "theta_grid": [_param_label(_as_param(t)) for t in thetas],
        "gamma_grid": [float(g) for g in grid.gamma_grid],
        "method": grid.method,
        "mc_n": grid.mc_n if grid.method == METHOD_MONTE_CARLO else None,
        "seed": grid.seed,
    }


def _weight_vectorized(weight: ParamLyapunov) -> Callable[[np.ndarray], np.ndarray]:
    """Vector form of a scalar-parameter weight for Monte-Carlo batches."""
    if weight.variant == W_EXP_ABS:
        return lambda t: np.exp(np.minimum(np.abs(t), 700.0))
    if weight.variant == W_ONE_PLUS_SQUARE:
        return lambda t: 1.0 + t * t
    raise ValueError("vectorized weights exist for scalar variants only")


# ---------------------------------------------------------------------------
# fixed-theta state drift: P_theta V <= [V - V**iota / a] outside the center,
# <= b inside


def verify_fixed_theta_drift(
    target: TargetModel,
    proposal: ProposalSpec,
    lyap: StateLyapunov,
    coef: DriftCoefficients,
    grid: GridSpec,
    center_radius: float = 5.0,
    tol: float = DEFAULT_QUAD_TOL,
) -> DriftReport:
    """Certificate for the state-space drift at frozen kernel parameters.

    Fits the largest rate constant ``a0`` (and smallest level bound ``b``)
    under the grid's margin rule, freezes them, and reports margins against
    the frozen constants.  Passes when a positive ``a0`` exists and ``b``
    is finite.
    """
    if not grid.theta_grid:
        raise ValueError("verify_fixed_theta_drift needs a non-empty theta_grid")
    mc = grid.method == METHOD_MONTE_CARLO
    evals = []
    idx = 0
    for p_raw in grid.theta_grid:
        param = _as_param(p_raw)
        base_a = coef.a(param) * coef.a0  # scenario rate with the a0 scale removed
        for x in grid.x_grid:
            xf = float(np.asarray(x, dtype=float).reshape(()))
            if mc:
                pv, se = apply_kernel_to_function(
                    target, proposal, param, lyap, xf,
                    method="monte_carlo", n=grid.mc_n, rng=substream(grid.seed, idx),
                )
            else:
                pv, se = apply_kernel_to_function(target, proposal, param, lyap, xf, tol=tol)
            if not math.isfinite(pv):
                raise ValueError(f"non-finite kernel application at theta={param}, x={xf}")
            v = float(lyap(xf))
            inside = abs(xf) <= center_radius
            evals.append((param, xf, v, pv, se, inside, base_a))
            idx += 1

    slack = lambda se: MC_SE_FACTOR * se if mc else tol
    # Cap per tail point: the largest a0 whose frozen row still meets the
    # margin rule.  Quadrature rows may sit at -tol, so the cap gains +tol;
    # MC rows must clear +3 SE, so the cap loses it.  A degenerate Lyapunov
    # (zero deficit everywhere) then fits a tiny positive a0 instead of
    # flagging infeasibility.
    caps = [
        (v - pv + (tol if not mc else -MC_SE_FACTOR * se)) * base_a / v**coef.iota
        for (param, xf, v, pv, se, inside, base_a) in evals
        if not inside
    ]
    a0_fit = min(caps) if caps else None
    if a0_fit is not None:
        a0_fit = a0_fit * (1.0 - HEADROOM) - 1e-15 if a0_fit > 0 else a0_fit
    b_vals = [pv + slack(se) for (_, _, _, pv, se, inside, _) in evals if inside]
    b_fit = (max(b_vals) * (1.0 + HEADROOM) + 1e-15) if b_vals else None

    frozen = coef.with_constants(
        a0=a0_fit if (a0_fit is not None and a0_fit > 0) else coef.a0,
        b_const=b_fit if b_fit is not None else coef.b_const,
    )
    rows = []
    for param, xf, v, pv, se, inside, base_a in evals:
        if inside:
            rhs = frozen.b(param)
        else:
            rhs = v - v**coef.iota / frozen.a(param)
        margin = rhs - pv
        ok = margin > MC_SE_FACTOR * se if mc else margin >= -tol
        rows.append(
            DriftRow(
                point={**_param_label(param), "x": xf, "region": "center" if inside else "tail"},
                lhs=pv, rhs=rhs, margin=margin, se=se, passed=ok,
            )
        )
    feasible = (a0_fit is None or a0_fit > 0) and (b_fit is None or math.isfinite(b_fit))
    passed = feasible and all(r.passed for r in rows)
    return DriftReport(
        check="fixed_theta_drift",
        grid=_grid_dict(grid),
        fitted={"a0": a0_fit, "b": b_fit, "iota": coef.iota, "center_radius": center_radius},
        rows=rows,
        passed=passed,
    )


def deficit_loglog_slope(
    target: TargetModel,
    eta: float,
    x: float,
    sigmas: Sequence[float],
    tol: float = DEFAULT_QUAD_TOL,
) -> tuple[float, list[float]]:
    """Log-log slope of the drift deficit ``V(x) - P_sigma V(x)`` against
    the proposal radius, for regime-structure checks.  Requires every
    deficit on the grid to be positive."""
    if len(sigmas) < 2:
        raise ValueError("need at least two proposal radii for a slope")
    lyap = StateLyapunov(target, eta)
    spec = ProposalSpec(family=FAMILY_UNIFORM, parametrization=PARAM_SCALAR_LOG_SCALE)
    deficits = []
    v = float(lyap(x))
    for sigma in sigmas:
        param = ScalarParam(theta=math.log(sigma))
        pv, _ = apply_kernel_to_function(target, spec, param, lyap, float(x), tol=tol)
        deficits.append(v - pv)
    if any(d <= 0 for d in deficits):
        return math.nan, deficits
    slope = float(np.polyfit(np.log(np.asarray(sigmas, dtype=float)), np.log(deficits), 1)[0])
    return slope, deficits


# ---------------------------------------------------------------------------
# parameter drift: E[w(update(theta, X+))] <= w(theta) (1 - gamma * Delta(arg))


def _w_drift_lhs_quadrature(
    target, proposal, rule, weight, param, x, gamma, tol
) -> float:
    """E[w(theta')] for one step of the adaptive pair, by quadrature."""
    if target.dim != 1 or proposal.family != FAMILY_UNIFORM:
        raise ValueError("w-drift quadrature needs a one-dimensional compact-uniform kernel")
    if rule.kind in (RULE_COERCED, RULE_FAST_COERCED, RULE_FIXED):
        theta = param.theta
        sigma = param.sigma
        if not math.isfinite(sigma):
            raise ValueError("proposal radius overflow")
        lx = float(target.log_density(x))
        a_star = rule.alpha_star if rule.alpha_star is not None else 0.0

        def integrand(z: float) -> float:
            ly = float(target.log_density(x + z))
            d = ly - lx
            alpha = 1.0 if d >= 0.0 else math.exp(d)
            if rule.kind == RULE_COERCED:
                t_new = theta + gamma * (alpha - a_star)
            elif rule.kind == RULE_FAST_COERCED:
                t_new = theta + gamma * (abs(theta) + 1.0) * (alpha - a_star)
            else:
                t_new = theta
            return weight(t_new) / (2.0 * sigma)

        points = [0.0, -x]
        if target.unimodal_1d:
            ups = matched_density_point(target, x)
            points.append(ups - x)
        points = [p for p in points if -sigma < p < sigma]
        return integrate_interval(integrand, -sigma, sigma, tol=tol, points=points)
    if rule.kind == RULE_AM:
        def f(x_new: float) -> float:
            mu2, cov2 = am_update(param.mu, param.cov, np.atleast_1d(x_new), gamma)
            return weight(AMParam(mu=mu2, cov=cov2))

        val, _ = apply_kernel_to_function(target, proposal, param, f, float(x), tol=tol)
        return val
    raise ValueError(f"unsupported rule {rule.kind!r} for the parameter drift")


def _w_drift_lhs_mc(
    target, proposal, rule, weight, param, x, gamma, n, rng
) -> tuple[float, float]:
    """Monte-Carlo estimate of E[w(theta')] with one kernel step."""
    dim = target.dim
    z = draw_increments(proposal, param, dim, rng, size=n)
    x_arr = np.broadcast_to(np.atleast_1d(np.asarray(x, dtype=float)), (n, dim)).copy()
    y = x_arr + (z.reshape(n, dim))
    lx = float(np.atleast_1d(target.log_density(np.asarray(x, dtype=float)))[0]) if dim > 1 else float(
        target.log_density(float(np.asarray(x).reshape(())))
    )
    ly = np.asarray(target.log_density(y if dim > 1 else y[:, 0]), dtype=float)
    alpha = np.exp(np.minimum(ly - lx, 0.0))
    accept = rng.random(n) < alpha
    x_next = np.where(accept[:, None], y, x_arr)
    a_star = rule.alpha_star if rule.alpha_star is not None else 0.0
    if rule.kind == RULE_COERCED:
        t_new = param.theta + gamma * (alpha - a_star)
        vals = _weight_vectorized(weight)(t_new)
    elif rule.kind == RULE_FAST_COERCED:
        t_new = param.theta + gamma * (abs(param.theta) + 1.0) * (alpha - a_star)
        vals = _weight_vectorized(weight)(t_new)
    elif rule.kind == RULE_FIXED:
        vals = np.full(n, weight(param))
    else:
        vals = np.empty(n)
        for j in range(n):
            mu2, cov2 = am_update(param.mu, param.cov, x_next[j], gamma)
            vals[j] = weight(AMParam(mu=mu2, cov=cov2))
    mean = float(vals.mean())
    se = float(vals.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return mean, se


def verify_w_drift(
    target: TargetModel,
    proposal: ProposalSpec,
    rule: AdaptationRule,
    weight: ParamLyapunov,
    coef: DriftCoefficients,
    grid: GridSpec,
    state_lyapunov: Optional[StateLyapunov] = None,
    center_radius: float = 5.0,
    tol: float = DEFAULT_QUAD_TOL,
) -> DriftReport:
    """Certificate for the parameter drift with the scenario slope function.

    The slope constant is the smallest value making every grid margin pass,
    found by bisection (the right side is monotone in the constant); the
    report freezes it with a relative headroom bump.
    """
    if not grid.theta_grid:
        raise ValueError("verify_w_drift needs a non-empty theta_grid")
    lyap = state_lyapunov if state_lyapunov is not None else StateLyapunov(target, 0.5)
    mc = grid.method == METHOD_MONTE_CARLO

    # sup of V**beta over the center set enters d(theta); exact for targets
    # that decay monotonically away from the mode
    sup_vbeta = max(
        float(lyap(xx)) ** coef.beta
        for xx in {0.0, center_radius, -center_radius}
    )
    coef = coef.with_constants(sup_c_vbeta=sup_vbeta)

    evals = []
    idx = 0
    for p_raw in grid.theta_grid:
        param = _as_param(p_raw)
        w_theta = weight(param)
        for x in grid.x_grid:
            xf = float(np.asarray(x, dtype=float).reshape(()))
            v_val = float(lyap(xf))
            inside = abs(xf) <= center_radius
            for gamma in grid.gamma_grid:
                if mc:
                    lhs, se = _w_drift_lhs_mc(
                        target, proposal, rule, weight, param, xf, gamma,
                        grid.mc_n, substream(grid.seed, idx),
                    )
                else:
                    lhs = _w_drift_lhs_quadrature(
                        target, proposal, rule, weight, param, xf, gamma, tol
                    )
                    se = 0.0
                if not math.isfinite(lhs):
                    raise ValueError(f"non-finite parameter-drift estimate at theta={param}, x={xf}")
                evals.append((param, xf, gamma, w_theta, v_val, inside, lhs, se))
                idx += 1

    def margins(c_val: float) -> list[float]:
        cc = coef.with_constants(slope_c=c_val)
        out = []
        for param, xf, gamma, w_theta, v_val, inside, lhs, se in evals:
            if inside:
                arg = cc.d(param)
            else:
                arg = cc.c(param) + v_val**cc.beta / cc.e(param)
            rhs = w_theta * (1.0 - gamma * cc.delta(arg))
            need = MC_SE_FACTOR * se if mc else tol
            out.append(rhs - lhs - need)
        return out

    lo, hi = 1e-6, 1e12
    fit_c: Optional[float] = None
    if min(margins(hi)) >= 0.0:
        if min(margins(lo)) >= 0.0:
            fit_c = lo
        else:
            a, b = lo, hi
            for _ in range(200):
                mid = math.sqrt(a * b)
                if min(margins(mid)) >= 0.0:
                    b = mid
                else:
                    a = mid
                if b - a <= 1e-9 * max(1.0, b):
                    break
            fit_c = b
    if fit_c is not None:
        fit_c = fit_c * (1.0 + 1e-6) + 1e-12

    frozen = coef.with_constants(slope_c=fit_c) if fit_c is not None else coef
    rows = []
    for param, xf, gamma, w_theta, v_val, inside, lhs, se in evals:
        arg = frozen.d(param) if inside else frozen.c(param) + v_val**frozen.beta / frozen.e(param)
        rhs = w_theta * (1.0 - gamma * frozen.delta(arg))
        margin = rhs - lhs
        ok = margin > MC_SE_FACTOR * se if mc else margin >= -tol
        rows.append(
            DriftRow(
                point={**_param_label(param), "x": xf, "gamma": gamma,
                       "region": "center" if inside else "tail"},
                lhs=lhs, rhs=rhs, margin=margin, se=se, passed=ok,
            )
        )
    passed = fit_c is not None and all(r.passed for r in rows)
    return DriftReport(
        check="w_drift",
        grid=_grid_dict(grid),
        fitted={
            "slope_c": fit_c,
            "sup_center_vbeta": sup_vbeta,
            "beta": coef.beta,
            "delta0": frozen.delta0(),
            "center_radius": center_radius,
        },
        rows=rows,
        passed=passed,
        notes={"scenario": coef.scenario},
    )


# ---------------------------------------------------------------------------
# compound drift: one adaptive step must contract lam*V + w/gamma outside
# a joint level set


def verify_compound_drift(
    target: TargetModel,
    proposal: ProposalSpec,
    rule: AdaptationRule,
    lyap_v: StateLyapunov,
    weight: ParamLyapunov,
    compound: CompoundSpec,
    grid: GridSpec,
    coef: DriftCoefficients,
    center_radius: float = 5.0,
    gamma_pairs: Optional[Sequence[tuple[float, float]]] = None,
    eps_gap: Optional[float] = None,
) -> DriftReport:
    """Monte-Carlo certificate for the one-step compound contraction.

    Searches doubling ``lam_star`` values and parameter-weight levels
    ``m_star`` (lexicographically) for the smallest pair giving a positive
    contraction rate ``delta`` with every outside margin beyond three
    standard errors.  Reports the best candidate when the search fails.

    The estimator integrates the accept coin out analytically (its
    conditional expectation given the proposal increment is available in
    closed form) and averages antithetic increment pairs, so ``mc_n`` draws
    become ``mc_n // 2`` independent pair samples of the same one-step
    expectation.  Certifiable margins at desk-scale sample sizes need this:
    the state Lyapunov spans many orders of magnitude across the grid and
    the raw estimator's noise would otherwise swamp genuinely positive
    drift gaps.
    """
    if grid.method != METHOD_MONTE_CARLO:
        raise ValueError("the compound drift check is Monte-Carlo only")
    if not grid.theta_grid:
        raise ValueError("verify_compound_drift needs a non-empty theta_grid")
    if rule.kind not in (RULE_COERCED, RULE_FAST_COERCED, RULE_AM):
        raise ValueError("compound drift needs an adaptive rule")
    delta0 = coef.delta0()
    eps = 0.5 * delta0 if eps_gap is None else eps_gap
    if not (0.0 < eps < delta0):
        raise ValueError("eps_gap must lie in (0, delta(0))")
    pairs = [(g, g) for g in grid.gamma_grid] if gamma_pairs is None else list(gamma_pairs)
    for g, gbar in pairs:
        if g <= 0 or gbar <= 0:
            raise ValueError("stepsize pairs must be positive")
        if 1.0 / g - 1.0 / gbar >= delta0 - eps:
            raise ValueError(
                f"stepsize pair ({g}, {gbar}) violates the inverse-difference ceiling"
            )

    dim = target.dim
    a_star = rule.alpha_star if rule.alpha_star is not None else 0.0
    points = []
    idx = 0
    for p_raw in grid.theta_grid:
        param = _as_param(p_raw)
        w_theta = weight(param)
        for x in grid.x_grid:
            xf = np.atleast_1d(np.asarray(x, dtype=float))
            x_scalar = float(xf[0]) if dim == 1 else None
            v_x = float(lyap_v(x_scalar if dim == 1 else xf))
            inside_c = float(np.linalg.norm(xf)) <= center_radius
            for g, gbar in pairs:
                rng = substream(grid.seed, idx)
                m = grid.mc_n // 2
                z = draw_increments(proposal, param, dim, rng, size=m).reshape(m, dim)
                lx = float(target.log_density(x_scalar if dim == 1 else xf))

                def coin_free(y):
                    """(E[V(X1)|z], E[w(theta1)|z]) with the coin integrated out."""
                    ly = np.asarray(
                        target.log_density(y[:, 0] if dim == 1 else y), dtype=float
                    )
                    log_alpha = np.minimum(ly - lx, 0.0)
                    alpha = np.exp(log_alpha)
                    # alpha * V(y) in log space: the product never exceeds V(x)
                    # even where V(y) alone overflows
                    av = np.exp(np.minimum(log_alpha - lyap_v.eta * ly, 700.0))
                    v_part = av + (1.0 - alpha) * v_x
                    if rule.kind == RULE_COERCED:
                        t_new = param.theta + g * (alpha - a_star)
                        w_part = _weight_vectorized(weight)(t_new)
                    elif rule.kind == RULE_FAST_COERCED:
                        t_new = param.theta + g * (abs(param.theta) + 1.0) * (alpha - a_star)
                        w_part = _weight_vectorized(weight)(t_new)
                    else:
                        mu_r, cov_r = am_update(param.mu, param.cov, xf, g)
                        w_reject = weight(AMParam(mu=mu_r, cov=cov_r))
                        w_acc = np.empty(m)
                        for j in range(m):
                            mu2, cov2 = am_update(param.mu, param.cov, y[j], g)
                            w_acc[j] = weight(AMParam(mu=mu2, cov=cov2))
                        w_part = alpha * w_acc + (1.0 - alpha) * w_reject
                    return v_part, w_part

                v_plus, w_plus = coin_free(xf[None, :] + z)
                v_minus, w_minus = coin_free(xf[None, :] - z)
                v_pair = 0.5 * (v_plus + v_minus)
                w_pair = 0.5 * (w_plus + w_minus)
                mean_v = float(v_pair.mean())
                mean_w = float(w_pair.mean())
                var_v = float(v_pair.var(ddof=1))
                var_w = float(w_pair.var(ddof=1))
                cov_vw = float(np.cov(v_pair, w_pair, ddof=1)[0, 1])
                denom = v_x**coef.iota / coef.a(param) + w_theta
                points.append(
                    {
                        "param": param, "x": xf, "v_x": v_x, "w_theta": w_theta,
                        "inside_c": inside_c, "gamma": g, "gamma_bar": gbar,
                        "mean_v": mean_v, "mean_w": mean_w,
                        "var_v": var_v, "var_w": var_w, "cov_vw": cov_vw,
                        "n": m, "denom": denom,
                    }
                )
                idx += 1

    w_levels = sorted({pt["w_theta"] for pt in points})
    lam_values = [float(2**k) for k in range(11)]

    def candidate_delta(lam: float, m_star: float):
        outside = [
            pt for pt in points
            if not (pt["w_theta"] <= m_star and pt["inside_c"])
        ]
        if not outside:
            return None, outside
        caps = []
        for pt in outside:
            mean_s = lam * pt["mean_v"] + pt["mean_w"] / pt["gamma"]
            var_s = (
                lam * lam * pt["var_v"]
                + 2.0 * lam * pt["cov_vw"] / pt["gamma"]
                + pt["var_w"] / pt["gamma"] ** 2
            )
            se = math.sqrt(max(var_s, 0.0) / pt["n"])
            gap = lam * pt["v_x"] + pt["w_theta"] / pt["gamma_bar"] - mean_s
            caps.append((gap - MC_SE_FACTOR * se) / pt["denom"])
        return min(caps), outside

    found = None
    best = None
    for lam in lam_values:
        for m_star in w_levels:
            delta, outside = candidate_delta(lam, m_star)
            if delta is None:
                continue
            if best is None or delta > best[2]:
                best = (lam, m_star, delta)
            if delta > 0.0:
                found = (lam, m_star, delta)
                break
        if found:
            break

    lam, m_star, delta_raw = found if found else (best if best else (1.0, w_levels[0], math.nan))
    delta = delta_raw * (1.0 - HEADROOM) if (found and delta_raw > 0) else delta_raw

    rows = []
    for pt in points:
        if pt["w_theta"] <= m_star and pt["inside_c"]:
            continue
        mean_s = lam * pt["mean_v"] + pt["mean_w"] / pt["gamma"]
        var_s = (
            lam * lam * pt["var_v"]
            + 2.0 * lam * pt["cov_vw"] / pt["gamma"]
            + pt["var_w"] / pt["gamma"] ** 2
        )
        se = math.sqrt(max(var_s, 0.0) / pt["n"])
        rhs = lam * pt["v_x"] + pt["w_theta"] / pt["gamma_bar"] - delta * pt["denom"]
        margin = rhs - mean_s
        rows.append(
            DriftRow(
                point={
                    **_param_label(pt["param"]),
                    "x": float(pt["x"][0]) if dim == 1 else [float(u) for u in pt["x"]],
                    "gamma": pt["gamma"], "gamma_bar": pt["gamma_bar"],
                },
                lhs=mean_s, rhs=rhs, margin=margin, se=se,
                passed=margin > MC_SE_FACTOR * se,
            )
        )
    passed = found is not None and bool(rows) and all(r.passed for r in rows)
    return DriftReport(
        check="compound_drift",
        grid=_grid_dict(grid),
        fitted={
            "lam_star": lam,
            "m_star": m_star,
            "delta": delta,
            "center_radius": center_radius,
            "found": found is not None,
        },
        rows=rows,
        passed=passed,
        notes={"scenario": coef.scenario, "searched_lam": lam_values, "w_levels": w_levels},
    )


# ---------------------------------------------------------------------------
# acceptance-rate envelopes for vanishing and exploding proposal radii


def verify_acceptance_bounds(
    target: TargetModel,
    sigma_grid: Sequence[float],
    x_grid: Sequence[float],
    tol: float = DEFAULT_QUAD_TOL,
) -> DriftReport:
    """Bounds on the compact-uniform acceptance rate at the radius extremes.

    Small radii: ``alpha >= 1/2 - c_minus * sigma``; large radii:
    ``alpha <= c_plus * ((-log density)**(1/p) or 1) / sigma``.  Both
    constants are fitted as grid maxima.  Stabilization is recorded so a
    blow-up at either radius extreme is visible; the large-radius trend is
    tested per start point and only over radii that cover it, since the
    1/sigma scaling has no reason to hold while sigma < x.
    """
    if target.dim != 1:
        raise ValueError("acceptance bounds are one-dimensional checks")
    if target.tail.kind != TailKind.SUBEXPONENTIAL or target.tail.exponent is None:
        raise ValueError("acceptance bounds require a subexponential tail class")
    p = target.tail.exponent
    sigmas = sorted(float(s) for s in sigma_grid)
    if not sigmas:
        raise ValueError("sigma_grid must be non-empty")
    alphas: dict[tuple[float, float], float] = {}
    for s in sigmas:
        for x in x_grid:
            alphas[(s, float(x))] = mean_acceptance(target, s, float(x), tol=tol)

    low_sigmas = [s for s in sigmas if s <= 1.0]
    high_sigmas = [s for s in sigmas if s >= 1.0]

    def low_level(s: float) -> float:
        return max((0.5 - alphas[(s, float(x))]) / s for x in x_grid)

    def high_level(s: float) -> float:
        out = []
        for x in x_grid:
            l_val = float(target.log_density(float(x)))
            scale = max((-l_val) ** (1.0 / p) if l_val < 0 else 0.0, 1.0)
            out.append(alphas[(s, float(x))] * s / scale)
        return max(out)

    c_minus = max((max(0.0, low_level(s)) for s in low_sigmas), default=None)
    c_plus = max((high_level(s) for s in high_sigmas), default=None)
    if c_minus is not None:
        c_minus = c_minus * (1.0 + HEADROOM) + 1e-15
    if c_plus is not None:
        c_plus = c_plus * (1.0 + HEADROOM) + 1e-15

    stab_low = True
    if len(low_sigmas) >= 2:
        stab_low = low_level(low_sigmas[0]) <= low_level(low_sigmas[1]) + 1e-9
    stab_high = True
    if len(high_sigmas) >= 2:
        for x in x_grid:
            xf = float(x)
            l_val = float(target.log_density(xf))
            scale = max((-l_val) ** (1.0 / p) if l_val < 0 else 0.0, 1.0)
            engaged = [s for s in high_sigmas if s >= xf]
            if len(engaged) < 2:
                continue
            levels = [alphas[(s, xf)] * s / scale for s in engaged]
            if levels[-1] > 1.25 * max(levels[:-1]) + 1e-12:
                stab_high = False
                break

    rows = []
    for s in sigmas:
        for x in x_grid:
            a_val = alphas[(s, float(x))]
            if s <= 1.0 and c_minus is not None:
                lhs = 0.5 - c_minus * s
                rows.append(
                    DriftRow(
                        point={"sigma": s, "x": float(x), "bound": "lower"},
                        lhs=lhs, rhs=a_val, margin=a_val - lhs, se=0.0,
                        passed=a_val - lhs >= -tol,
                    )
                )
            if s >= 1.0 and c_plus is not None:
                l_val = float(target.log_density(float(x)))
                scale = max((-l_val) ** (1.0 / p) if l_val < 0 else 0.0, 1.0)
                rhs = c_plus * scale / s
                rows.append(
                    DriftRow(
                        point={"sigma": s, "x": float(x), "bound": "upper"},
                        lhs=a_val, rhs=rhs, margin=rhs - a_val, se=0.0,
                        passed=rhs - a_val >= -tol,
                    )
                )
    fits_ok = (c_minus is None or math.isfinite(c_minus)) and (
        c_plus is None or math.isfinite(c_plus)
    )
    passed = fits_ok and stab_low and stab_high and all(r.passed for r in rows)
    return DriftReport(
        check="acceptance_bounds",
        grid={"sigma_grid": sigmas, "x_grid": [float(x) for x in x_grid],
              "method": METHOD_QUADRATURE, "mc_n": None},
        fitted={
            "c_minus": c_minus,
            "c_plus": c_plus,
            "tail_exponent": p,
            "stabilized_small_sigma": stab_low,
            "stabilized_large_sigma": stab_high,
        },
        rows=rows,
        passed=passed,
    )


# ---------------------------------------------------------------------------
# four-term decomposition of the normalized kernel application


def _phi(target: TargetModel, base: float, expo: float, sign: float, z: float) -> float:
    """[(density at base + sign*z) / (density at base)] ** expo, in log space."""
    diff = float(target.log_density(base + sign * z)) - float(target.log_density(base))
    arg = expo * diff
    return math.exp(arg) if arg < 700.0 else math.inf


def accept_reject_profile(target: TargetModel, eta: float, x: float, z: float) -> float:
    """Local accept/reject balance of the two moves of length z from x.

    Combines the inward Lyapunov gain, the outward accepted loss, and the
    outward rejection mass; nonpositive on [0, x] for flat-tailed targets
    once x is large.
    """
    return (
        (_phi(target, x, -eta, -1.0, z) - 1.0)
        + (_phi(target, x, 1.0 - eta, 1.0, z) - 1.0)
        - (_phi(target, x, 1.0, 1.0, z) - 1.0)
    )


def decomposition_terms(
    target: TargetModel,
    eta: float,
    sigma: float,
    x: float,
    tol: float = 1e-10,
) -> dict:
    """The four pieces of ``P_sigma V(x)/V(x) - 1`` for the compact-uniform
    kernel: local balance, outward tail, and the two matched-point crossing
    terms (accepted and rejected)."""
    if x <= 0:
        raise ValueError("decomposition is stated for positive x")
    ups = matched_density_point(target, x)
    q = 1.0 / (2.0 * sigma)

    local = q * integrate_interval(
        lambda z: accept_reject_profile(target, eta, x, z), 0.0, min(sigma, x), tol=tol
    )

    outward = 0.0
    if sigma >= x:
        outward = q * integrate_interval(
            lambda z: _phi(target, x, 1.0 - eta, 1.0, z) - _phi(target, x, 1.0, 1.0, z),
            x, sigma, tol=tol,
        )

    cross_accept = 0.0
    if sigma >= x:
        upper = min(sigma - x + ups, 0.0)
        if upper > ups:
            cross_accept = q * integrate_interval(
                lambda z: _phi(target, ups, -eta, -1.0, z) - 1.0, ups, upper, tol=tol
            )

    cross_reject = 0.0
    if sigma >= x - ups:
        upper = sigma - (x - ups)
        if upper > 0.0:
            cross_reject = q * integrate_interval(
                lambda z: _phi(target, ups, 1.0 - eta, -1.0, z) - _phi(target, ups, 1.0, -1.0, z),
                0.0, upper, tol=tol,
            )

    return {
        "local": local,
        "outward": outward,
        "cross_accept": cross_accept,
        "cross_reject": cross_reject,
        "matched_point": ups,
    }


def normalized_kernel_gain(
    target: TargetModel, eta: float, sigma: float, x: float, tol: float = 1e-10
) -> float:
    """``P_sigma V(x)/V(x) - 1`` as one integral over the move length."""
    lx = float(target.log_density(x))

    def integrand(z: float) -> float:
        ly = float(target.log_density(x + z))
        d = ly - lx
        alpha = 1.0 if d >= 0.0 else math.exp(d)
        vr = math.exp(-eta * d) if -eta * d < 700.0 else math.inf
        return alpha * (vr - 1.0)

    ups = matched_density_point(target, x)
    points = [p for p in (0.0, ups - x, -x) if -sigma < p < sigma]
    return integrate_interval(integrand, -sigma, sigma, tol=tol, points=points) / (2.0 * sigma)


def verify_decomposition(
    target: TargetModel,
    lyap: StateLyapunov,
    sigma_grid: Sequence[float],
    x_grid: Sequence[float],
    residual_tol: float = 1e-6,
    profile_tol: float = 1e-9,
    cross_tol: float = 1e-9,
    n_profile: int = 201,
) -> DriftReport:
    """Two independent quadrature pipelines for the normalized kernel gain
    must agree; the profile and crossing terms must carry the signs the
    tail analysis claims.

    The inward/outward deficit only engages beyond a threshold radius: for
    moderate x the outward mass can still dominate, so the fitted rate
    eps_t is frozen on the suffix of the x grid where every larger level
    keeps the deficit strictly negative at all sigma >= x.  The smallest
    such level is reported as r_t; no qualifying level means fail."""
    if target.dim != 1 or not target.unimodal_1d:
        raise ValueError("decomposition check needs a one-dimensional unimodal target")
    eta = lyap.eta
    if not (0.0 < eta < 1.0):
        raise ValueError("decomposition check needs eta in (0, 1)")
    rows = []
    profile_max = -math.inf
    cross_accept_max = -math.inf
    tail_eps: dict[float, list[float]] = {}
    for x in x_grid:
        xf = float(x)
        zs = np.linspace(0.0, xf, n_profile)
        psi_vals = [accept_reject_profile(target, eta, xf, float(z)) for z in zs]
        profile_max = max(profile_max, max(psi_vals))
        for s in sigma_grid:
            sf = float(s)
            lhs = normalized_kernel_gain(target, eta, sf, xf)
            terms = decomposition_terms(target, eta, sf, xf)
            rhs = terms["local"] + terms["outward"] + terms["cross_accept"] + terms["cross_reject"]
            residual = abs(lhs - rhs)
            ok = residual <= residual_tol
            if sf >= xf:
                cross_accept_max = max(cross_accept_max, terms["cross_accept"])
                tail_eps.setdefault(xf, []).append(
                    -(terms["local"] + terms["outward"]) * sf / xf
                )
            rows.append(
                DriftRow(
                    point={"sigma": sf, "x": xf},
                    lhs=lhs, rhs=rhs, margin=residual_tol - residual, se=0.0, passed=ok,
                )
            )
    profile_ok = profile_max <= profile_tol
    cross_ok = cross_accept_max <= cross_tol if tail_eps else True
    xs_sorted = sorted(tail_eps)
    r_t = None
    for idx, xv in enumerate(xs_sorted):
        if all(min(tail_eps[xu]) > 0.0 for xu in xs_sorted[idx:]):
            r_t = xv
            break
    if r_t is not None:
        eps_t = min(min(tail_eps[xu]) for xu in xs_sorted if xu >= r_t)
    elif tail_eps:
        # nothing qualified; report the global worst rate for diagnosis
        eps_t = min(min(v) for v in tail_eps.values())
    else:
        eps_t = None
    eps_ok = r_t is not None if tail_eps else True
    passed = profile_ok and cross_ok and eps_ok and all(r.passed for r in rows)
    return DriftReport(
        check="decomposition",
        grid={"sigma_grid": [float(s) for s in sigma_grid],
              "x_grid": [float(x) for x in x_grid],
              "method": METHOD_QUADRATURE, "mc_n": None},
        fitted={
            "eps_t": eps_t,
            "r_t": r_t,
            "profile_max": profile_max,
            "cross_accept_max": cross_accept_max if tail_eps else None,
            "residual_tol": residual_tol,
        },
        rows=rows,
        passed=passed,
    )


# ---------------------------------------------------------------------------
# two-state chain: invariant row vector and second eigenvalue


def verify_toy(theta_grid: Sequence[float], eig_tol: float = 1e-12, inv_tol: float = 1e-14) -> DriftReport:
    """Closed-form second eigenvalue against a direct eigendecomposition,
    plus exact invariance of the uniform row vector."""
    rows = []
    pi = np.array([0.5, 0.5])
    for t in theta_grid:
        tf = float(t)
        p = toy_transition_matrix(tf)
        formula = 1.0 - 2.0 * math.exp(-abs(tf))
        # the chain's spectrum is {1, lambda} with lambda < 1, so the
        # second eigenvalue is identified without referencing the formula
        second = float(np.min(np.linalg.eigvals(p).real))
        inv_residual = float(np.max(np.abs(pi @ p - pi)))
        ok = abs(formula - second) <= eig_tol and inv_residual <= inv_tol
        rows.append(
            DriftRow(
                point={"theta": tf},
                lhs=formula, rhs=second,
                margin=eig_tol - abs(formula - second),
                se=inv_residual, passed=ok,
            )
        )
    return DriftReport(
        check="toy",
        grid={"theta_grid": [float(t) for t in theta_grid],
              "method": "exact", "mc_n": None},
        fitted={"eig_tol": eig_tol, "invariance_tol": inv_tol},
        rows=rows,
        passed=all(r.passed for r in rows),
    )


# ---------------------------------------------------------------------------
# quadrature vs Monte-Carlo agreement


def cross_check_kernel(
    target: TargetModel,
    proposal: ProposalSpec,
    lyap: StateLyapunov,
    n_points: int = 20,
    mc_n: int = 100_000,
    seed: int = 77,
    se_factor: float = 4.0,
) -> DriftReport:
    """Random (theta, x) points where the Monte-Carlo kernel application
    must sit within a few standard errors of the quadrature value."""
    rng = substream(seed, 0)
    rows = []
    for j in range(n_points):
        theta = float(rng.uniform(-1.0, 1.0))
        x = float(rng.uniform(-10.0, 10.0))
        param = ScalarParam(theta=theta)
        quad, _ = apply_kernel_to_function(target, proposal, param, lyap, x)
        mc, se = apply_kernel_to_function(
            target, proposal, param, lyap, x,
            method="monte_carlo", n=mc_n, rng=substream(seed, j + 1),
        )
        diff = abs(quad - mc)
        ok = diff <= se_factor * se
        rows.append(
            DriftRow(
                point={"theta": theta, "x": x},
                lhs=quad, rhs=mc, margin=se_factor * se - diff, se=se, passed=ok,
            )
        )
    return DriftReport(
        check="kernel_cross_check",
        grid={"n_points": n_points, "method": METHOD_MONTE_CARLO, "mc_n": mc_n},
        fitted={"se_factor": se_factor},
        rows=rows,
        passed=all(r.passed for r in rows),
    )
