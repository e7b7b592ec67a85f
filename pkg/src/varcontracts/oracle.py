"""Independent certification of solved contracts.

``brute_solve`` attacks the discretised problem directly: expected utility
is concave in the indemnity levels (affine wealth composed into a concave
utility) and the variance constraint is a convex quadratic, so the finite
program over incentive-compatible schedules has a unique global optimum.
Decision variables are the per-cell slopes, which encode incentive
compatibility exactly as the box ``[0, 1]^n``; the variance inequality is
handled by an augmented-Lagrangian multiplier loop whose box-constrained
subproblems are driven to high accuracy with L-BFGS-B.

The module also hosts the up-crossing counter and the stochastic-order
checks (convex order, stop-loss order, downside risk) used as validators
by the comparative statics.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import minimize

from .arrow import arrow_deductible, is_variance_slack
from .bounds import compute_bracket
from .errors import PreconditionError, ValidationError
from .losses import GridMeasure
from .utilities import UtilityModel

_MAX_ORACLE_NODES = 1001
_FEAS_RTOL = 1e-11
_VAR_SLACK = 1e-9


@dataclass(frozen=True, eq=False)
class OracleResult:
    """Brute-force optimum of the discretised contract problem."""

    schedule: np.ndarray
    objective: float
    active_variance: bool
    iterations: int
    kkt_residual: float
    multiplier: float
    converged: bool = True

    def __post_init__(self):
        schedule = np.asarray(self.schedule, dtype=float).copy()
        schedule.flags.writeable = False
        object.__setattr__(self, "schedule", schedule)


@dataclass(frozen=True)
class CrossingProfile:
    """Sign-change profile of ``f - g`` along a grid."""

    count: int
    locations: tuple
    direction_first: int

    def __post_init__(self):
        locs = tuple(float(v) for v in self.locations)
        if any(b <= a for a, b in zip(locs, locs[1:])):
            raise ValidationError("crossing locations must be strictly ascending")
        if len(locs) != self.count:
            raise ValidationError("crossing count must match the number of locations")
        object.__setattr__(self, "locations", locs)


def objective_value(measure: GridMeasure, utility: UtilityModel, w0, rho, indemnity):
    """Insured's expected utility for an arbitrary grid schedule."""
    pay = np.asarray(indemnity, dtype=float)
    premium = (1.0 + rho) * measure.expect(pay)
    return measure.expect(utility.u(w0 - measure.nodes + pay - premium))


def _stop_loss_slopes(nodes, dx, d):
    """Slope vector reproducing ``(x - d)_+`` exactly on the grid."""
    left = np.concatenate([[0.0], nodes[:-1]])
    covered = np.maximum(nodes - d, 0.0) - np.maximum(left - d, 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        s = np.where(dx > 0, covered / np.where(dx > 0, dx, 1.0), 0.0)
    return np.clip(s, 0.0, 1.0)


def brute_solve(
    measure: GridMeasure,
    utility: UtilityModel,
    w0: float,
    rho: float,
    nu: float,
    pg_tol: float = 1e-8,
    max_rounds: int = 60,
) -> OracleResult:
    """Globally solve the discretised variance-constrained contract problem.

    Initialises from a feasible stop-loss schedule (the bound-binding layer
    when the bound binds, the unconstrained layer otherwise) and iterates
    multiplier updates with penalty doubling until the variance constraint
    is satisfied to ``1e-11`` relative.  The returned schedule is polished
    to exact feasibility by a proportional slope rescale, which changes the
    objective only at second order.
    """
    nodes = measure.nodes
    weights = measure.weights
    n = nodes.size
    if n > _MAX_ORACLE_NODES:
        raise ValidationError(
            f"oracle limited to {_MAX_ORACLE_NODES} nodes, got {n}"
        )
    dx = np.diff(np.concatenate([[0.0], nodes]))

    arrow = arrow_deductible(measure, utility, w0, rho)
    if is_variance_slack(arrow, nu):
        start = arrow.d_star
    else:
        start = compute_bracket(measure, arrow, nu).d_L
    slopes = _stop_loss_slopes(nodes, dx, start)

    one_rho = 1.0 + rho

    def split(s):
        pay = np.cumsum(s * dx)
        mean_pay = float(np.dot(weights, pay))
        cvar = float(np.dot(weights, pay * pay) - mean_pay * mean_pay)
        return pay, mean_pay, cvar

    def al_value_grad(s, lam, mu_pen):
        pay, mean_pay, cvar = split(s)
        wealth = w0 - nodes + pay - one_rho * mean_pay
        marg = np.asarray(utility.mu(wealth), dtype=float)
        value = float(np.dot(weights, utility.u(wealth)))
        c = cvar - nu
        lam_eff = max(0.0, lam + mu_pen * c)
        penalty = (lam_eff * lam_eff - lam * lam) / (2.0 * mu_pen)
        grad_pay = -weights * (marg - one_rho * float(np.dot(weights, marg)))
        grad_pay += lam_eff * 2.0 * weights * (pay - mean_pay)
        grad_s = dx * np.cumsum(grad_pay[::-1])[::-1]
        return -value + penalty, grad_s

    lam = 0.0
    mu_pen = 10.0 / max(nu, 1e-12)
    total_iters = 0
    prev_viol = np.inf
    converged = False
    bounds = [(0.0, 1.0)] * n
    for _ in range(max_rounds):
        res = minimize(
            al_value_grad,
            slopes,
            args=(lam, mu_pen),
            jac=True,
            method="L-BFGS-B",
            bounds=bounds,
            options={"maxiter": 20000, "ftol": 1e-16, "gtol": pg_tol * 1e-2, "maxcor": 30},
        )
        slopes = np.clip(res.x, 0.0, 1.0)
        total_iters += int(res.nit)
        _, _, cvar = split(slopes)
        c = cvar - nu
        if lam == 0.0 and c <= 0.0:
            converged = True
            break
        if abs(c) <= _FEAS_RTOL * max(nu, 1e-12):
            converged = True
            break
        lam = max(0.0, lam + mu_pen * c)
        if abs(c) > 0.25 * prev_viol and mu_pen < 1e18:
            mu_pen *= 4.0
        prev_viol = abs(c)

    # Exact-feasibility polish: shrink all slopes proportionally so the
    # variance lands on nu (second-order effect on the objective).
    pay, mean_pay, cvar = split(slopes)
    if cvar > nu:
        slopes = slopes * np.sqrt(nu / cvar)
        pay, mean_pay, cvar = split(slopes)

    wealth = w0 - nodes + pay - one_rho * mean_pay
    marg = np.asarray(utility.mu(wealth), dtype=float)
    grad_pay = -weights * (marg - one_rho * float(np.dot(weights, marg)))
    grad_pay += lam * 2.0 * weights * (pay - mean_pay)
    grad_s = dx * np.cumsum(grad_pay[::-1])[::-1]
    at_lower = slopes <= 1e-12
    at_upper = slopes >= 1.0 - 1e-12
    viol = np.abs(grad_s)
    viol[at_lower] = np.maximum(0.0, -grad_s[at_lower])
    viol[at_upper] = np.maximum(0.0, grad_s[at_upper])
    kkt_residual = float(np.max(viol)) if n else 0.0

    objective = objective_value(measure, utility, w0, rho, pay)
    result = OracleResult(
        schedule=pay,
        objective=objective,
        active_variance=bool(nu - cvar <= 1e-8 * max(nu, 1e-12)),
        iterations=total_iters,
        kkt_residual=kkt_residual,
        multiplier=lam,
        converged=converged,
    )
    _validate_oracle(result, measure, nu)
    return result


def _validate_oracle(result: OracleResult, measure: GridMeasure, nu: float):
    pay = result.schedule
    nodes = measure.nodes
    slop = 1e-9 * max(measure.support_max, 1.0)
    if np.any(pay < -slop) or np.any(pay - nodes > slop):
        raise ValidationError("oracle schedule escapes [0, x]")
    inc = np.diff(pay)
    if np.any(inc < -slop) or np.any(inc - np.diff(nodes) > slop):
        raise ValidationError("oracle schedule increments escape [0, dx]")
    if measure.variance_of(pay) > nu + _VAR_SLACK:
        raise ValidationError("oracle schedule violates the variance bound")


# -- crossing and stochastic-order validators --------------------------------


def upcross_count(xs, f_vals, g_vals, tol: Optional[float] = None) -> CrossingProfile:
    """Count sign changes of ``f - g`` along ``xs`` with a dead band.

    Values within ``tol`` of zero are neutral; contiguous neutral stretches
    merge into the adjacent crossing, whose location is the midpoint of the
    gap between the signed runs.  ``direction_first`` is the sign of
    ``f - g`` right after the first crossing (0 when there is none).
    """
    xs = np.asarray(xs, dtype=float)
    h = np.asarray(f_vals, dtype=float) - np.asarray(g_vals, dtype=float)
    if tol is None:
        scale = max(
            float(np.max(np.abs(f_vals))), float(np.max(np.abs(g_vals))), 1e-300
        )
        tol = 1e-7 * scale
    cls = np.zeros(h.size, dtype=int)
    cls[h > tol] = 1
    cls[h < -tol] = -1
    locations = []
    direction_first = 0
    prev_sign = 0
    prev_idx = None
    for i, s in enumerate(cls):
        if s == 0:
            continue
        if prev_sign != 0 and s != prev_sign:
            locations.append(0.5 * (xs[prev_idx] + xs[i]))
            if direction_first == 0:
                direction_first = int(s)
        prev_sign = s
        prev_idx = i
    return CrossingProfile(
        count=len(locations), locations=tuple(locations), direction_first=direction_first
    )


def stop_loss_order_leq(measure: GridMeasure, z_vals, y_vals, tol: float = 1e-9) -> bool:
    """True when ``E[(Z - d)_+] <= E[(Y - d)_+]`` across the union of supports."""
    z = np.asarray(z_vals, dtype=float)
    y = np.asarray(y_vals, dtype=float)
    for d in np.union1d(z, y):
        lhs = measure.expect(np.maximum(z - d, 0.0))
        rhs = measure.expect(np.maximum(y - d, 0.0))
        if lhs > rhs + tol:
            return False
    return True


def convex_order_leq(measure: GridMeasure, z_vals, y_vals, tol: float = 1e-9) -> bool:
    """Convex order ``Z <=_cx Y``: equal means plus the stop-loss sweep."""
    z = np.asarray(z_vals, dtype=float)
    y = np.asarray(y_vals, dtype=float)
    if abs(measure.expect(z) - measure.expect(y)) > tol:
        return False
    return stop_loss_order_leq(measure, z, y, tol)


def less_downside_risk(
    measure: GridMeasure,
    z1_vals,
    z2_vals,
    moment_tol: float = 1e-6,
    integral_tol: float = 1e-9,
    sweep: int = 2001,
) -> bool:
    """True when ``Z1`` carries less downside risk than ``Z2``.

    Requires matching first two moments (within ``moment_tol``); then
    checks that the twice-iterated integral of ``F_{Z2} - F_{Z1}`` from the
    common support minimum stays above ``-integral_tol``.  The sweep grid
    is augmented with every jump location so the cumulative sums integrate
    the step distribution functions exactly; interior minima of the outer
    integral (where the inner integral changes sign inside a cell) are
    evaluated from the local quadratic.
    """
    z1 = np.asarray(z1_vals, dtype=float)
    z2 = np.asarray(z2_vals, dtype=float)
    m1, m2 = measure.expect(z1), measure.expect(z2)
    v1, v2 = measure.variance_of(z1), measure.variance_of(z2)
    if abs(m1 - m2) > moment_tol or abs(v1 - v2) > moment_tol:
        raise PreconditionError(
            f"downside comparison needs equal moments: means ({m1!r}, {m2!r}), "
            f"variances ({v1!r}, {v2!r})"
        )
    lo = min(float(np.min(z1)), float(np.min(z2)))
    hi = max(float(np.max(z1)), float(np.max(z2)))
    if hi <= lo:
        return True
    points = np.union1d(np.union1d(z1, z2), np.linspace(lo, hi, sweep))

    def cdf_on(ts_, vals):
        order = np.argsort(vals, kind="stable")
        sv = vals[order]
        cw = np.cumsum(measure.weights[order])
        idx = np.searchsorted(sv, ts_, side="right")
        out = np.zeros_like(ts_)
        nonzero = idx > 0
        out[nonzero] = cw[idx[nonzero] - 1]
        return out

    diff = cdf_on(points, z2) - cdf_on(points, z1)
    dp = np.diff(points)
    level = diff[:-1]  # both c.d.f.s are constant on [p_k, p_{k+1})
    inner = np.concatenate([[0.0], np.cumsum(level * dp)])
    outer = np.concatenate([[0.0], np.cumsum(inner[:-1] * dp + 0.5 * level * dp * dp)])
    minimum = float(np.min(outer))
    # The outer integral is quadratic per cell; where the inner integral
    # crosses zero inside a cell the vertex may undercut both endpoints.
    g0 = inner[:-1]
    crossing = (g0 * (g0 + level * dp) < 0.0) & (level != 0.0)
    if np.any(crossing):
        delta = -g0[crossing] / level[crossing]
        vertex = outer[:-1][crossing] + g0[crossing] * delta + 0.5 * level[crossing] * delta**2
        minimum = min(minimum, float(np.min(vertex)))
    return bool(minimum >= -integral_tol)
