"""Comparative statics under actuarially fair pricing.

Two experiments: vary the insured's initial wealth at a fixed variance
bound, and vary the variance bound at fixed wealth.  Each solves the two
scenarios, recomputes the insurer's exposure functions on the common grid
and evaluates the predicted orderings (up-crossing pattern, expected
coverage, shrinkage parameters, downside/convex-order comparisons).
Reports are emitted even when a predicted ordering fails, flagged through
``checks``/``ok``, so counterexample candidates surface instead of
aborting; only violated hypotheses raise.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import losses, oracle, solver
from .contracts import ContractSolution
from .errors import PreconditionError
from .losses import TruncatedContinuousLoss
from .oracle import CrossingProfile
from .scenarios import Scenario


@dataclass(frozen=True, eq=False)
class ComparisonReport:
    """Outcome of one comparative-statics run (facts plus verdicts)."""

    kind: str
    scenario_a: Scenario
    scenario_b: Scenario
    contract_a: ContractSolution
    contract_b: ContractSolution
    exposure_crossings: CrossingProfile
    indemnity_crossings: CrossingProfile
    mean_coverage: tuple
    betas: tuple
    downside_verdict: Optional[bool]
    convex_order_verdict: Optional[bool]
    checks: dict
    ok: bool


def _common_preconditions(scenario: Scenario):
    problems = []
    if scenario.rho != 0.0:
        problems.append(f"comparative statics require fair pricing (rho = 0), got rho={scenario.rho!r}")
    if not isinstance(scenario.loss, TruncatedContinuousLoss):
        problems.append(
            "comparative statics require a strictly increasing loss distribution "
            "on (0, M); discrete losses do not qualify"
        )
    return problems


def _interior_pair(scenario_a: Scenario, scenario_b: Scenario):
    sol_a = solver.solve(scenario_a)
    sol_b = solver.solve(scenario_b)
    measure = sol_a.measure
    pay_a, pay_b = sol_a.indemnity_nodes, sol_b.indemnity_nodes
    # Exposures recomputed from the schedules themselves (fair pricing), so
    # their grid means vanish identically.
    expo_a = pay_a - measure.expect(pay_a)
    expo_b = pay_b - measure.expect(pay_b)
    return sol_a, sol_b, measure, pay_a, pay_b, expo_a, expo_b


def _indemnity_ordering_check(nodes, pay_a, pay_b, crossings, tol):
    """Either schedule a sits strictly below b on x > 0, or it up-crosses b once."""
    pos = nodes > 0.0
    strictly_below = bool(np.all(pay_a[pos] < pay_b[pos] + tol))
    single_upcross = crossings.count == 1 and crossings.direction_first == 1
    return (crossings.count == 0 and strictly_below) or single_upcross


def compare_wealth(scenario: Scenario, w1: float, w2: float) -> ComparisonReport:
    """Effect of initial wealth on the optimal contract at a fixed bound.

    For ``w1 < w2`` under fair pricing, a binding bound and a strictly
    decreasing-absolute-prudence insured, the exposure with the larger
    wealth up-crosses the other exactly twice, expected coverage and the
    shrinkage parameter move monotonically, and the insurer's profit with
    the wealthier insured carries less downside risk.
    """
    problems = _common_preconditions(scenario)
    if not w1 <= w2:
        problems.append(f"wealth levels must satisfy w1 <= w2, got ({w1!r}, {w2!r})")
    measure = scenario.build_measure()
    if not scenario.nu < losses.variance(measure):
        problems.append(
            f"variance bound {scenario.nu!r} must lie below var[X] = {losses.variance(measure)!r}"
        )
    utility = scenario.utility
    probe_lo = min(w1, w2) - measure.support_max - (1.0 + scenario.rho) * losses.mean(measure)
    if probe_lo > utility.domain[0]:
        if not utility.is_strictly_dap(probe_lo, max(w1, w2)):
            problems.append(
                f"{type(utility).__name__} does not have strictly decreasing absolute prudence"
            )
    if problems:
        raise PreconditionError("; ".join(problems))

    scenario_a = scenario.replace(w0=w1)
    scenario_b = scenario.replace(w0=w2)
    sol_a, sol_b, measure, pay_a, pay_b, expo_a, expo_b = _interior_pair(scenario_a, scenario_b)
    nodes = measure.nodes

    expo_crossings = oracle.upcross_count(nodes, expo_b, expo_a)
    pay_crossings = oracle.upcross_count(nodes, pay_a, pay_b)
    scale = max(float(np.max(np.abs(pay_b))), 1e-300)
    tol = scenario.tolerances.crossing_deadband_rel * scale

    checks = {}
    downside = None
    if w1 < w2:
        downside = oracle.less_downside_risk(measure, -expo_b, -expo_a)
        checks = {
            "exposure_double_upcross": expo_crossings.count == 2
            and expo_crossings.direction_first == 1,
            "mean_coverage_increases": sol_a.m_star < sol_b.m_star,
            "shrinkage_decreases": sol_b.beta_star < sol_a.beta_star,
            "indemnity_ordering": _indemnity_ordering_check(
                nodes, pay_a, pay_b, pay_crossings, tol
            ),
            "less_downside_risk": bool(downside),
        }
    return ComparisonReport(
        kind="wealth",
        scenario_a=scenario_a,
        scenario_b=scenario_b,
        contract_a=sol_a,
        contract_b=sol_b,
        exposure_crossings=expo_crossings,
        indemnity_crossings=pay_crossings,
        mean_coverage=(sol_a.m_star, sol_b.m_star),
        betas=(sol_a.beta_star, sol_b.beta_star),
        downside_verdict=downside,
        convex_order_verdict=None,
        checks=checks,
        ok=all(checks.values()) if checks else True,
    )


def compare_variance(scenario: Scenario, nu1: float, nu2: float) -> ComparisonReport:
    """Effect of the variance bound on the optimal contract at fixed wealth.

    For ``0 < nu1 < nu2 < var[X]`` under fair pricing the exposure with the
    looser bound up-crosses the tighter one exactly once; expected coverage
    rises with the bound and the shrinkage parameter falls; with a weakly
    prudent insured the looser-bound schedule dominates pointwise, and the
    tighter exposure precedes the looser one in convex order.
    """
    problems = _common_preconditions(scenario)
    measure = scenario.build_measure()
    var_x = losses.variance(measure)
    if not 0.0 < nu1:
        problems.append(f"nu1 must be > 0, got {nu1!r}")
    if not nu1 <= nu2:
        problems.append(f"variance bounds must satisfy nu1 <= nu2, got ({nu1!r}, {nu2!r})")
    if not nu2 < var_x:
        problems.append(f"nu2 = {nu2!r} must lie strictly below var[X] = {var_x!r} to bind")
    if problems:
        raise PreconditionError("; ".join(problems))

    scenario_a = scenario.replace(nu=nu1)
    scenario_b = scenario.replace(nu=nu2)
    sol_a, sol_b, measure, pay_a, pay_b, expo_a, expo_b = _interior_pair(scenario_a, scenario_b)
    nodes = measure.nodes

    expo_crossings = oracle.upcross_count(nodes, expo_b, expo_a)
    pay_crossings = oracle.upcross_count(nodes, pay_a, pay_b)
    scale = max(float(np.max(np.abs(pay_b))), 1e-300)
    tol = scenario.tolerances.crossing_deadband_rel * scale

    checks = {}
    convex_verdict = None
    if nu1 < nu2:
        convex_verdict = oracle.convex_order_leq(measure, expo_a, expo_b, tol=1e-9)
        checks = {
            "exposure_single_upcross": expo_crossings.count == 1
            and expo_crossings.direction_first == 1,
            "mean_coverage_increases": sol_a.m_star < sol_b.m_star,
            "shrinkage_decreases": sol_b.beta_star < sol_a.beta_star,
            "convex_order": bool(convex_verdict),
        }
        if scenario.utility.weakly_prudent:
            pos = nodes > 0.0
            checks["pointwise_indemnity_increases"] = bool(
                np.all(pay_a[pos] < pay_b[pos] + tol)
            )
    return ComparisonReport(
        kind="variance",
        scenario_a=scenario_a,
        scenario_b=scenario_b,
        contract_a=sol_a,
        contract_b=sol_b,
        exposure_crossings=expo_crossings,
        indemnity_crossings=pay_crossings,
        mean_coverage=(sol_a.m_star, sol_b.m_star),
        betas=(sol_a.beta_star, sol_b.beta_star),
        downside_verdict=None,
        convex_order_verdict=convex_verdict,
        checks=checks,
        ok=all(checks.values()) if checks else True,
    )
