"""Acceptance suite: one test per exit criterion, each printing a verdict line.

Shared solves are cached in module fixtures; every criterion states its
tolerance inline.
"""

import time

import numpy as np
import pytest

import varcontracts as vc
from varcontracts import losses
from conftest import bernoulli_loss, trunc_exponential_loss, uniform_loss
from helpers import karlin_novikoff_pair, ohlin_pair, random_grid_measure
from varcontracts.oracle import stop_loss_order_leq

GRID_N = 401


def _report(num, desc, passed):
    print(f"ACCEPTANCE {num:02d}: {'PASS' if passed else 'FAIL'} - {desc}")
    assert passed, f"criterion {num} failed: {desc}"


def _random_interior_scenarios(rng, count=10):
    """Randomised interior scenarios cycling loss family, utility and loading."""
    utilities = (vc.LogUtility(), vc.CrraUtility(gamma=2.0), vc.CaraUtility(a=1.0))
    out = []
    k = 0
    while len(out) < count:
        fam = k % 3
        if fam == 0:
            loss = uniform_loss()
        elif fam == 1:
            loss = trunc_exponential_loss(rate=rng.uniform(0.5, 2.0), support_max=3.0)
        else:
            loss = vc.TruncatedContinuousLoss(
                "uniform", {"high": 1.0}, 1.0, atom_at_zero=rng.uniform(0.1, 0.3)
            )
        utility = utilities[(k // 3) % 3]
        rho = 0.0 if k % 2 == 0 else 0.2
        k += 1
        grid = vc.discretize(loss, GRID_N)
        w0 = grid.support_max + (1.0 + rho) * losses.mean(grid) + rng.uniform(0.5, 1.5)
        arrow_sol = vc.arrow_deductible(grid, utility, w0, rho)
        if arrow_sol.var_at_d <= 0:
            continue
        nu = float(rng.uniform(0.25, 0.6) * arrow_sol.var_at_d)
        out.append(vc.Scenario(loss=loss, utility=utility, w0=w0, rho=rho, nu=nu, grid_n=GRID_N))
    return out


@pytest.fixture(scope="module")
def interior_batch():
    rng = np.random.default_rng(20240820)
    scenarios = _random_interior_scenarios(rng)
    solutions = [vc.solve(s) for s in scenarios]
    assert all(
        s.regime in (vc.INTERIOR_FAIR, vc.INTERIOR_LOADED) for s in solutions
    ), [s.regime for s in solutions]
    return scenarios, solutions


@pytest.fixture(scope="module")
def all_regime_solutions(interior_batch):
    _, interior = interior_batch
    slack = vc.solve(
        vc.Scenario(loss=uniform_loss(), utility=vc.LogUtility(), w0=3.0, rho=0.0, nu=0.2)
    )
    slack_loaded = vc.solve(
        vc.Scenario(loss=uniform_loss(), utility=vc.CaraUtility(a=1.0), w0=2.0, rho=0.2, nu=0.02)
    )
    twopoint = vc.solve(
        vc.Scenario(loss=bernoulli_loss(), utility=vc.CaraUtility(a=0.1), w0=20.0, rho=0.0, nu=4.0)
    )
    return list(interior) + [slack, slack_loaded, twopoint]


def test_criterion_01_oracle_equivalence(interior_batch):
    scenarios, solutions = interior_batch
    ok = True
    for scenario, sol in zip(scenarios, solutions):
        start = time.perf_counter()
        result = vc.brute_solve(
            sol.measure, sol.utility, sol.w0, sol.rho, sol.nu,
            pg_tol=scenario.tolerances.oracle_pg_tol,
        )
        elapsed = time.perf_counter() - start
        gap = float(np.max(np.abs(sol.indemnity_nodes - result.schedule)))
        tolerance = 3.0 * sol.measure.support_max / scenario.grid_n
        ok &= result.converged and gap <= tolerance and elapsed < 30.0
    _report(1, "solver/oracle sup-norm gap <= 3*M/grid_n on 10 randomised scenarios, "
               "each certification under 30 s", ok)


def test_criterion_02_binding_moments(interior_batch):
    _, solutions = interior_batch
    ok = True
    for sol in solutions:
        ex = losses.mean(sol.measure)
        ok &= abs(sol.mean_residual) <= 1e-8 * ex
        ok &= abs(sol.var_residual) <= 1e-8 * sol.nu
    _report(2, "interior solves bind mean and variance within 1e-8 relative", ok)


def test_criterion_03_incentive_compatibility(all_regime_solutions):
    ok = True
    for sol in all_regime_solutions:
        nodes = sol.measure.nodes
        pay = sol.indemnity_nodes
        slopes = np.atleast_1d(sol.marginal(nodes))
        ok &= abs(float(np.atleast_1d(sol.indemnity(0.0))[0])) <= 1e-12
        ok &= bool(np.all(pay >= -1e-12) and np.all(pay <= nodes + 1e-12))
        ok &= bool(np.all((slopes >= -1e-12) & (slopes <= 1 + 1e-12)))
        ok &= bool(np.all(np.diff(nodes - pay) >= -1e-10))
    _report(3, "zero payment at zero loss, grid marginals in [0,1] and "
               "non-decreasing retention on every regime", ok)


def test_criterion_04_mossin_deductible():
    ok = True
    for rho in (0.0, 0.05, 0.2):
        scenario = vc.Scenario(
            loss=uniform_loss(), utility=vc.CaraUtility(a=1.0), w0=2.0, rho=rho, nu=0.006
        )
        sol = vc.solve(scenario)
        floor = vc.var_threshold(sol.measure, rho)
        if rho == 0.0:
            ok &= sol.regime == vc.INTERIOR_FAIR and sol.d_tilde == 0.0
        else:
            ok &= sol.regime == vc.INTERIOR_LOADED and floor > 0.0 and sol.d_tilde > floor
    _report(4, "deductible vanishes exactly at fair pricing and exceeds the "
               "positive quantile floor otherwise (rho in {0, 0.05, 0.2})", ok)


def test_criterion_05_slack_reduction():
    slack_fair = vc.solve(
        vc.Scenario(loss=uniform_loss(), utility=vc.LogUtility(), w0=3.0, rho=0.0, nu=0.2)
    )
    ok = slack_fair.regime == vc.SLACK_STOP_LOSS and slack_fair.d_star == 0.0
    ok &= bool(np.array_equal(slack_fair.indemnity_nodes, slack_fair.measure.nodes))
    slack_loaded = vc.solve(
        vc.Scenario(loss=uniform_loss(), utility=vc.CaraUtility(a=1.0), w0=2.0, rho=0.2, nu=0.02)
    )
    grid = slack_loaded.measure
    arrow_sol = vc.arrow_deductible(grid, slack_loaded.utility, 2.0, 0.2)
    ok &= slack_loaded.regime == vc.SLACK_STOP_LOSS
    ok &= slack_loaded.d_star == arrow_sol.d_star
    expected = np.maximum(grid.nodes - arrow_sol.d_star, 0.0)
    ok &= bool(np.array_equal(slack_loaded.indemnity_nodes, expected))
    _report(5, "slack bound reproduces the unconstrained stop-loss exactly; "
               "fair pricing gives full insurance", ok)


def test_criterion_06_two_point_degeneracy():
    grid = vc.discretize(bernoulli_loss(), 2)
    arrow_sol = vc.arrow_deductible(grid, vc.CaraUtility(a=0.1), 20.0, 0.0)
    bracket = vc.compute_bracket(grid, arrow_sol, 4.0)
    sol = vc.solve(
        vc.Scenario(loss=bernoulli_loss(), utility=vc.CaraUtility(a=0.1), w0=20.0, rho=0.0, nu=4.0)
    )
    ok = abs(bracket.d_L - 6.0) <= 1e-10
    ok &= abs(bracket.K_U - 4.0) <= 1e-10
    ok &= abs(float(np.atleast_1d(sol.indemnity(10.0))[0]) - 4.0) <= 1e-10
    _report(6, "Bernoulli(0:1/2, 10:1/2) with bound 4 gives d_L=6, K_U=4 and a "
               "payment of 4 at the loss point, exact to 1e-10", ok)


def _phi_pattern_ok(sol):
    phi = vc.kkt_phi_profile(sol)
    nodes = sol.measure.nodes
    wealth = sol.w0 - nodes + sol.indemnity_nodes - sol.premium
    scale = 1e-6 * sol.measure.expect(sol.utility.mu(wealth))
    deductible = sol.d_tilde or 0.0
    below = np.isfinite(phi) & (nodes < deductible)
    above = np.isfinite(phi) & (nodes >= deductible)
    ok = bool(np.all(np.abs(phi[above]) <= scale))
    if below.any():
        # The grid has no mass strictly between the last node below the
        # deductible and the deductible itself, so the exact grid value of
        # the discriminant at that node is zero; strict negativity applies
        # to every node that still sees deductible-region mass in its tail.
        interior_below = below & (nodes < nodes[below][-1])
        ok &= bool(np.all(phi[interior_below] < 0.0))
        ok &= abs(phi[below][-1]) <= scale
    return ok


def test_criterion_07_kkt_certification(interior_batch):
    _, solutions = interior_batch
    ok = all(_phi_pattern_ok(sol) for sol in solutions)
    _report(7, "discriminant within 1e-6*E[u'] of zero on the coinsurance "
               "region and negative on the deductible region, every interior solve", ok)


def test_criterion_08_wealth_comparison_suite():
    scenario = vc.Scenario(loss=uniform_loss(), utility=vc.LogUtility(), w0=3.0, rho=0.0, nu=0.04)
    start = time.perf_counter()
    report = vc.compare_wealth(scenario, 3.0, 4.0)
    elapsed = time.perf_counter() - start
    ok = report.exposure_crossings.count == 2
    ok &= report.exposure_crossings.direction_first == 1
    ok &= report.mean_coverage[0] < report.mean_coverage[1]
    ok &= report.betas[1] < report.betas[0]
    ok &= report.downside_verdict is True
    ok &= elapsed < 10.0
    _report(8, "wealth pair (3,4): exactly two exposure up-crossings, larger "
               "coverage and smaller shrinkage for the wealthier insured, "
               "downside check true, under 10 s", ok)


def test_criterion_09_variance_comparison_suite():
    scenario = vc.Scenario(loss=uniform_loss(), utility=vc.LogUtility(), w0=3.0, rho=0.0, nu=0.04)
    report = vc.compare_variance(scenario, 0.02, 0.05)
    ok = report.exposure_crossings.count == 1
    ok &= report.exposure_crossings.direction_first == 1
    ok &= report.checks.get("pointwise_indemnity_increases") is True
    ok &= report.convex_order_verdict is True
    ok &= report.mean_coverage[0] < report.mean_coverage[1]
    ok &= report.betas[1] < report.betas[0]
    _report(9, "bound pair (0.02, 0.05): single exposure up-crossing, pointwise "
               "larger schedule under the looser bound, convex order true", ok)


def test_criterion_10_indemnity_share_monotone(interior_batch, all_regime_solutions):
    _, interior = interior_batch
    prudent = [s for s in all_regime_solutions if s.utility.strictly_prudent]
    ok = all(vc.vajda_ratio(sol) for sol in list(interior) + prudent)
    _report(10, "indemnity-to-loss ratio non-decreasing on every prudent solve", ok)


def test_criterion_11_appendix_validators():
    rng = np.random.default_rng(20240821)
    ok = True
    done = 0
    while done < 20:
        measure = random_grid_measure(rng)
        pair = ohlin_pair(rng, measure)
        if pair is None:
            continue
        h1, h2 = pair
        ok &= vc.convex_order_leq(measure, h2, h1, tol=1e-9)
        done += 1
    for _ in range(20):
        measure = random_grid_measure(rng)
        z, y = karlin_novikoff_pair(rng, measure)
        ok &= measure.expect(z) <= measure.expect(y) + 1e-12
        ok &= stop_loss_order_leq(measure, z, y, tol=1e-9)
    _report(11, "single-crossing and contraction pairs satisfy the predicted "
               "convex/stop-loss orders on 20 randomised pairs each", ok)
