import numpy as np
import pytest
from scipy.optimize import brentq

import varcontracts as vc
from varcontracts import losses
from conftest import bernoulli_loss, trunc_exponential_loss, uniform_loss


def test_ratio_is_one_at_zero_deductible_fair():
    grid = vc.discretize(uniform_loss(), 401)
    value = vc.phi(grid, vc.LogUtility(), 3.0, 0.0, 0.0)
    assert value == pytest.approx(1.0, abs=1e-12)


def test_ratio_below_one_just_above_zero():
    grid = vc.discretize(uniform_loss(), 401)
    assert vc.phi(grid, vc.LogUtility(), 3.0, 0.0, 0.05) < 1.0


def test_ratio_cara_closed_form():
    # For exponential utility the premium shift cancels:
    # phi(d) = E[exp(a (X ^ d))] exp(-a d).
    grid = vc.discretize(uniform_loss(), 1001)
    a = 1.0
    utility = vc.CaraUtility(a=a)
    for d in (0.1, 0.5, 0.97):
        expected = grid.expect(np.exp(a * np.minimum(grid.nodes, d))) * np.exp(-a * d)
        assert vc.phi(grid, utility, 2.0, 0.3, d) == pytest.approx(expected, rel=1e-12)
        assert expected < 1.0


def test_ratio_nonincreasing_sweep():
    cases = [
        (uniform_loss(), vc.LogUtility(), 3.0, 0.0),
        (uniform_loss(), vc.CaraUtility(a=1.0), 2.0, 0.2),
        (trunc_exponential_loss(), vc.CrraUtility(gamma=2.0), 8.0, 0.1),
    ]
    for loss, utility, w0, rho in cases:
        grid = vc.discretize(loss, 401)
        floor = vc.var_threshold(grid, rho)
        ds = np.linspace(floor, grid.support_max * (1 - 1e-9), 200)
        values = [vc.phi(grid, utility, w0, rho, d) for d in ds]
        assert np.all(np.diff(values) <= 1e-12)


def test_fair_pricing_gives_zero_deductible():
    # Mossin: with mass near zero and no loading, full insurance.
    for loss in (uniform_loss(), trunc_exponential_loss()):
        grid = vc.discretize(loss, 401)
        for utility, w0 in ((vc.LogUtility(), 6.0), (vc.CaraUtility(a=0.7), 2.0)):
            sol = vc.arrow_deductible(grid, utility, w0, 0.0)
            assert sol.d_star == 0.0


def test_var_floor_binds_on_bernoulli():
    grid = vc.discretize(bernoulli_loss(), 2)
    sol = vc.arrow_deductible(grid, vc.CaraUtility(a=0.1), 20.0, 1.5)
    assert sol.d_star == 10.0
    assert sol.var_at_d == 0.0


def test_deductible_matches_scalar_equation_for_cara_uniform():
    # On uniform(0,1) with exponential utility the threshold condition
    # phi(d) = 1/(1+rho) reduces to d + exp(-d) = 2 - 1/(1+rho).
    rho = 0.2
    target = 2.0 - 1.0 / (1.0 + rho)
    d_exact = brentq(lambda d: d + np.exp(-d) - target, 0.2, 1.0, xtol=1e-14)
    grid = vc.discretize(uniform_loss(), 2001)
    sol = vc.arrow_deductible(grid, vc.CaraUtility(a=1.0), 2.0, rho)
    assert sol.d_star == pytest.approx(d_exact, abs=1e-5)
    # supremum property on the solved grid ratio
    thr = 1.0 / (1.0 + rho)
    assert vc.phi(grid, vc.CaraUtility(a=1.0), 2.0, rho, sol.d_star - 1e-6) >= thr
    assert vc.phi(grid, vc.CaraUtility(a=1.0), 2.0, rho, sol.d_star + 1e-6) < thr


def test_variance_slack_test():
    grid = vc.discretize(uniform_loss(), 401)
    sol = vc.arrow_deductible(grid, vc.LogUtility(), 3.0, 0.0)
    second_moment = grid.expect(grid.nodes**2)
    assert vc.is_variance_slack(sol, second_moment) is True
    assert vc.is_variance_slack(sol, sol.var_at_d) is True  # boundary counts as slack
    assert vc.is_variance_slack(sol, 0.04) is False  # 0.04 < var[X] = 1/12
    with pytest.raises(ValueError):
        vc.is_variance_slack(sol, 0.0)


def test_slack_schedule_agrees_with_unconstrained_oracle():
    # At nu = E[X^2] the bound never binds, so the brute-force optimum is
    # the Arrow stop-loss up to grid resolution.
    grid = vc.discretize(uniform_loss(), 401)
    utility = vc.CaraUtility(a=1.0)
    w0, rho = 2.0, 0.1
    sol = vc.arrow_deductible(grid, utility, w0, rho)
    nu = grid.expect(grid.nodes**2)
    result = vc.brute_solve(grid, utility, w0, rho, nu)
    stop_loss = np.maximum(grid.nodes - sol.d_star, 0.0)
    spacing = grid.support_max / 401
    assert np.max(np.abs(result.schedule - stop_loss)) <= 2.0 * spacing
