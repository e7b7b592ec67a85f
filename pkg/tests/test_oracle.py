import numpy as np
import pytest

import varcontracts as vc
from varcontracts import losses
from varcontracts.oracle import objective_value, stop_loss_order_leq
from conftest import bernoulli_loss, trunc_exponential_loss, uniform_loss
from helpers import (
    feasible_indemnity,
    karlin_novikoff_pair,
    matching_cap_level,
    ohlin_pair,
    random_grid_measure,
)


# -- brute-force solve --------------------------------------------------------


def test_two_node_program_matches_hand_solution():
    grid = vc.discretize(bernoulli_loss(), 2)
    result = vc.brute_solve(grid, vc.CaraUtility(a=0.1), 20.0, 0.0, 4.0)
    assert np.allclose(result.schedule, [0.0, 4.0], atol=1e-6)
    assert result.active_variance
    assert result.converged


def test_slack_scenario_recovers_the_stop_loss():
    grid = vc.discretize(uniform_loss(), 401)
    utility = vc.CaraUtility(a=1.0)
    w0, rho = 2.0, 0.2
    arrow_sol = vc.arrow_deductible(grid, utility, w0, rho)
    nu = arrow_sol.var_at_d * 2.0
    result = vc.brute_solve(grid, utility, w0, rho, nu)
    stop_loss = np.maximum(grid.nodes - arrow_sol.d_star, 0.0)
    spacing = grid.support_max / 401
    assert np.max(np.abs(result.schedule - stop_loss)) <= 2 * spacing
    assert not result.active_variance


def test_mutual_optimality_on_interior_scenarios(loaded_cara_scenario, loaded_cara_solution):
    cases = [
        (loaded_cara_scenario, loaded_cara_solution),
    ]
    exp_scenario = vc.Scenario(
        loss=trunc_exponential_loss(), utility=vc.CrraUtility(gamma=2.0),
        w0=8.0, rho=0.0, nu=0.05,
    )
    cases.append((exp_scenario, vc.solve(exp_scenario)))
    for scenario, sol in cases:
        grid = sol.measure
        result = vc.brute_solve(grid, sol.utility, sol.w0, sol.rho, sol.nu)
        assert result.converged
        gap = sol.objective() - result.objective
        assert abs(gap) <= 1e-7
        assert np.max(np.abs(sol.indemnity_nodes - result.schedule)) <= (
            3.0 * grid.support_max / scenario.grid_n
        )


def test_oracle_schedule_is_feasible_by_construction(loaded_cara_scenario):
    sol_scenario = loaded_cara_scenario
    grid = sol_scenario.build_measure()
    result = vc.brute_solve(
        grid, sol_scenario.build_utility(), sol_scenario.w0, sol_scenario.rho, sol_scenario.nu
    )
    pay = result.schedule
    assert np.all(pay >= -1e-12)
    assert np.all(pay - grid.nodes <= 1e-9)
    inc = np.diff(pay)
    assert np.all(inc >= -1e-12)
    assert np.all(inc - np.diff(grid.nodes) <= 1e-9)
    assert grid.variance_of(pay) <= sol_scenario.nu + 1e-9


def test_oracle_node_budget():
    nodes = np.linspace(0.0, 1.0, 1500)
    nodes[0] = 0.0
    weights = np.full(1500, 1.0 / 1500)
    grid = vc.GridMeasure(nodes + np.arange(1500) * 1e-9, weights)
    with pytest.raises(vc.ValidationError):
        vc.brute_solve(grid, vc.CaraUtility(a=1.0), 2.0, 0.0, 0.01)


def test_objective_value_helper(fair_log_solution):
    direct = objective_value(
        fair_log_solution.measure,
        fair_log_solution.utility,
        fair_log_solution.w0,
        fair_log_solution.rho,
        fair_log_solution.indemnity_nodes,
    )
    assert direct == pytest.approx(fair_log_solution.objective(), abs=1e-14)


# -- crossing counter ---------------------------------------------------------


def test_single_crossing_line():
    xs = np.linspace(0.0, 1.0, 101)
    profile = vc.upcross_count(xs, xs - 0.5, np.zeros_like(xs), tol=1e-12)
    assert profile.count == 1
    assert profile.direction_first == 1
    assert profile.locations[0] == pytest.approx(0.5, abs=1e-12)


def test_equal_functions_have_no_crossings():
    xs = np.linspace(0.0, 1.0, 101)
    f = np.sin(xs)
    profile = vc.upcross_count(xs, f, f.copy())
    assert profile.count == 0
    assert profile.direction_first == 0
    assert profile.locations == ()


def test_double_crossing_parabola():
    xs = np.linspace(0.0, 1.0, 401)
    h = -(xs - 0.25) * (xs - 0.75)
    profile = vc.upcross_count(xs, h, np.zeros_like(xs), tol=1e-12)
    assert profile.count == 2
    assert profile.direction_first == 1
    assert profile.locations[0] == pytest.approx(0.25, abs=2e-3)
    assert profile.locations[1] == pytest.approx(0.75, abs=2e-3)


def test_dead_band_filters_noise():
    # Solver-level noise on top of an O(1) function must not create
    # spurious crossings: the dead band scales with the functions compared.
    xs = np.linspace(0.0, 1.0, 101)
    base = 1.0 + xs
    noise = 1e-12 * np.sin(37.0 * xs)
    profile = vc.upcross_count(xs, base + noise, base)
    assert profile.count == 0


# -- convex order ------------------------------------------------------------


def test_jensen_direction():
    rng = np.random.default_rng(5)
    measure = random_grid_measure(rng)
    y = measure.nodes**1.3
    z = np.full_like(y, measure.expect(y))
    assert vc.convex_order_leq(measure, z, y) is True
    assert vc.convex_order_leq(measure, y, y.copy()) is True


def test_capped_loss_is_a_convex_order_floor():
    # Any feasible transform with matched mean dominates the capped loss.
    rng = np.random.default_rng(99)
    grid = vc.discretize(uniform_loss(), 200)
    for _ in range(20):
        h = feasible_indemnity(rng, grid)
        k = matching_cap_level(grid, grid.expect(h))
        capped = np.minimum(grid.nodes, k)
        assert vc.convex_order_leq(grid, capped, h, tol=1e-9) is True


def test_convex_order_rejects_mean_mismatch():
    rng = np.random.default_rng(6)
    measure = random_grid_measure(rng)
    y = measure.nodes
    assert vc.convex_order_leq(measure, y + 1.0, y) is False


# -- downside risk ------------------------------------------------------------


def test_downside_identical_variables():
    rng = np.random.default_rng(8)
    measure = random_grid_measure(rng)
    z = measure.nodes**2
    assert vc.less_downside_risk(measure, z, z.copy()) is True


def test_downside_three_point_spread():
    # Move a symmetric spread from the high outcome to the low outcome:
    # means and variances match, but the spread-down variable carries more
    # downside risk (its third moment drops).
    h = 0.5
    measure = vc.GridMeasure([1.0, 2.0, 3.0, 4.0], [0.25, 0.25, 0.25, 0.25])
    z1 = np.array([1.0, 1.0, 3.0 - h, 3.0 + h])
    z2 = np.array([1.0 - h, 1.0 + h, 3.0, 3.0])
    assert measure.expect(z1) == pytest.approx(measure.expect(z2))
    assert measure.variance_of(z1) == pytest.approx(measure.variance_of(z2))
    assert measure.expect(z1**3) > measure.expect(z2**3)
    assert vc.less_downside_risk(measure, z1, z2) is True
    assert vc.less_downside_risk(measure, z2, z1) is False


def test_downside_rejects_moment_mismatch():
    measure = vc.GridMeasure([0.0, 1.0], [0.5, 0.5])
    with pytest.raises(vc.PreconditionError):
        vc.less_downside_risk(measure, measure.nodes, measure.nodes + 1.0)


# -- appendix validators -------------------------------------------------------


def test_ohlin_criterion_on_random_pairs():
    rng = np.random.default_rng(20240818)
    done = 0
    while done < 20:
        measure = random_grid_measure(rng)
        pair = ohlin_pair(rng, measure)
        if pair is None:
            continue
        h1, h2 = pair
        assert measure.expect(h1) == pytest.approx(measure.expect(h2), rel=1e-12)
        profile = vc.upcross_count(measure.nodes, h1, h2, tol=1e-12)
        assert profile.count == 1 and profile.direction_first == 1
        assert vc.convex_order_leq(measure, h2, h1, tol=1e-9) is True
        done += 1


def test_karlin_novikoff_criterion_on_random_pairs():
    rng = np.random.default_rng(20240819)
    for _ in range(20):
        measure = random_grid_measure(rng)
        z, y = karlin_novikoff_pair(rng, measure)
        assert measure.expect(z) <= measure.expect(y) + 1e-12
        # The contraction's c.d.f. up-crosses the original's: the sign of
        # F_Z - F_Y may switch from - to + at most once (the up-cross
        # definition allows equalities), and never switches back.
        ts = np.linspace(0.0, measure.support_max, 500)
        f_z = np.array([np.sum(measure.weights[z <= t]) for t in ts])
        f_y = np.array([np.sum(measure.weights[y <= t]) for t in ts])
        profile = vc.upcross_count(ts, f_z, f_y, tol=1e-12)
        assert profile.count <= 1
        assert profile.count == 0 or profile.direction_first == 1
        assert stop_loss_order_leq(measure, z, y, tol=1e-9) is True
