"""Interior contract solver and optimality certification hooks.

Regime dispatch: a slack variance bound keeps the unconstrained stop-loss;
a collapsed expected-indemnity bracket pins the two-point contract; every
other admissible scenario has a coinsurance-above-a-deductible optimum
found by nested scalar root-finding.  The inner unknown zeros the variance
residual at a fixed expected-indemnity parameter (shrinkage ``beta`` when
pricing is fair, deductible ``d_tilde`` under a positive loading) and the
outer unknown zeros the mean residual.  Each residual map is continuous
and empirically monotone in its own unknown; this is checked by probing,
with a coarse grid scan plus local refinement as the fallback.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import brentq

from . import losses
from .arrow import arrow_deductible, is_variance_slack
from .bounds import IndemnityBracket, compute_bracket, two_point_solution
from .contracts import (
    INTERIOR_FAIR,
    INTERIOR_LOADED,
    SLACK_STOP_LOSS,
    TWO_POINT,
    ContractSolution,
    slack_solution,
)
from .errors import SolverError, UnsupportedScenarioError
from .losses import GridMeasure
from .pointwise import coinsurance_roots
from .rootfind import _BRENT_RTOL, expand_down, expand_up
from .utilities import UtilityModel

_EDGE_INSET = 1e-9
_PROBES = (9, 33, 129)


def indemnity_pointwise(
    x,
    m: float,
    beta: float,
    utility: UtilityModel,
    w0: float,
    rho: float,
    branch: str = "fair",
    d_tilde: float = None,
):
    """Indemnity at loss ``x`` for given multipliers, on either branch.

    ``fair`` solves ``u'(w0 - x + y - m) - 2 beta y - u'(w0 - m) = 0`` in
    ``y``; ``loaded`` pays zero up to ``d_tilde`` and above it solves the
    same equation with the multiplier ``u'(w0 - (1+rho) m - d_tilde)``.
    """
    shift = w0 - (1.0 + rho) * m
    if branch == "fair":
        lam = float(utility.mu(shift))
    elif branch == "loaded":
        if d_tilde is None:
            raise ValueError("loaded branch requires d_tilde")
        lam = float(utility.mu(shift - d_tilde))
    else:
        raise ValueError(f"unknown branch {branch!r}")
    y, _ = coinsurance_roots(x, shift, lam, beta, utility)
    return y


def loaded_multipliers(
    measure: GridMeasure,
    utility: UtilityModel,
    w0: float,
    rho: float,
    m: float,
    d_tilde: float,
):
    """Multiplier pair ``(lam, beta)`` implied by ``(m, d_tilde)`` when ``rho > 0``.

    ``2 beta = (u'(w0 - d - (1+rho) m) - (1+rho) E[u'(w0 - X^d - (1+rho) m)]) / (m rho)``.
    """
    shift = w0 - (1.0 + rho) * m
    lam = float(utility.mu(shift - d_tilde))
    expected = measure.expect(utility.mu(shift - np.minimum(measure.nodes, d_tilde)))
    beta = (lam - (1.0 + rho) * expected) / (2.0 * m * rho)
    return lam, beta


class _InteriorSolver:
    """Nested root-finder for one scenario with a binding variance bound."""

    def __init__(self, measure, utility, w0, rho, nu, bracket, pointwise_atol=1e-12):
        self.measure = measure
        self.utility = utility
        self.w0 = w0
        self.rho = rho
        self.nu = nu
        self.bracket = bracket
        self.atol = pointwise_atol
        self.inner_solves = 0
        self.outer_evals = 0
        self.pointwise_sweeps = 0
        self._warm = None  # last inner root, reused as the next bracket seed
        self._monotone_checked = False

    # -- shared plumbing ---------------------------------------------------

    def _roots(self, shift, lam, beta):
        y, sweeps = coinsurance_roots(
            self.measure.nodes, shift, lam, beta, self.utility, atol=self.atol
        )
        self.pointwise_sweeps += sweeps
        return y

    def _indemnity(self, m, inner):
        if self.rho == 0.0:
            shift = self.w0 - m
            return self._roots(shift, float(self.utility.mu(shift)), inner)
        lam, beta = loaded_multipliers(
            self.measure, self.utility, self.w0, self.rho, m, inner
        )
        if beta <= 0.0:
            raise SolverError(
                f"nonpositive shrinkage {beta!r} at m={m!r}, d_tilde={inner!r}"
            )
        shift = self.w0 - (1.0 + self.rho) * m
        return self._roots(shift, lam, beta)

    def _var_gap(self, m, inner):
        return self.measure.variance_of(self._indemnity(m, inner)) - self.nu

    def _check_monotone(self, gap, lo, hi, log_space):
        """One-time probe that the inner variance gap changes sign once."""
        if self._monotone_checked:
            return
        grid = np.geomspace(lo, hi, 9) if log_space else np.linspace(lo, hi, 9)
        signs = np.sign([gap(g) for g in grid])
        nz = signs[signs != 0]
        changes = int(np.sum(nz[1:] != nz[:-1]))
        if changes > 1:
            raise _MonotonicityViolation(
                f"inner variance residual changed sign {changes} times"
            )
        self._monotone_checked = True

    # -- fair branch (rho = 0): inner unknown is beta ----------------------

    def _fair_inner(self, m):
        self.inner_solves += 1
        gap = lambda b: self._var_gap(m, b)
        seed = self._warm if self._warm else float(self.utility.mu(self.w0 - m)) / max(
            self.measure.support_max, 1.0
        )
        lo, _ = expand_down(gap, seed, 0.0, want_positive=True)
        hi, _ = expand_up(gap, max(seed, lo * 4.0), None, want_positive=False)
        self._check_monotone(gap, lo, hi, log_space=True)
        beta = brentq(gap, lo, hi, xtol=1e-18, rtol=_BRENT_RTOL, maxiter=300)
        self._warm = beta
        return float(beta)

    # -- loaded branch (rho > 0): inner unknown is the deductible ----------

    def _loaded_floor(self, m):
        """Smallest deductible with a positive implied shrinkage."""
        shift = self.w0 - (1.0 + self.rho) * m
        nodes = self.measure.nodes
        mu = self.utility.mu

        def q(d):
            return float(mu(shift - d)) - (1.0 + self.rho) * self.measure.expect(
                mu(shift - np.minimum(nodes, d))
            )

        var_floor = losses.var_threshold(self.measure, self.rho)
        m_top = self.measure.support_max
        if q(var_floor) > 0.0:
            return var_floor
        if q(m_top) <= 0.0:
            raise SolverError(
                f"implied shrinkage never positive for m={m!r}: no loaded contract"
            )
        return brentq(q, var_floor, m_top, xtol=1e-14 * m_top, rtol=_BRENT_RTOL, maxiter=200)

    def _loaded_inner(self, m):
        self.inner_solves += 1
        m_top = self.measure.support_max
        floor = self._loaded_floor(m)
        lo = floor + _EDGE_INSET * (m_top - floor)
        hi = m_top - _EDGE_INSET * (m_top - floor)
        gap = lambda d: self._var_gap(m, d)
        if self._warm is not None and lo < self._warm < hi:
            a = max(lo, self._warm - 0.05 * (hi - lo))
            b = min(hi, self._warm + 0.05 * (hi - lo))
            if gap(a) > 0.0 >= gap(b):
                d = brentq(gap, a, b, xtol=1e-15 * m_top, rtol=_BRENT_RTOL, maxiter=300)
                self._warm = d
                return float(d)
        if gap(lo) <= 0.0 or gap(hi) >= 0.0:
            raise SolverError(
                f"variance residual does not bracket a deductible for m={m!r}"
            )
        self._check_monotone(gap, lo, hi, log_space=False)
        d = brentq(gap, lo, hi, xtol=1e-15 * m_top, rtol=_BRENT_RTOL, maxiter=300)
        self._warm = d
        return float(d)

    # -- outer solve on the expected indemnity -----------------------------

    def _outer_gap(self, m, inner_solve):
        self.outer_evals += 1
        inner = inner_solve(m)
        pay = self._indemnity(m, inner)
        return self.measure.expect(pay) - m, inner

    def _solve_outer(self, inner_solve):
        lo = self.bracket.m_L
        hi = self.bracket.m_U
        span = hi - lo
        a, b = lo + _EDGE_INSET * span, hi - _EDGE_INSET * span
        for n_probe in _PROBES:
            grid = np.linspace(a, b, n_probe)
            vals = np.full(n_probe, np.nan)
            for i, m in enumerate(grid):
                try:
                    vals[i], _ = self._outer_gap(m, inner_solve)
                except SolverError:
                    continue
            valid = np.isfinite(vals)
            signs = np.sign(vals[valid])
            idx = np.nonzero(valid)[0]
            changes = [
                (idx[k], idx[k + 1])
                for k in range(len(idx) - 1)
                if signs[k] != 0 and signs[k + 1] != 0 and signs[k] != signs[k + 1]
            ]
            if len(changes) > 1:
                raise _MonotonicityViolation("outer mean residual changed sign twice")
            if len(changes) == 1:
                i, j = changes[0]
                gap = lambda m: self._outer_gap(m, inner_solve)[0]
                m_star = brentq(
                    gap, grid[i], grid[j], xtol=1e-15 * max(hi, 1.0),
                    rtol=_BRENT_RTOL, maxiter=300,
                )
                return float(m_star)
        raise SolverError(
            "no sign change in the mean residual over the indemnity bracket",
            diagnostics={"m_L": lo, "m_U": hi},
        )

    # -- fallback: coarse grid scan plus local refinement ------------------

    def _fallback_scan(self, inner_lo, inner_hi, log_inner=False, rounds=40):
        """64x64 residual-norm scan shrunk around its argmin.

        Only used when a probe detects a violated monotonicity assumption.
        """
        lo_m, hi_m = self.bracket.m_L, self.bracket.m_U
        span = hi_m - lo_m
        lo_m, hi_m = lo_m + _EDGE_INSET * span, hi_m - _EDGE_INSET * span
        box = [lo_m, hi_m, inner_lo, inner_hi]
        best = None
        n = 64
        spread = np.geomspace if log_inner else np.linspace
        for _ in range(rounds):
            ms = np.linspace(box[0], box[1], n)
            inners = spread(box[2], box[3], n)
            best_local = None
            for m in ms:
                for inner in inners:
                    try:
                        pay = self._indemnity(m, inner)
                    except SolverError:
                        continue
                    mean_gap = self.measure.expect(pay) - m
                    var_gap = self.measure.variance_of(pay) - self.nu
                    norm = max(abs(mean_gap) / max(m, 1e-12), abs(var_gap) / self.nu)
                    if best_local is None or norm < best_local[0]:
                        best_local = (norm, m, inner)
            if best_local is None:
                break
            best = best_local
            if best[0] < 1e-12:
                break
            dm = (box[1] - box[0]) / 8.0
            di = (box[3] - box[2]) / 8.0
            box = [
                max(lo_m, best[1] - dm),
                min(hi_m, best[1] + dm),
                max(inner_lo, best[2] - di),
                min(inner_hi, best[2] + di),
            ]
            n = 16
        if best is None:
            raise SolverError("fallback grid scan found no evaluable point")
        return best[1], best[2]

    # -- assembly -----------------------------------------------------------

    def solve(self):
        try:
            if self.rho == 0.0:
                m_star = self._solve_outer(self._fair_inner)
                beta = self._fair_inner(m_star)
                d_tilde = 0.0
            else:
                m_star = self._solve_outer(self._loaded_inner)
                d_tilde = self._loaded_inner(m_star)
                beta = None
        except _MonotonicityViolation:
            if self.rho == 0.0:
                m_star, beta = self._fallback_scan(1e-10, 1e10, log_inner=True)
                d_tilde = 0.0
            else:
                m_star, d_tilde = self._fallback_scan(
                    losses.var_threshold(self.measure, self.rho),
                    self.measure.support_max,
                )
                beta = None
        return self._build(m_star, beta, d_tilde)

    def _build(self, m_star, beta, d_tilde):
        shift = self.w0 - (1.0 + self.rho) * m_star
        if self.rho == 0.0:
            lam = float(self.utility.mu(shift))
            regime = INTERIOR_FAIR
        else:
            lam, beta = loaded_multipliers(
                self.measure, self.utility, self.w0, self.rho, m_star, d_tilde
            )
            regime = INTERIOR_LOADED
        pay = self._roots(shift, lam, beta)
        mean_res = self.measure.expect(pay) - m_star
        var_res = self.measure.variance_of(pay) - self.nu
        return ContractSolution(
            regime=regime,
            measure=self.measure,
            utility=self.utility,
            w0=self.w0,
            rho=self.rho,
            nu=self.nu,
            indemnity_nodes=pay,
            m_star=m_star,
            premium=(1.0 + self.rho) * m_star,
            mean_residual=mean_res,
            var_residual=var_res,
            beta_star=float(beta),
            lambda_star=lam,
            d_tilde=float(d_tilde),
            iterations={
                "outer_evals": self.outer_evals,
                "inner_solves": self.inner_solves,
                "pointwise_sweeps": self.pointwise_sweeps,
            },
        )


class _MonotonicityViolation(SolverError):
    pass


def residuals(scenario, m: float, *, beta: float = None, d_tilde: float = None):
    """Mean and variance residuals ``(E[I] - m, var[I] - nu)`` at a trial point.

    Pass ``beta`` for the fair branch or ``d_tilde`` for the loaded branch.
    """
    measure = scenario.build_measure()
    utility = scenario.build_utility()
    if (beta is None) == (d_tilde is None):
        raise ValueError("provide exactly one of beta (fair) or d_tilde (loaded)")
    if beta is not None:
        pay = indemnity_pointwise(
            measure.nodes, m, beta, utility, scenario.w0, scenario.rho, branch="fair"
        )
    else:
        lam, b = loaded_multipliers(measure, utility, scenario.w0, scenario.rho, m, d_tilde)
        if b <= 0:
            raise SolverError(f"nonpositive shrinkage {b!r} at this trial point")
        pay = indemnity_pointwise(
            measure.nodes, m, b, utility, scenario.w0, scenario.rho,
            branch="loaded", d_tilde=d_tilde,
        )
    return (
        measure.expect(pay) - m,
        measure.variance_of(pay) - scenario.nu,
    )


def solve(scenario) -> ContractSolution:
    """Solve a validated scenario, dispatching on the contract regime."""
    measure = scenario.build_measure()
    utility = scenario.build_utility()
    w0, rho, nu = scenario.w0, scenario.rho, scenario.nu
    arrow = arrow_deductible(measure, utility, w0, rho)
    if is_variance_slack(arrow, nu):
        return slack_solution(measure, utility, w0, rho, nu, arrow.d_star)
    bracket = compute_bracket(measure, arrow, nu)
    if bracket.degenerate:
        return two_point_solution(bracket, measure, utility, w0, rho)
    if scenario.loss.has_interior_atoms():
        raise UnsupportedScenarioError(
            "interior regimes require a loss with a strictly increasing "
            "distribution on (0, M); atoms inside the support are not supported"
        )
    inner = _InteriorSolver(
        measure, utility, w0, rho, nu, bracket,
        pointwise_atol=scenario.tolerances.pointwise_atol,
    )
    solution = inner.solve()
    _validate_interior(solution, bracket)
    return solution


def _validate_interior(sol: ContractSolution, bracket: IndemnityBracket):
    nodes = sol.measure.nodes
    pay = sol.indemnity_nodes
    top = sol.measure.support_max
    problems = []
    slop = 1e-10 * max(top, 1.0)
    if nodes[0] == 0.0 and abs(pay[0]) > slop:
        problems.append(f"indemnity at zero loss is {pay[0]!r}")
    if np.any(pay < -slop) or np.any(pay - nodes > slop):
        problems.append("indemnity escapes [0, x] on the grid")
    marg = np.atleast_1d(sol.marginal(nodes))
    if np.any(marg < -1e-12) or np.any(marg > 1.0 + 1e-12):
        problems.append("marginal indemnity escapes [0, 1]")
    if np.any(np.diff(nodes - pay) < -slop):
        problems.append("retained loss is not non-decreasing")
    ex = losses.mean(sol.measure)
    if abs(sol.mean_residual) > 1e-8 * ex:
        problems.append(f"mean residual {sol.mean_residual!r} above 1e-8*E[X]")
    if abs(sol.var_residual) > 1e-8 * sol.nu:
        problems.append(f"variance residual {sol.var_residual!r} above 1e-8*nu")
    if not sol.beta_star > 0.0:
        problems.append(f"shrinkage {sol.beta_star!r} not positive")
    if not (bracket.m_L < sol.m_star < bracket.m_U):
        problems.append(f"expected indemnity {sol.m_star!r} outside the bracket")
    if sol.regime == INTERIOR_LOADED:
        floor = losses.var_threshold(sol.measure, sol.rho)
        if not (floor < sol.d_tilde < top):
            problems.append(f"deductible {sol.d_tilde!r} outside (quantile floor, M)")
        lam_check = float(sol.utility.mu(sol.w0 - sol.d_tilde - sol.premium))
        if abs(lam_check - sol.lambda_star) > 1e-9 * abs(lam_check):
            problems.append("multiplier inconsistent with the deductible")
    if problems:
        raise SolverError("interior solution failed validation", diagnostics={"problems": problems})


def kkt_phi(solution: ContractSolution, x: float) -> float:
    """Bang-bang discriminant at ``x`` for the solved contract.

    ``Phi(x) = E[u'(W) - 2 b I | X > x] - ((1+rho) E[u'(W)] - 2 b E[I])``
    with the solution's multiplier ``b``.  At an optimum the marginal
    indemnity is 1 where ``Phi > 0``, 0 where ``Phi < 0``, and interior
    only where ``Phi`` vanishes.
    """
    inner, lam_eff = _phi_parts(solution)
    return losses.tail_expectation(solution.measure, inner, x) - lam_eff


def kkt_phi_profile(solution: ContractSolution) -> np.ndarray:
    """``kkt_phi`` at every grid node; NaN where the tail has no mass."""
    inner, lam_eff = _phi_parts(solution)
    w = solution.measure.weights
    tail_mass = np.concatenate([np.cumsum((w * 1.0)[::-1])[::-1][1:], [0.0]])
    tail_sum = np.concatenate([np.cumsum((w * inner)[::-1])[::-1][1:], [0.0]])
    with np.errstate(invalid="ignore", divide="ignore"):
        phi = tail_sum / tail_mass - lam_eff
    phi[tail_mass <= 0.0] = np.nan
    return phi


def _phi_parts(solution: ContractSolution):
    if solution.beta_star is None:
        raise UnsupportedScenarioError(
            f"no shrinkage multiplier on a {solution.regime!r} solution"
        )
    measure = solution.measure
    pay = solution.indemnity_nodes
    wealth = solution.w0 - measure.nodes + pay - solution.premium
    marg_u = np.asarray(solution.utility.mu(wealth), dtype=float)
    inner = marg_u - 2.0 * solution.beta_star * pay
    lam_eff = (1.0 + solution.rho) * measure.expect(marg_u) - 2.0 * solution.beta_star * measure.expect(pay)
    return inner, lam_eff


def vajda_ratio(solution: ContractSolution, tol: float = 1e-9) -> bool:
    """True iff ``I(x)/x`` is non-decreasing across the positive grid nodes."""
    nodes = solution.measure.nodes
    pos = nodes > 0.0
    ratio = solution.indemnity_nodes[pos] / nodes[pos]
    return bool(np.all(np.diff(ratio) >= -tol))


def marginal(solution: ContractSolution, x):
    """Closed-form marginal indemnity of a solved contract at ``x``."""
    return solution.marginal(x)


def expected_utility(solution: ContractSolution) -> float:
    """Objective value of the solved contract on its grid."""
    return solution.objective()
