"""Solved indemnity contracts: regimes, schedule evaluation, diagnostics.

A :class:`ContractSolution` is immutable and carries everything needed to
evaluate the schedule anywhere on ``[0, M]``: exact closed forms for the
stop-loss and layer regimes, and the pointwise equation for the interior
regimes.  A cached node table supports bulk emission and cheap
piecewise-linear interpolation (slopes of the exact schedule lie in [0, 1],
so interpolation preserves incentive compatibility between nodes).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .losses import GridMeasure
from .pointwise import coinsurance_roots
from .utilities import UtilityModel

SLACK_STOP_LOSS = "slack-stop-loss"
TWO_POINT = "two-point"
INTERIOR_FAIR = "interior-fair"
INTERIOR_LOADED = "interior-loaded"

REGIMES = (SLACK_STOP_LOSS, TWO_POINT, INTERIOR_FAIR, INTERIOR_LOADED)


@dataclass(frozen=True, eq=False)
class ContractSolution:
    """Optimal contract for one scenario, with an evaluable schedule.

    ``indemnity_nodes`` holds the schedule on the scenario's grid nodes.
    ``m_star`` is the expected indemnity on the grid; ``premium`` equals
    ``(1 + rho) * m_star``.  For interior regimes ``beta_star`` and
    ``lambda_star`` are the solved multipliers and ``d_tilde`` the
    deductible (zero in the fair regime); the slack regime stores the
    unconstrained deductible in ``d_star`` with ``beta_star = 0``; the
    two-point regime stores the single jump location and payment.
    """

    regime: str
    measure: GridMeasure
    utility: UtilityModel
    w0: float
    rho: float
    nu: float
    indemnity_nodes: np.ndarray
    m_star: float
    premium: float
    mean_residual: float
    var_residual: float
    beta_star: Optional[float] = None
    lambda_star: Optional[float] = None
    d_star: Optional[float] = None
    d_tilde: Optional[float] = None
    jump_at: Optional[float] = None
    pay: Optional[float] = None
    iterations: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise ValueError(f"unknown regime {self.regime!r}")
        nodes = np.asarray(self.indemnity_nodes, dtype=float).copy()
        nodes.flags.writeable = False
        object.__setattr__(self, "indemnity_nodes", nodes)

    # -- schedule evaluation -------------------------------------------------

    def indemnity(self, x):
        """Exact schedule value(s) at arbitrary loss levels in ``[0, M]``."""
        x_arr = np.atleast_1d(np.asarray(x, dtype=float))
        if self.regime == SLACK_STOP_LOSS:
            out = np.maximum(x_arr - self.d_star, 0.0)
        elif self.regime == TWO_POINT:
            deductible = self.jump_at - self.pay
            out = np.minimum(np.maximum(x_arr - deductible, 0.0), self.pay)
        else:
            shift = self.w0 - (1.0 + self.rho) * self.m_star
            out, _ = coinsurance_roots(x_arr, shift, self.lambda_star, self.beta_star, self.utility)
        return out if np.ndim(x) else float(out[0])

    def indemnity_interp(self, x):
        """Cheap piecewise-linear evaluation through the cached node table."""
        tx, ty = self._table()
        out = np.interp(np.asarray(x, dtype=float), tx, ty)
        return out if np.ndim(x) else float(out)

    def _table(self):
        # Node schedule anchored at 0 and at the support maximum so that
        # interpolation covers all of [0, M].
        xs = self.measure.nodes
        ys = self.indemnity_nodes
        if xs[0] > 0.0:
            xs = np.concatenate([[0.0], xs])
            ys = np.concatenate([[0.0], ys])
        m = self.measure.support_max
        if xs[-1] < m:
            xs = np.concatenate([xs, [m]])
            ys = np.concatenate([ys, [float(np.atleast_1d(self.indemnity(m))[0])]])
        return xs, ys

    def marginal(self, x):
        """Closed-form marginal indemnity, in ``[0, 1]`` everywhere."""
        x_arr = np.atleast_1d(np.asarray(x, dtype=float))
        if self.regime == SLACK_STOP_LOSS:
            out = np.where(x_arr > self.d_star, 1.0, 0.0)
        elif self.regime == TWO_POINT:
            deductible = self.jump_at - self.pay
            out = np.where((x_arr > deductible) & (x_arr <= self.jump_at), 1.0, 0.0)
        else:
            pay = np.atleast_1d(self.indemnity(x_arr))
            wealth = self.w0 - x_arr + pay - self.premium
            curvature = -np.asarray(self.utility.ddu(wealth), dtype=float)
            out = np.where(
                x_arr > self.d_tilde,
                curvature / (2.0 * self.beta_star + curvature),
                0.0,
            )
        return out if np.ndim(x) else float(out[0])

    def retention(self, x):
        return np.asarray(x, dtype=float) - self.indemnity(x)

    def exposure(self, x):
        """Insurer's net position ``I(x) - premium`` at loss level ``x``."""
        return self.indemnity(x) - self.premium

    @property
    def expected_indemnity(self) -> float:
        return self.m_star

    def objective(self) -> float:
        """Insured's expected utility on the grid under this schedule."""
        wealth = self.w0 - self.measure.nodes + self.indemnity_nodes - self.premium
        return self.measure.expect(self.utility.u(wealth))

    def exposure_nodes(self) -> np.ndarray:
        return self.indemnity_nodes - self.premium


def slack_solution(
    measure: GridMeasure,
    utility: UtilityModel,
    w0: float,
    rho: float,
    nu: float,
    d_star: float,
) -> ContractSolution:
    """Stop-loss contract for a slack variance bound."""
    pay = np.maximum(measure.nodes - d_star, 0.0)
    m = measure.expect(pay)
    return ContractSolution(
        regime=SLACK_STOP_LOSS,
        measure=measure,
        utility=utility,
        w0=w0,
        rho=rho,
        nu=nu,
        indemnity_nodes=pay,
        m_star=m,
        premium=(1.0 + rho) * m,
        mean_residual=0.0,
        var_residual=measure.variance_of(pay) - nu,
        beta_star=0.0,
        d_star=d_star,
    )
