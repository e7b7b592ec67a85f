"""Classical unconstrained benchmark: the optimal deductible and slack test.

With the variance bound removed, the optimal contract is the stop-loss
``(x - d*)_+``.  The deductible solves a threshold condition on the ratio

    phi(d) = E[u'(w0 - X^d - (1+rho) E[(X-d)_+])] / u'(w0 - d - (1+rho) E[(X-d)_+])

which is non-increasing in ``d`` above the quantile floor, so ``d*`` is the
supremum of ``{d : phi(d) >= 1/(1+rho)}`` floored at that quantile.  When the
prescribed variance bound already exceeds the variance of the stop-loss
layer, the bound is slack and the whole interior machinery is skipped.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import losses
from .losses import GridMeasure
from .rootfind import sup_level_bisect
from .utilities import UtilityModel


@dataclass(frozen=True)
class ArrowSolution:
    """Unconstrained optimum: deductible, threshold ratio there, layer variance."""

    d_star: float
    phi_at_d: float
    var_at_d: float


def phi(measure: GridMeasure, utility: UtilityModel, w0: float, rho: float, d: float) -> float:
    """Marginal-utility ratio whose level set pins the optimal deductible."""
    premium = (1.0 + rho) * losses.stop_loss_mean(measure, d)
    wealth = w0 - np.minimum(measure.nodes, d) - premium
    numerator = measure.expect(utility.mu(wealth))
    denominator = float(utility.mu(w0 - d - premium))
    return numerator / denominator


def arrow_deductible(
    measure: GridMeasure,
    utility: UtilityModel,
    w0: float,
    rho: float,
    d_rtol: float = 1e-9,
) -> ArrowSolution:
    """Solve for the unconstrained stop-loss deductible ``d*``.

    Bisection exploits that the threshold ratio is non-increasing on
    ``[quantile floor, M)``; ties at the threshold resolve to the supremum.
    The absolute tolerance on ``d*`` is ``d_rtol * M``.
    """
    m = measure.support_max
    floor = losses.var_threshold(measure, rho)
    if floor >= m:
        # Loading so heavy that the quantile floor hits the supremum: no insurance.
        return ArrowSolution(d_star=m, phi_at_d=phi(measure, utility, w0, rho, m),
                             var_at_d=losses.stop_loss_var(measure, m))
    if rho == 0.0:
        # Fair pricing: the ratio satisfies phi(d) <= 1 with equality exactly
        # on [0, ess inf X], where every deductible yields the same wealth
        # distribution and the same layer variance.  Resolve that tie to the
        # zero deductible (full insurance), which is also the limit of the
        # threshold set as the grid refines a loss with mass near zero.
        return ArrowSolution(d_star=0.0, phi_at_d=phi(measure, utility, w0, 0.0, 0.0),
                             var_at_d=losses.stop_loss_var(measure, 0.0))
    threshold = 1.0 / (1.0 + rho)
    ratio = lambda d: phi(measure, utility, w0, rho, d)
    tol = d_rtol * m
    if ratio(floor) < threshold:
        d_star = floor
    elif ratio(m) >= threshold:
        d_star = m
    else:
        d_star = sup_level_bisect(ratio, threshold, floor, m, tol)
        if d_star - floor <= tol:
            d_star = floor
    return ArrowSolution(
        d_star=d_star,
        phi_at_d=ratio(d_star),
        var_at_d=losses.stop_loss_var(measure, d_star),
    )


def is_variance_slack(arrow: ArrowSolution, nu: float) -> bool:
    """True when the variance bound does not bind at the unconstrained optimum.

    The boundary case ``nu == var[(X - d*)_+]`` counts as slack: the
    stop-loss contract itself is then feasible and optimal.
    """
    if nu <= 0:
        raise ValueError(f"variance bound must be > 0, got {nu!r}")
    return nu >= arrow.var_at_d
