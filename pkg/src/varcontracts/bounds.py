"""Bracket for the optimal expected indemnity and the two-point degeneracy.

When the variance bound binds, the optimal expected indemnity lies between
``m_L`` (mean of the stop-loss layer whose variance equals the bound) and
``m_U`` (mean of the capped loss whose variance equals the bound).  Both
thresholds come from monotone variance maps, so each is a bracketed root.
A collapsed bracket can only happen for a two-point loss, in which case the
optimal contract is pinned without any interior solve.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from . import losses
from .arrow import ArrowSolution
from .contracts import TWO_POINT, ContractSolution
from .errors import BracketInconsistencyError, SlackScenarioError
from .losses import GridMeasure
from .rootfind import _BRENT_RTOL
from .utilities import UtilityModel

_DEGENERACY_RTOL = 1e-8
_NODE_MATCH_RTOL = 1e-9


@dataclass(frozen=True)
class IndemnityBracket:
    """Expected-indemnity bracket ``[m_L, m_U]`` with its defining thresholds.

    ``var[(X - d_L)_+]`` and ``var[X ^ K_U]`` both equal the variance bound
    by construction; ``degenerate`` flags ``m_L == m_U`` up to tolerance.
    """

    d_L: float
    m_L: float
    K_U: float
    m_U: float
    degenerate: bool
    nu: float


def compute_bracket(measure: GridMeasure, arrow: ArrowSolution, nu: float) -> IndemnityBracket:
    """Solve the two monotone variance equations bracketing the optimum.

    Requires a binding bound (``nu < var[(X - d*)_+]``); a slack scenario
    raises :class:`SlackScenarioError` and should take the stop-loss path.
    """
    if nu >= arrow.var_at_d:
        raise SlackScenarioError(
            f"variance bound {nu!r} >= stop-loss layer variance {arrow.var_at_d!r}; "
            "the unconstrained deductible contract is already optimal"
        )
    m = measure.support_max
    d_star = arrow.d_star

    # var[(X - d)_+] decreases continuously from above nu (at d*) to 0 (at M).
    layer_gap = lambda d: losses.stop_loss_var(measure, d) - nu
    d_l = brentq(layer_gap, d_star, m, xtol=1e-14 * m, rtol=_BRENT_RTOL, maxiter=200)

    # var[X ^ k] increases continuously from 0 (at 0) through nu before M.
    cap_gap = lambda k: losses.cap_var(measure, k) - nu
    k_u = brentq(cap_gap, 0.0, m, xtol=1e-14 * m, rtol=_BRENT_RTOL, maxiter=200)

    m_l = losses.stop_loss_mean(measure, d_l)
    m_u = losses.cap_mean(measure, k_u)
    degenerate = abs(m_u - m_l) <= _DEGENERACY_RTOL * losses.mean(measure)
    return IndemnityBracket(d_L=float(d_l), m_L=m_l, K_U=float(k_u), m_U=m_u,
                            degenerate=degenerate, nu=nu)


def two_point_solution(
    bracket: IndemnityBracket,
    measure: GridMeasure,
    utility: UtilityModel,
    w0: float,
    rho: float,
) -> ContractSolution:
    """Optimal contract when the bracket collapses: pay ``K_U`` at the jump.

    A collapsed bracket forces the loss to be Bernoulli on
    ``{0, d_L + K_U}``; anything else signals a numerical failure upstream
    and raises :class:`BracketInconsistencyError`.
    """
    if not bracket.degenerate:
        raise ValueError("two_point_solution requires a degenerate bracket")
    jump = bracket.d_L + bracket.K_U
    nodes = measure.nodes
    tol = _NODE_MATCH_RTOL * max(measure.support_max, 1.0)
    is_two_point = (
        nodes.size == 2
        and abs(nodes[0]) <= tol
        and abs(nodes[1] - jump) <= tol
    )
    if not is_two_point:
        raise BracketInconsistencyError(
            f"degenerate bracket but the loss support {nodes.tolist()} is not "
            f"{{0, {jump!r}}}: inconsistent upstream solve"
        )
    pay_nodes = np.minimum(np.maximum(nodes - bracket.d_L, 0.0), bracket.K_U)
    m = measure.expect(pay_nodes)
    return ContractSolution(
        regime=TWO_POINT,
        measure=measure,
        utility=utility,
        w0=w0,
        rho=rho,
        nu=bracket.nu,
        indemnity_nodes=pay_nodes,
        m_star=m,
        premium=(1.0 + rho) * m,
        mean_residual=0.0,
        var_residual=measure.variance_of(pay_nodes) - bracket.nu,
        jump_at=jump,
        pay=bracket.K_U,
    )
