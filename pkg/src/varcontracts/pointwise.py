"""Vectorised solve of the pointwise indemnity equation.

For a premium parameter ``m``, multiplier pair ``(lam, beta)`` and wealth
shift ``shift = w0 - (1 + rho) m``, the indemnity paid at loss ``x`` is the
unique root ``y`` in ``[0, x]`` of

    u'(shift - x + y) - lam - 2 beta y = 0,

clipped to ``y = 0`` where the left side is already non-positive at zero
(the deductible region).  The left side is strictly decreasing in ``y``
(``u'' < 0`` and ``beta > 0``), so a safeguarded Newton iteration with a
sign bracket converges to the unique root at every node simultaneously.
"""

from __future__ import annotations

import numpy as np

from .errors import SolverError
from .utilities import UtilityModel


def coinsurance_roots(
    x,
    shift: float,
    lam: float,
    beta: float,
    utility: UtilityModel,
    atol: float = 1e-12,
    max_iter: int = 200,
):
    """Roots of the pointwise equation at every loss level in ``x``.

    Returns ``(y, iterations)`` where ``y`` has the shape of ``x``.
    Raises :class:`SolverError` if the residual cannot be driven below
    ``atol`` within ``max_iter`` sweeps.
    """
    x_arr = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.zeros_like(x_arr)
    if beta <= 0:
        raise SolverError(f"shrinkage parameter must be positive, got {beta!r}")

    g_at_zero = np.asarray(utility.mu(shift - x_arr), dtype=float) - lam
    active = g_at_zero > 0.0
    if not np.any(active):
        return (y if np.ndim(x) else float(y[0])), 0

    lo = np.zeros(np.count_nonzero(active))
    hi = x_arr[active].copy()
    xa = x_arr[active]
    ya = 0.5 * hi
    iterations = 0
    for iterations in range(1, max_iter + 1):
        wealth = shift - xa + ya
        g = np.asarray(utility.mu(wealth), dtype=float) - lam - 2.0 * beta * ya
        if float(np.max(np.abs(g))) <= atol:
            break
        pos = g > 0.0
        lo = np.where(pos, ya, lo)
        hi = np.where(pos, hi, ya)
        dg = np.asarray(utility.ddu(wealth), dtype=float) - 2.0 * beta
        step = g / dg
        trial = ya - step
        bad = ~np.isfinite(trial) | (trial <= lo) | (trial >= hi)
        ya = np.where(bad, 0.5 * (lo + hi), trial)
        if float(np.max(hi - lo)) <= 1e-300:
            break
    else:
        raise SolverError(
            "pointwise indemnity equation did not converge",
            diagnostics={
                "max_residual": float(np.max(np.abs(g))),
                "lam": lam,
                "beta": beta,
                "shift": shift,
            },
        )
    y[active] = ya
    return (y if np.ndim(x) else float(y[0])), iterations
