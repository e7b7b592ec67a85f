"""Bracketed scalar root-finding helpers shared by the solvers.

The parameter maps solved here are continuous and (empirically) monotone in
the unknown, so every search follows the same recipe: establish a sign
change by scanning, confirm the scan saw a single transition, then hand the
bracket to Brent's method.  A scan with multiple transitions signals a
violated monotonicity assumption and is reported to the caller instead of
silently returning one of several roots.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import brentq

from .errors import SolverError

_BRENT_RTOL = 4.0 * np.finfo(float).eps


def scan_sign_change(f, grid):
    """Evaluate ``f`` on ``grid`` and locate sign changes.

    Returns ``(brackets, values)`` where ``brackets`` is a list of index
    pairs ``(i, i+1)`` with a strict sign change between them.  Grid points
    where ``f`` evaluates exactly to zero count as roots on their own.
    """
    values = np.array([f(g) for g in grid], dtype=float)
    sign = np.sign(values)
    brackets = []
    for i in range(len(grid) - 1):
        if sign[i] == 0.0:
            continue
        j = i + 1
        if sign[j] != 0.0 and sign[j] != sign[i]:
            brackets.append((i, j))
    return brackets, values


def monotone_root(f, lo, hi, n_probe=9, label="map"):
    """Root of a continuous, monotone ``f`` with a sign change on ``[lo, hi]``.

    Probes ``n_probe`` points; exactly one sign transition is expected.  A
    probe with several transitions raises :class:`SolverError` (the caller
    may fall back to a grid scan), as does a probe with none.
    """
    grid = np.linspace(lo, hi, n_probe)
    brackets, values = scan_sign_change(f, grid)
    zero_hits = np.nonzero(values == 0.0)[0]
    if zero_hits.size:
        return float(grid[zero_hits[0]]), 0.0
    if len(brackets) == 0:
        raise SolverError(
            f"no sign change for {label} on [{lo!r}, {hi!r}]",
            diagnostics={"grid": grid.tolist(), "values": values.tolist()},
        )
    if len(brackets) > 1:
        raise SolverError(
            f"{label} is not monotone on [{lo!r}, {hi!r}]: {len(brackets)} sign changes",
            diagnostics={"grid": grid.tolist(), "values": values.tolist()},
        )
    i, j = brackets[0]
    a, b = float(grid[i]), float(grid[j])
    xtol = max(1e-14 * (hi - lo), 1e-300)
    root = brentq(f, a, b, xtol=xtol, rtol=_BRENT_RTOL, maxiter=200)
    return float(root), float(f(root))


def expand_down(f, start, floor, want_positive, factor=0.25, max_steps=200):
    """Shrink a trial point geometrically toward ``floor`` until the sign of
    ``f`` matches ``want_positive``.  Returns the point and its value."""
    x = start
    for _ in range(max_steps):
        v = f(x)
        if (v > 0) == want_positive or v == 0.0:
            return x, v
        x = floor + (x - floor) * factor
    raise SolverError(f"could not reach sign {'+' if want_positive else '-'} near {floor!r}")


def expand_up(f, start, cap, want_positive, factor=4.0, max_steps=200):
    """Grow a trial point geometrically toward ``cap`` until the sign of
    ``f`` matches ``want_positive``."""
    x = start
    for _ in range(max_steps):
        v = f(x)
        if (v > 0) == want_positive or v == 0.0:
            return x, v
        x = min(cap, x * factor) if cap is not None else x * factor
        if cap is not None and x >= cap:
            v = f(cap)
            if (v > 0) == want_positive or v == 0.0:
                return cap, v
            raise SolverError(f"no sign {'+' if want_positive else '-'} below cap {cap!r}")
    raise SolverError("bracket expansion exhausted")


def sup_level_bisect(f, threshold, lo, hi, tol):
    """Largest ``x`` in ``[lo, hi]`` with ``f(x) >= threshold``, for
    non-increasing ``f`` with ``f(lo) >= threshold > f(hi)``.

    Maintains the invariant ``f(lo) >= threshold`` / ``f(hi) < threshold``,
    so a flat stretch exactly at the threshold resolves to its supremum.
    """
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if f(mid) >= threshold:
            lo = mid
        else:
            hi = mid
    return lo
