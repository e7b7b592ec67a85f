"""Shared constructions for the stochastic-order validator tests."""

import numpy as np
from scipy.optimize import brentq

import varcontracts as vc
from varcontracts import losses


def random_grid_measure(rng, n=40, top=5.0):
    nodes = np.sort(rng.uniform(0.0, top, size=n))
    nodes += np.arange(n) * 1e-9  # enforce strict ascent under duplicates
    weights = rng.uniform(0.1, 1.0, size=n)
    return vc.GridMeasure(nodes, weights / weights.sum())


def ohlin_pair(rng, measure):
    """Increasing single-crossing pair with matched grid means.

    ``h1 = a (x - c)_+`` rises from below, ``h2 = b (x ^ c)`` flattens out;
    scaling ``a`` matches the means, and ``h1 - h2`` changes sign exactly
    once (negative below the cross, positive after).
    """
    top = measure.support_max
    c = rng.uniform(0.2 * top, 0.8 * top)
    b = rng.uniform(0.5, 2.0)
    layer_mean = losses.stop_loss_mean(measure, c)
    cap_mean = losses.cap_mean(measure, c)
    if layer_mean <= 0 or cap_mean <= 0:
        return None
    a = b * cap_mean / layer_mean
    h1 = a * np.maximum(measure.nodes - c, 0.0)
    h2 = b * np.minimum(measure.nodes, c)
    return h1, h2


def karlin_novikoff_pair(rng, measure):
    """Contraction ``Z = t X + (1 - t) t0`` whose c.d.f. up-crosses that of
    ``X``; choosing ``t0 <= E[X]`` also orders the means."""
    theta = rng.uniform(0.3, 0.9)
    t0 = rng.uniform(0.0, losses.mean(measure))
    z = theta * measure.nodes + (1.0 - theta) * t0
    return z, measure.nodes.copy()


def feasible_indemnity(rng, measure):
    """Random element of the basic feasible set: 0 <= I(x) <= x nodewise."""
    return measure.nodes * rng.uniform(0.0, 1.0, size=measure.nodes.size)


def matching_cap_level(measure, target_mean):
    """Cap level whose expected capped loss equals ``target_mean``."""
    if target_mean <= 0:
        return 0.0
    top = measure.support_max
    gap = lambda k: losses.cap_mean(measure, k) - target_mean
    return brentq(gap, 0.0, top, xtol=1e-14 * top, maxiter=200)
