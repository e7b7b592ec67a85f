"""Bounded loss distributions and their grid discretisation.

A loss is either a finite list of atoms or a continuous family truncated to
``[0, support_max]`` (optionally mixed with an atom at zero).  Every solver
in the package consumes the same discretised representation, a
:class:`GridMeasure`, so quadrature and the brute-force certification run on
identical nodes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence, Union

import numpy as np
from scipy.special import ndtr

from .errors import TailMassError, ValidationError

_WEIGHT_TOL = 1e-12

CONTINUOUS_FAMILIES = ("uniform", "exponential", "lognormal", "pareto")


@dataclass(frozen=True)
class DiscreteLoss:
    """Finite loss with atoms ``(value, probability)``.

    Atoms are stored sorted by value; probabilities must lie in (0, 1] and
    sum to one within 1e-12.
    """

    atoms: tuple

    def __post_init__(self):
        errors = []
        try:
            atoms = tuple(sorted((float(v), float(p)) for v, p in self.atoms))
        except (TypeError, ValueError):
            raise ValidationError("discrete atoms must be (value, prob) pairs")
        if len(atoms) == 0:
            errors.append("discrete loss needs at least one atom")
        values = [v for v, _ in atoms]
        probs = [p for _, p in atoms]
        if any(not np.isfinite(v) or v < 0 for v in values):
            errors.append("atom values must be finite and >= 0")
        if len(set(values)) != len(values):
            errors.append("atom values must be distinct")
        if any(p <= 0 or p > 1 for p in probs):
            errors.append("atom probabilities must lie in (0, 1]")
        if abs(sum(probs) - 1.0) > _WEIGHT_TOL:
            errors.append(f"atom probabilities sum to {sum(probs)!r}, expected 1")
        if errors:
            raise ValidationError(errors)
        object.__setattr__(self, "atoms", atoms)

    @property
    def support_max(self) -> float:
        return self.atoms[-1][0]

    @property
    def atom_at_zero(self) -> float:
        return self.atoms[0][1] if self.atoms[0][0] == 0.0 else 0.0

    def has_interior_atoms(self) -> bool:
        """True when any atom sits strictly inside (0, support_max)."""
        return any(0.0 < v < self.support_max for v, _ in self.atoms)


@dataclass(frozen=True)
class TruncatedContinuousLoss:
    """Continuous family truncated and renormalised to ``[0, support_max]``.

    ``family`` is one of ``uniform`` (param ``high``), ``exponential``
    (param ``rate``), ``lognormal`` (params ``mu``, ``sigma``) and ``pareto``
    (Lomax form, params ``alpha``, ``scale``).  The density is strictly
    positive on ``(0, support_max)`` for every admissible parameterisation,
    so the distribution function is strictly increasing there.  An optional
    atom at zero carries probability ``atom_at_zero``.
    """

    family: str
    params: Mapping[str, float]
    support_max: float
    atom_at_zero: float = 0.0

    def __post_init__(self):
        errors = []
        if self.family not in CONTINUOUS_FAMILIES:
            errors.append(f"unknown family {self.family!r}, expected one of {CONTINUOUS_FAMILIES}")
        params = {k: float(v) for k, v in dict(self.params).items()}
        object.__setattr__(self, "params", params)
        m = float(self.support_max)
        if not np.isfinite(m) or m <= 0:
            errors.append("support_max must be finite and > 0")
        a0 = float(self.atom_at_zero)
        if not (0.0 <= a0 < 1.0):
            errors.append("atom_at_zero must lie in [0, 1)")
        if self.family in CONTINUOUS_FAMILIES:
            errors.extend(self._check_params(params, m))
        if errors:
            raise ValidationError(errors)
        object.__setattr__(self, "support_max", m)
        object.__setattr__(self, "atom_at_zero", a0)

    def _check_params(self, params, m):
        required = {
            "uniform": ("high",),
            "exponential": ("rate",),
            "lognormal": ("mu", "sigma"),
            "pareto": ("alpha", "scale"),
        }[self.family]
        errors = []
        missing = [k for k in required if k not in params]
        extra = [k for k in params if k not in required]
        if missing:
            errors.append(f"{self.family} family requires params {missing}")
        if extra:
            errors.append(f"{self.family} family got unexpected params {extra}")
        if missing or extra:
            return errors
        positive = [k for k in required if k != "mu"]
        for k in positive:
            if params[k] <= 0 or not np.isfinite(params[k]):
                errors.append(f"{self.family} param {k!r} must be > 0")
        if not np.isfinite(params.get("mu", 0.0)):
            errors.append("lognormal param 'mu' must be finite")
        # Density must stay positive on (0, M): only the bounded-support
        # uniform family can violate this.
        if self.family == "uniform" and not errors and params["high"] < m:
            errors.append("uniform 'high' must be >= support_max to keep a positive density")
        return errors

    def raw_cdf(self, x) -> np.ndarray:
        """Untruncated family c.d.f. evaluated at ``x`` (vectorised)."""
        x = np.asarray(x, dtype=float)
        p = self.params
        if self.family == "uniform":
            out = np.clip(x / p["high"], 0.0, 1.0)
        elif self.family == "exponential":
            out = -np.expm1(-p["rate"] * np.maximum(x, 0.0))
        elif self.family == "lognormal":
            out = np.zeros_like(x)
            pos = x > 0
            if np.any(pos):
                out[pos] = ndtr((np.log(x[pos]) - p["mu"]) / p["sigma"])
        else:  # pareto (Lomax)
            out = 1.0 - (p["scale"] / (np.maximum(x, 0.0) + p["scale"])) ** p["alpha"]
        return out

    def has_interior_atoms(self) -> bool:
        return False


LossModel = Union[DiscreteLoss, TruncatedContinuousLoss]


@dataclass(frozen=True, eq=False)
class GridMeasure:
    """Discrete probability measure on ascending nodes in ``[0, M]``."""

    nodes: np.ndarray
    weights: np.ndarray
    _cum: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float).copy()
        weights = np.asarray(self.weights, dtype=float).copy()
        errors = []
        if nodes.ndim != 1 or weights.ndim != 1 or nodes.shape != weights.shape:
            errors.append("nodes and weights must be 1-d arrays of equal length")
        elif nodes.size == 0:
            errors.append("measure needs at least one node")
        else:
            if np.any(~np.isfinite(nodes)) or np.any(nodes < 0):
                errors.append("nodes must be finite and >= 0")
            if np.any(np.diff(nodes) <= 0):
                errors.append("nodes must be strictly ascending")
            if np.any(weights < 0):
                errors.append("weights must be >= 0")
            if abs(weights.sum() - 1.0) > _WEIGHT_TOL:
                errors.append(f"weights sum to {weights.sum()!r}, expected 1 within {_WEIGHT_TOL}")
        if errors:
            raise ValidationError(errors)
        nodes.flags.writeable = False
        weights.flags.writeable = False
        cum = np.cumsum(weights)
        cum.flags.writeable = False
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "_cum", cum)

    @property
    def support_max(self) -> float:
        return float(self.nodes[-1])

    def expect(self, values) -> float:
        """Weighted expectation of per-node values."""
        return float(np.dot(self.weights, np.asarray(values, dtype=float)))

    def variance_of(self, values) -> float:
        v = np.asarray(values, dtype=float)
        m = np.dot(self.weights, v)
        return float(np.dot(self.weights, v * v) - m * m)


def discretize(model: LossModel, n: int) -> GridMeasure:
    """Discretise a loss model onto ``n`` midpoint cells.

    Discrete models pass through unchanged (``n`` is ignored).  Continuous
    models become midpoint nodes ``(i - 1/2) * M / n`` weighted by the
    renormalised probability mass of each cell; an atom at zero, when
    present, is prepended as the first node.
    """
    if n < 2:
        raise ValidationError("grid size n must be >= 2")
    if isinstance(model, DiscreteLoss):
        values = [v for v, _ in model.atoms]
        probs = [p for _, p in model.atoms]
        return GridMeasure(np.array(values), np.array(probs))
    m = model.support_max
    edges = np.linspace(0.0, m, n + 1)
    masses = np.diff(model.raw_cdf(edges))
    total = masses.sum()
    if total <= 0:
        raise ValidationError("continuous model has no mass on (0, support_max)")
    nodes = (np.arange(n) + 0.5) * (m / n)
    weights = masses * ((1.0 - model.atom_at_zero) / total)
    if model.atom_at_zero > 0:
        nodes = np.concatenate([[0.0], nodes])
        weights = np.concatenate([[model.atom_at_zero], weights])
    weights = weights / weights.sum()
    return GridMeasure(nodes, weights)


def cdf(measure: GridMeasure, x: float) -> float:
    """Right-continuous distribution function ``P{X <= x}``."""
    idx = np.searchsorted(measure.nodes, x, side="right")
    return float(measure._cum[idx - 1]) if idx > 0 else 0.0


def var_threshold(measure: GridMeasure, rho: float) -> float:
    """Quantile floor ``inf{x in [0, M] : F(x) >= rho/(1+rho)}``.

    Returns the support maximum when the set is empty.
    """
    if rho < 0:
        raise ValidationError("safety loading rho must be >= 0")
    thr = rho / (1.0 + rho)
    if thr <= 0.0:
        return 0.0
    hit = np.nonzero(measure._cum >= thr)[0]
    if hit.size == 0:
        return measure.support_max
    return float(measure.nodes[hit[0]])


def mean(measure: GridMeasure) -> float:
    return measure.expect(measure.nodes)


def variance(measure: GridMeasure) -> float:
    return measure.variance_of(measure.nodes)


def stop_loss_mean(measure: GridMeasure, d: float) -> float:
    """Expected shortfall above ``d``: ``E[(X - d)_+]``."""
    return measure.expect(np.maximum(measure.nodes - d, 0.0))


def cap_mean(measure: GridMeasure, k: float) -> float:
    """Expected capped loss: ``E[X ^ k]``."""
    return measure.expect(np.minimum(measure.nodes, k))


def stop_loss_var(measure: GridMeasure, d: float) -> float:
    """Variance of the layer above ``d``: ``var[(X - d)_+]``."""
    return measure.variance_of(np.maximum(measure.nodes - d, 0.0))


def cap_var(measure: GridMeasure, k: float) -> float:
    """Variance of the capped loss: ``var[X ^ k]``."""
    return measure.variance_of(np.minimum(measure.nodes, k))


def tail_expectation(measure: GridMeasure, g, t: float) -> float:
    """Conditional expectation ``E[g(X) | X > t]`` on the grid.

    ``g`` may be a callable on node values or an array aligned with the
    nodes.  Raises :class:`TailMassError` when ``P{X > t} = 0``.
    """
    mask = measure.nodes > t
    tail_mass = measure.weights[mask].sum()
    if tail_mass <= 0.0:
        raise TailMassError(
            f"no probability mass above t={t!r} (essential supremum {measure.support_max!r})"
        )
    if callable(g):
        values = np.asarray(g(measure.nodes[mask]), dtype=float)
    else:
        values = np.asarray(g, dtype=float)[mask]
    return float(np.dot(measure.weights[mask], values) / tail_mass)
