"""Utility families with the derivative stack used by the contract solvers.

Every family exposes the value ``u``, the first three derivatives ``mu``,
``ddu``, ``dddu``, the inverse marginal ``inv_mu``, absolute risk aversion
``ara`` and absolute prudence ``prudence``.  Evaluations outside the
family's wealth domain raise :class:`WealthDomainError` rather than clamp,
because silent clamping would corrupt the root-finders probing wealth
levels.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from .errors import MarginalRangeError, ValidationError, WealthDomainError


class UtilityModel(ABC):
    """Strictly increasing, strictly concave von Neumann-Morgenstern utility."""

    #: open wealth domain (lo, hi) on which the family is defined
    domain = (-math.inf, math.inf)
    #: True when absolute prudence is strictly decreasing on the whole domain
    strictly_dap = False
    #: True when the third derivative is strictly positive (prudent insured)
    strictly_prudent = False
    #: True when the third derivative is >= 0 everywhere
    weakly_prudent = True

    def _guard(self, x):
        x = np.asarray(x, dtype=float)
        lo, hi = self.domain
        if x.size and (float(np.min(x)) <= lo or float(np.max(x)) >= hi):
            bad = float(np.min(x)) if float(np.min(x)) <= lo else float(np.max(x))
            raise WealthDomainError(
                f"wealth level {bad!r} outside domain ({lo!r}, {hi!r}) of {type(self).__name__}"
            )
        return x

    @abstractmethod
    def u(self, x):
        """Utility value."""

    @abstractmethod
    def mu(self, x):
        """Marginal utility (first derivative), strictly positive."""

    @abstractmethod
    def ddu(self, x):
        """Second derivative, strictly negative."""

    @abstractmethod
    def dddu(self, x):
        """Third derivative."""

    @abstractmethod
    def inv_mu(self, y):
        """Inverse of the marginal utility; ``y`` must lie in its range."""

    def ara(self, x):
        """Absolute risk aversion ``-u''/u'``."""
        return -self.ddu(x) / self.mu(x)

    def prudence(self, x):
        """Absolute prudence ``-u'''/u''``."""
        return -self.dddu(x) / self.ddu(x)

    def is_strictly_dap(self, lo: float, hi: float) -> bool:
        """True iff prudence is strictly decreasing on ``[lo, hi]``.

        The families here have globally monotone (or constant) prudence, so
        the answer does not depend on the interval; the interval is still
        validated against the wealth domain.
        """
        if not (self.domain[0] < lo <= hi < self.domain[1]):
            raise WealthDomainError(
                f"interval ({lo!r}, {hi!r}) not inside domain {self.domain!r}"
            )
        return self.strictly_dap

    @staticmethod
    def _check_positive_target(y):
        y = np.asarray(y, dtype=float)
        if y.size and float(np.min(y)) <= 0.0:
            raise MarginalRangeError(
                f"target {float(np.min(y))!r} outside the range (0, inf) of the marginal utility"
            )
        return y


@dataclass(frozen=True)
class CaraUtility(UtilityModel):
    """Exponential utility ``-exp(-a x)/a`` with constant risk aversion ``a``."""

    a: float

    def __post_init__(self):
        if not (self.a > 0 and np.isfinite(self.a)):
            raise ValidationError(f"CARA coefficient must be > 0, got {self.a!r}")

    def u(self, x):
        return -np.exp(-self.a * self._guard(x)) / self.a

    def mu(self, x):
        return np.exp(-self.a * self._guard(x))

    def ddu(self, x):
        return -self.a * np.exp(-self.a * self._guard(x))

    def dddu(self, x):
        return self.a**2 * np.exp(-self.a * self._guard(x))

    def inv_mu(self, y):
        y = self._check_positive_target(y)
        return -np.log(y) / self.a

    strictly_dap = False
    strictly_prudent = True
    weakly_prudent = True


@dataclass(frozen=True)
class CrraUtility(UtilityModel):
    """Power utility ``x^(1-g)/(1-g)`` on wealth ``x > 0`` (``g != 1``)."""

    gamma: float

    domain = (0.0, math.inf)
    strictly_dap = True
    strictly_prudent = True
    weakly_prudent = True

    def __post_init__(self):
        if not (self.gamma > 0 and np.isfinite(self.gamma)) or self.gamma == 1.0:
            raise ValidationError(
                f"CRRA exponent must be > 0 and != 1, got {self.gamma!r} (use the log family for 1)"
            )

    def u(self, x):
        x = self._guard(x)
        return x ** (1.0 - self.gamma) / (1.0 - self.gamma)

    def mu(self, x):
        return self._guard(x) ** (-self.gamma)

    def ddu(self, x):
        return -self.gamma * self._guard(x) ** (-self.gamma - 1.0)

    def dddu(self, x):
        g = self.gamma
        return g * (g + 1.0) * self._guard(x) ** (-g - 2.0)

    def inv_mu(self, y):
        y = self._check_positive_target(y)
        return y ** (-1.0 / self.gamma)


@dataclass(frozen=True)
class LogUtility(UtilityModel):
    """Logarithmic utility on wealth ``x > 0``."""

    domain = (0.0, math.inf)
    strictly_dap = True
    strictly_prudent = True
    weakly_prudent = True

    def u(self, x):
        return np.log(self._guard(x))

    def mu(self, x):
        return 1.0 / self._guard(x)

    def ddu(self, x):
        return -1.0 / self._guard(x) ** 2

    def dddu(self, x):
        return 2.0 / self._guard(x) ** 3

    def inv_mu(self, y):
        y = self._check_positive_target(y)
        return 1.0 / y


@dataclass(frozen=True)
class HaraUtility(UtilityModel):
    """Hyperbolic absolute risk aversion: ``ara(x) = 1/(p x + q)``.

    Defined through its marginal ``(p x + q)^(-1/p)`` on ``p x + q > 0``;
    ``p = 0`` is excluded here (it degenerates to the CARA family).
    """

    p: float
    q: float

    strictly_dap = True
    strictly_prudent = True
    weakly_prudent = True

    def __post_init__(self):
        if not (self.p > 0 and np.isfinite(self.p)):
            raise ValidationError(
                f"HARA slope must be > 0, got {self.p!r} (p = 0 is the CARA family)"
            )
        if not np.isfinite(self.q):
            raise ValidationError(f"HARA intercept must be finite, got {self.q!r}")
        object.__setattr__(self, "domain", (-self.q / self.p, math.inf))

    def u(self, x):
        z = self.p * self._guard(x) + self.q
        if self.p == 1.0:
            return np.log(z)
        return z ** (1.0 - 1.0 / self.p) / (self.p - 1.0)

    def mu(self, x):
        return (self.p * self._guard(x) + self.q) ** (-1.0 / self.p)

    def ddu(self, x):
        return -((self.p * self._guard(x) + self.q) ** (-1.0 / self.p - 1.0))

    def dddu(self, x):
        z = self.p * self._guard(x) + self.q
        return (1.0 + self.p) * z ** (-1.0 / self.p - 2.0)

    def inv_mu(self, y):
        y = self._check_positive_target(y)
        return (y ** (-self.p) - self.q) / self.p


@dataclass(frozen=True)
class QuadraticUtility(UtilityModel):
    """Quadratic utility ``x - x^2/(2 sat)`` below the saturation point.

    Included as the non-prudent family (zero third derivative) for the
    hypothesis boundaries of the prudence-dependent results.
    """

    sat: float

    strictly_dap = False
    strictly_prudent = False
    weakly_prudent = True

    def __post_init__(self):
        if not (self.sat > 0 and np.isfinite(self.sat)):
            raise ValidationError(f"saturation point must be > 0, got {self.sat!r}")
        object.__setattr__(self, "domain", (-math.inf, self.sat))

    def u(self, x):
        x = self._guard(x)
        return x - x * x / (2.0 * self.sat)

    def mu(self, x):
        return 1.0 - self._guard(x) / self.sat

    def ddu(self, x):
        x = self._guard(x)
        return np.full_like(x, -1.0 / self.sat)

    def dddu(self, x):
        x = self._guard(x)
        return np.zeros_like(x)

    def inv_mu(self, y):
        y = self._check_positive_target(y)
        return self.sat * (1.0 - y)


def from_config(spec) -> UtilityModel:
    """Build a utility model from a config mapping like ``{"family": "cara", "a": 1}``."""
    if not isinstance(spec, dict) or "family" not in spec:
        raise ValidationError("utility spec must be a mapping with a 'family' key")
    family = spec["family"]
    params = {k: v for k, v in spec.items() if k != "family"}
    try:
        if family == "cara":
            return CaraUtility(**params)
        if family == "crra":
            return CrraUtility(**params)
        if family == "log":
            if params:
                raise ValidationError(f"log utility takes no parameters, got {sorted(params)}")
            return LogUtility()
        if family == "hara":
            return HaraUtility(**params)
        if family == "quadratic":
            return QuadraticUtility(**params)
    except TypeError as exc:
        raise ValidationError(f"bad parameters for utility family {family!r}: {exc}")
    raise ValidationError(f"unknown utility family {family!r}")
