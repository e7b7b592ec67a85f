"""Scenario configuration: parsing, validation and serialisation.

A scenario bundles the loss model, the utility family and the problem data
``(w0, rho, nu)`` plus numerical knobs.  Validation is collective: every
violated invariant is reported, not just the first.  The JSON wire format
is the single config document used by the command-line tools.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass

import numpy as np

from . import losses, utilities
from .errors import ValidationError
from .losses import DiscreteLoss, GridMeasure, LossModel, TruncatedContinuousLoss
from .utilities import (
    CaraUtility,
    CrraUtility,
    HaraUtility,
    LogUtility,
    QuadraticUtility,
    UtilityModel,
)

#: top-level config keys that belong to commands, not the scenario itself
RESERVED_KEYS = {"w_pair", "nu_pair", "sweep"}

_SCENARIO_KEYS = {"loss", "utility", "w0", "rho", "nu", "grid_n", "tolerances"}


@dataclass(frozen=True)
class Tolerances:
    """Numerical knobs that callers may override per scenario."""

    pointwise_atol: float = 1e-12
    oracle_pg_tol: float = 1e-8
    crossing_deadband_rel: float = 1e-7


@dataclass(frozen=True)
class Scenario:
    loss: LossModel
    utility: UtilityModel
    w0: float
    rho: float
    nu: float
    grid_n: int = 401
    tolerances: Tolerances = Tolerances()

    def build_measure(self) -> GridMeasure:
        return losses.discretize(self.loss, self.grid_n)

    def build_utility(self) -> UtilityModel:
        return self.utility

    def replace(self, **changes) -> "Scenario":
        """Variant scenario, re-validated against the wealth-domain guard."""
        out = dataclasses.replace(self, **changes)
        problems = _domain_problems(out)
        if problems:
            raise ValidationError(problems)
        return out

    def to_config(self) -> dict:
        return {
            "loss": _loss_to_config(self.loss),
            "utility": _utility_to_config(self.utility),
            "w0": self.w0,
            "rho": self.rho,
            "nu": self.nu,
            "grid_n": self.grid_n,
            "tolerances": dataclasses.asdict(self.tolerances),
        }


def _loss_to_config(loss: LossModel) -> dict:
    if isinstance(loss, DiscreteLoss):
        return {"type": "discrete", "atoms": [[v, p] for v, p in loss.atoms]}
    return {
        "type": "continuous",
        "family": loss.family,
        "params": dict(loss.params),
        "support_max": loss.support_max,
        "atom_at_zero": loss.atom_at_zero,
    }


def _utility_to_config(utility: UtilityModel) -> dict:
    family = {
        CaraUtility: "cara",
        CrraUtility: "crra",
        LogUtility: "log",
        HaraUtility: "hara",
        QuadraticUtility: "quadratic",
    }[type(utility)]
    out = {"family": family}
    for f in dataclasses.fields(utility):
        out[f.name] = getattr(utility, f.name)
    return out


def _loss_from_config(spec, problems) -> LossModel:
    if not isinstance(spec, dict) or "type" not in spec:
        problems.append("loss spec must be a mapping with a 'type' key")
        return None
    kind = spec["type"]
    try:
        if kind == "discrete":
            return DiscreteLoss(atoms=tuple(tuple(a) for a in spec.get("atoms", ())))
        if kind == "continuous":
            return TruncatedContinuousLoss(
                family=spec.get("family", ""),
                params=spec.get("params", {}),
                support_max=spec.get("support_max", 0.0),
                atom_at_zero=spec.get("atom_at_zero", 0.0),
            )
        problems.append(f"unknown loss type {kind!r}")
    except ValidationError as exc:
        problems.extend(f"loss: {e}" for e in exc.errors)
    except (TypeError, KeyError) as exc:
        problems.append(f"loss: malformed spec ({exc})")
    return None


def _domain_problems(scenario: Scenario) -> list:
    """Wealth-domain guard: every wealth level the solvers may probe must
    stay strictly inside the utility's domain."""
    problems = []
    measure = losses.discretize(scenario.loss, scenario.grid_n)
    worst = scenario.w0 - measure.support_max - (1.0 + scenario.rho) * losses.mean(measure)
    lo, hi = scenario.utility.domain
    if not worst > lo:
        problems.append(
            f"initial wealth too small: w0 - M - (1+rho) E[X] = {worst!r} must exceed "
            f"the utility domain floor {lo!r}"
        )
    if not scenario.w0 < hi:
        problems.append(
            f"initial wealth {scenario.w0!r} must stay below the utility domain cap {hi!r}"
        )
    return problems


def from_config(cfg: dict) -> Scenario:
    """Build and validate a scenario from a config mapping.

    Raises :class:`ValidationError` carrying every violated invariant.
    """
    problems = []
    if not isinstance(cfg, dict):
        raise ValidationError("config must be a JSON object")
    unknown = set(cfg) - _SCENARIO_KEYS - RESERVED_KEYS
    if unknown:
        problems.append(f"unknown config keys {sorted(unknown)}")
    for key in ("loss", "utility", "w0", "nu"):
        if key not in cfg:
            problems.append(f"missing required config key {key!r}")
    loss = _loss_from_config(cfg.get("loss"), problems) if "loss" in cfg else None
    utility = None
    if "utility" in cfg:
        try:
            utility = utilities.from_config(cfg["utility"])
        except ValidationError as exc:
            problems.extend(f"utility: {e}" for e in exc.errors)

    def _num(key, default=None):
        raw = cfg.get(key, default)
        if raw is None:
            return None
        try:
            return float(raw)
        except (TypeError, ValueError):
            problems.append(f"{key} must be a number, got {raw!r}")
            return None

    w0 = _num("w0")
    rho = _num("rho", 0.0)
    nu = _num("nu")
    grid_n = cfg.get("grid_n", 401)
    if not isinstance(grid_n, int) or grid_n < 2:
        problems.append(f"grid_n must be an integer >= 2, got {grid_n!r}")
        grid_n = 401
    if rho is not None and rho < 0:
        problems.append(f"safety loading rho must be >= 0, got {rho!r}")
    if nu is not None and not nu > 0:
        problems.append(f"variance bound nu must be > 0, got {nu!r}")
    if w0 is not None and not np.isfinite(w0):
        problems.append(f"initial wealth must be finite, got {w0!r}")

    tol_spec = cfg.get("tolerances", {})
    tolerances = Tolerances()
    if tol_spec:
        try:
            tolerances = Tolerances(**tol_spec)
        except TypeError as exc:
            problems.append(f"tolerances: {exc}")

    if problems or loss is None or utility is None or w0 is None or nu is None:
        raise ValidationError(problems or ["incomplete configuration"])

    scenario = Scenario(
        loss=loss, utility=utility, w0=w0, rho=rho, nu=nu,
        grid_n=grid_n, tolerances=tolerances,
    )
    problems.extend(_domain_problems(scenario))
    if problems:
        raise ValidationError(problems)
    return scenario


def load(path) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        return from_config(json.load(fh))
