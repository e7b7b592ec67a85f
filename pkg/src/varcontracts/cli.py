"""Command-line interface: scenario ingestion, dispatch and emission.

Commands
--------
``solve``            solve one scenario, emit a schedule CSV plus a summary.
``certify``          solve, brute-force re-solve, and report the agreement.
``compare-wealth``   run the wealth comparison (config key ``w_pair``).
``compare-variance`` run the bound comparison (config key ``nu_pair``).
``sweep``            vary one scenario field over a list (config key ``sweep``).

All commands read a single JSON config and write to ``--out``.  Exit codes
carry a machine-readable category, echoed as JSON on stderr.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import losses, oracle, scenarios, solver, statics
from .contracts import ContractSolution
from .errors import (
    PreconditionError,
    SolverError,
    UnsupportedScenarioError,
    ValidationError,
    VarContractsError,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_UNSUPPORTED = 3
EXIT_SOLVER = 4
EXIT_IO = 5
EXIT_CERTIFY = 6
EXIT_PRECONDITION = 7

SCHEDULE_COLUMNS = ("x", "indemnity", "retention", "marginal", "exposure", "phi_kkt")


def _fmt(value: float) -> str:
    return f"{value:.12g}"


def _schedule_rows(solution: ContractSolution):
    nodes = solution.measure.nodes
    pay = solution.indemnity_nodes
    marginal = np.atleast_1d(solution.marginal(nodes))
    exposure = pay - solution.premium
    try:
        phi = solver.kkt_phi_profile(solution)
    except UnsupportedScenarioError:
        phi = np.full(nodes.size, np.nan)
    for i in range(nodes.size):
        yield (nodes[i], pay[i], nodes[i] - pay[i], marginal[i], exposure[i], phi[i])


def write_schedule_csv(path, solution: ContractSolution, prefix=()):
    header = tuple(name for name, _ in prefix) + SCHEDULE_COLUMNS
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in _schedule_rows(solution):
            cells = [str(v) for _, v in prefix] + [_fmt(v) for v in row]
            fh.write(",".join(cells) + "\n")


def solution_summary(solution: ContractSolution) -> dict:
    out = {
        "regime": solution.regime,
        "premium": solution.premium,
        "expected_indemnity": solution.m_star,
        "mean_residual": solution.mean_residual,
        "var_residual": solution.var_residual,
    }
    for key in ("d_star", "d_tilde", "beta_star", "lambda_star", "jump_at", "pay"):
        value = getattr(solution, key)
        if value is not None:
            out[key] = value
    if solution.iterations:
        out["iterations"] = dict(solution.iterations)
    return out


def _load_config(path):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _scenario_from_args(cfg, args):
    if args.grid_n is not None:
        cfg = dict(cfg)
        cfg["grid_n"] = args.grid_n
    return scenarios.from_config(cfg)


def _emit_json(path, payload):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_solve(args) -> int:
    cfg = _load_config(args.config)
    scenario = _scenario_from_args(cfg, args)
    solution = solver.solve(scenario)
    write_schedule_csv(args.out, solution)
    if not args.quiet:
        json.dump(solution_summary(solution), sys.stdout, indent=2, sort_keys=True)
        sys.stdout.write("\n")
    return EXIT_OK


def certification_report(scenario, solution, result) -> dict:
    measure = solution.measure
    gap = float(np.max(np.abs(solution.indemnity_nodes - result.schedule)))
    gap_tolerance = 3.0 * scenario.loss.support_max / scenario.grid_n
    report = {
        "regime": solution.regime,
        "sup_norm_gap": gap,
        "gap_tolerance": gap_tolerance,
        "objective_solver": solution.objective(),
        "objective_oracle": result.objective,
        "objective_gap": solution.objective() - result.objective,
        "oracle": {
            "iterations": result.iterations,
            "kkt_residual": result.kkt_residual,
            "active_variance": result.active_variance,
            "multiplier": result.multiplier,
            "converged": result.converged,
        },
        "agree": bool(gap <= gap_tolerance),
    }
    if solution.beta_star is not None:
        phi = solver.kkt_phi_profile(solution)
        nodes = measure.nodes
        deductible = solution.d_tilde if solution.d_tilde else solution.d_star or 0.0
        below = np.isfinite(phi) & (nodes < deductible)
        above = np.isfinite(phi) & (nodes >= deductible)
        report["kkt"] = {
            "max_abs_phi_coinsurance": float(np.max(np.abs(phi[above]))) if above.any() else None,
            "max_phi_deductible": float(np.max(phi[below])) if below.any() else None,
        }
    return report


def cmd_certify(args) -> int:
    cfg = _load_config(args.config)
    scenario = _scenario_from_args(cfg, args)
    solution = solver.solve(scenario)
    result = oracle.brute_solve(
        scenario.build_measure(),
        scenario.build_utility(),
        scenario.w0,
        scenario.rho,
        scenario.nu,
        pg_tol=scenario.tolerances.oracle_pg_tol,
    )
    report = certification_report(scenario, solution, result)
    _emit_json(args.out, report)
    if not args.quiet:
        json.dump(report, sys.stdout, indent=2, sort_keys=True)
        sys.stdout.write("\n")
    return EXIT_OK if report["agree"] else EXIT_CERTIFY


def _crossing_dict(profile) -> dict:
    return {
        "count": profile.count,
        "locations": list(profile.locations),
        "direction_first": profile.direction_first,
    }


def comparison_payload(report) -> dict:
    return {
        "kind": report.kind,
        "scenario_a": report.scenario_a.to_config(),
        "scenario_b": report.scenario_b.to_config(),
        "regimes": (report.contract_a.regime, report.contract_b.regime),
        "exposure_crossings": _crossing_dict(report.exposure_crossings),
        "indemnity_crossings": _crossing_dict(report.indemnity_crossings),
        "mean_coverage": list(report.mean_coverage),
        "betas": list(report.betas),
        "downside_verdict": report.downside_verdict,
        "convex_order_verdict": report.convex_order_verdict,
        "checks": dict(report.checks),
        "ok": report.ok,
    }


def cmd_compare(args, kind) -> int:
    cfg = _load_config(args.config)
    key = "w_pair" if kind == "wealth" else "nu_pair"
    pair = cfg.get(key)
    if not (isinstance(pair, (list, tuple)) and len(pair) == 2):
        raise ValidationError(f"config key {key!r} must hold two numbers")
    scenario = _scenario_from_args(cfg, args)
    if kind == "wealth":
        report = statics.compare_wealth(scenario, float(pair[0]), float(pair[1]))
    else:
        report = statics.compare_variance(scenario, float(pair[0]), float(pair[1]))
    payload = comparison_payload(report)
    _emit_json(args.out, payload)
    if not args.quiet:
        json.dump(payload, sys.stdout, indent=2, sort_keys=True)
        sys.stdout.write("\n")
    return EXIT_OK


_SWEEP_PARAMS = ("w0", "rho", "nu", "grid_n")


def cmd_sweep(args) -> int:
    cfg = _load_config(args.config)
    spec = cfg.get("sweep")
    if not isinstance(spec, dict) or "param" not in spec or "values" not in spec:
        raise ValidationError("config key 'sweep' must hold {'param': ..., 'values': [...]}")
    param = spec["param"]
    if param not in _SWEEP_PARAMS:
        raise ValidationError(f"sweep param must be one of {_SWEEP_PARAMS}, got {param!r}")
    values = list(spec["values"])
    if not values:
        raise ValidationError("sweep values must be non-empty")
    base = _scenario_from_args(cfg, args)
    variants = [
        base.replace(**{param: int(v) if param == "grid_n" else float(v)}) for v in values
    ]

    workers = os.environ.get("VC_THREADS")
    max_workers = max(1, int(workers)) if workers else min(8, os.cpu_count() or 1)
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        solutions = list(pool.map(solver.solve, variants))

    header = ("param", "value") + SCHEDULE_COLUMNS
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for value, solution in zip(values, solutions):
            for row in _schedule_rows(solution):
                cells = [param, _fmt(float(value))] + [_fmt(v) for v in row]
                fh.write(",".join(cells) + "\n")
    meta = {
        "param": param,
        "values": values,
        "scenarios": [v.to_config() for v in variants],
        "regimes": [s.regime for s in solutions],
    }
    _emit_json(args.out + ".meta.json", meta)
    if not args.quiet:
        json.dump(meta, sys.stdout, indent=2, sort_keys=True)
        sys.stdout.write("\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="varcontracts",
        description="Optimal insurance schedules under an insurer variance constraint.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("solve", "certify", "compare-wealth", "compare-variance", "sweep"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="path to the scenario JSON")
        p.add_argument("--out", required=True, help="output path (CSV or JSON)")
        p.add_argument("--grid-n", type=int, default=None, help="override the grid size")
        p.add_argument("--quiet", action="store_true", help="suppress the stdout summary")
    return parser


_CATEGORIES = (
    (ValidationError, "config-invalid", EXIT_CONFIG),
    (UnsupportedScenarioError, "unsupported-scenario", EXIT_UNSUPPORTED),
    (PreconditionError, "precondition-violated", EXIT_PRECONDITION),
    (SolverError, "solver-failure", EXIT_SOLVER),
    (OSError, "io-error", EXIT_IO),
)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {
        "solve": cmd_solve,
        "certify": cmd_certify,
        "compare-wealth": lambda a: cmd_compare(a, "wealth"),
        "compare-variance": lambda a: cmd_compare(a, "variance"),
        "sweep": cmd_sweep,
    }[args.command]
    try:
        return handler(args)
    except tuple(exc for exc, _, _ in _CATEGORIES) as err:
        for exc_type, category, code in _CATEGORIES:
            if isinstance(err, exc_type):
                detail = err.errors if isinstance(err, ValidationError) else [str(err)]
                json.dump({"category": category, "errors": detail}, sys.stderr)
                sys.stderr.write("\n")
                return code
    except VarContractsError as err:
        json.dump({"category": "error", "errors": [str(err)]}, sys.stderr)
        sys.stderr.write("\n")
        return 1
    return 1


if __name__ == "__main__":
    sys.exit(main())
