"""Command-line front end: allocate, sweep, stats, export-population.

Exit codes: 0 success, 1 input error (malformed files, invalid parameters,
oversized enumeration requests), 2 solver-level failure (no feasible binary
vector, numerical failure).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .model import ConstraintSet, ModelParams
from .population import (
    RNG_STREAM,
    ClickConfig,
    PopulationSpec,
    UptakeConfig,
    population_from_csv,
    population_to_csv,
    sample_population,
)
from .scenarios import (
    UPTAKE_VARIANTS,
    ScenarioId,
    UptakeVariant,
    aggregate,
    build_grid,
    builtin_scenario,
    run_sweep,
    write_aggregates_csv,
    write_aggregates_json,
    write_records_csv,
)
from .solver import (
    NoFeasibleBinaryError,
    PopulationTooLargeError,
    SolveMode,
    SolveRequest,
    SolverNumericalError,
    solve,
)
from .stats import chi2_independence, conditional_proportions, table_from_csv, wilson_interval

_PARAM_DEFAULTS = dict(
    alpha=0.2, beta_a=0.03, beta_b=0.05, theta_a=0.05, theta_b=0.1,
    omega_a=0.01, omega_b=0.01, xi=0.2, gamma=0.01,
)

_UPTAKE_CHOICES = tuple(v.value for v in UptakeVariant)
_SCENARIO_CHOICES = tuple(s.value for s in ScenarioId)

_CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "scenario": {"enum": list(_SCENARIO_CHOICES)},
        "uptake": {"enum": list(_UPTAKE_CHOICES)},
        "seed": {"type": "integer", "minimum": 0},
        "reps": {"type": "integer", "minimum": 1},
        "grid": {
            "oneOf": [
                {"type": "array", "items": {"type": "number"}, "minItems": 1},
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["start", "stop", "step"],
                    "properties": {
                        "start": {"type": "number"},
                        "stop": {"type": "number"},
                        "step": {"type": "number", "exclusiveMinimum": 0},
                    },
                },
            ]
        },
        "n_a": {"type": "integer", "minimum": 1},
        "n_b": {"type": "integer", "minimum": 1},
        "tolerance": {"type": "number", "minimum": 0},
        "jobs": {"type": "integer", "minimum": 1},
    },
    "required": ["scenario"],
}


class _InputError(Exception):
    """User input problem; exits with code 1."""


def _parse_grid(text: str) -> tuple[float, ...]:
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise _InputError(f"--grid expects start:stop:step or a comma list, got {text!r}")
        try:
            start, stop, step = (float(x) for x in parts)
        except ValueError:
            raise _InputError(f"--grid values must be numbers, got {text!r}") from None
        return build_grid(start, stop, step)
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise _InputError(f"--grid values must be numbers, got {text!r}") from None


def _parse_shapes(text: str, flag: str) -> tuple[float, float]:
    parts = [x.strip() for x in text.split(",")]
    if len(parts) != 2:
        raise _InputError(f"{flag} expects 'shape1,shape2', got {text!r}")
    try:
        return float(parts[0]), float(parts[1])
    except ValueError:
        raise _InputError(f"{flag} shapes must be numbers, got {text!r}") from None


def _write_json(payload: dict, out: str | None) -> None:
    text = json.dumps(payload, indent=2)
    if out is None or out == "-":
        print(text)
    else:
        Path(out).write_text(text + "\n")


def _add_param_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("model parameters")
    for name, default in _PARAM_DEFAULTS.items():
        group.add_argument(
            f"--{name.replace('_', '-')}", type=float, default=default,
            dest=name, help=f"default {default}",
        )


def cmd_allocate(args: argparse.Namespace) -> int:
    try:
        pop = population_from_csv(args.population)
    except OSError as exc:
        raise _InputError(f"cannot read population CSV: {exc}") from exc
    except ValueError as exc:
        raise _InputError(f"{args.population}: {exc}") from exc

    try:
        params = ModelParams(**{k: getattr(args, k) for k in _PARAM_DEFAULTS})
    except ValueError as exc:
        raise _InputError(str(exc)) from exc

    mode = SolveMode.BINARY_EXACT if args.mode == "binary-exact" else SolveMode.FRACTIONAL
    tol = args.tol if args.tol is not None else (0.02 if mode is SolveMode.BINARY_EXACT else 1e-6)
    constraints = ConstraintSet(
        parity_exposure=args.parity,
        equality_opportunity=args.eo,
        equality_herm_opportunity=args.eho,
        tolerance=tol,
    )
    req = SolveRequest(pop, params, constraints, mode=mode, enumeration_cap=args.cap)
    try:
        result = solve(req)
    except PopulationTooLargeError as exc:
        raise _InputError(str(exc)) from exc
    except (NoFeasibleBinaryError, SolverNumericalError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    alloc_path = outdir / "allocation.csv"
    with open(alloc_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["group", "p", "rho", "decision"])
        for g, p, r, d in zip(pop.groups, pop.p, pop.rho, result.allocation.values):
            writer.writerow([g, format(p, ".17g"), format(r, ".17g"), format(d, ".17g")])
    summary = {
        "objective": result.objective,
        "status": result.status.value,
        "gap_orientation": "group B minus group A",
        "parity_gap": result.parity_gap,
        "eo_gap": result.eo_gap,
        "eho_gap": result.eho_gap,
        "n_fractional": result.n_fractional,
        "mode": mode.value,
        "constraints": list(constraints.active),
        "tolerance": tol,
        "n_users": pop.size,
        "version": __version__,
    }
    (outdir / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    print(f"wrote {alloc_path} (objective {result.objective:.6g}, status {result.status.value})")
    return 0


def _load_sweep_config(path: str) -> dict:
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise _InputError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise _InputError(f"config is not valid JSON: {exc}") from exc
    try:
        jsonschema.validate(raw, _CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise _InputError(f"config failed validation: {exc.message}") from exc
    if isinstance(raw.get("grid"), dict) :
        g = raw["grid"]
        raw["grid"] = list(build_grid(g["start"], g["stop"], g["step"]))
    return raw


def cmd_sweep(args: argparse.Namespace) -> int:
    config: dict = {}
    if args.config:
        config = _load_sweep_config(args.config)
    if args.scenario:
        config["scenario"] = args.scenario
    if "scenario" not in config:
        raise _InputError("either --scenario or --config with a scenario is required")
    # explicit flags override the config file
    if args.uptake is not None:
        config["uptake"] = args.uptake
    if args.seed is not None:
        config["seed"] = args.seed
    if args.reps is not None:
        config["reps"] = args.reps
    if args.grid is not None:
        config["grid"] = list(_parse_grid(args.grid))
    if args.na is not None:
        config["n_a"] = args.na
    if args.nb is not None:
        config["n_b"] = args.nb
    if args.tol is not None:
        config["tolerance"] = args.tol
    if args.jobs is not None:
        config["jobs"] = args.jobs
    try:
        jsonschema.validate(config, _CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise _InputError(f"run configuration invalid: {exc.message}") from exc

    try:
        spec = builtin_scenario(
            config["scenario"],
            config.get("uptake", UptakeVariant.MAIN_B_ADVANTAGED.value),
            grid=tuple(config["grid"]) if "grid" in config else None,
            replications=config.get("reps", 100),
            n_a=config.get("n_a", 1000),
            n_b=config.get("n_b", 1000),
            tolerance=config.get("tolerance", 1e-6),
        )
    except ValueError as exc:
        raise _InputError(str(exc)) from exc

    base_seed = config.get("seed", 0)
    jobs = config.get("jobs", 1)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)

    t0 = time.perf_counter()
    result = run_sweep(spec, base_seed=base_seed, jobs=jobs)
    wall = time.perf_counter() - t0
    rows = aggregate(result)

    write_records_csv(result, outdir / "records.csv")
    write_aggregates_csv(result, rows, outdir / "aggregates.csv")
    write_aggregates_json(result, rows, outdir / "aggregates.json")
    metadata = {
        "version": __version__,
        "scenario": result.scenario,
        "uptake_variant": result.uptake_variant,
        "param_name": result.param_name,
        "grid": list(result.grid),
        "replications": result.replications,
        "n_a": result.n_a,
        "n_b": result.n_b,
        "tolerance": result.tolerance,
        "base_seed": result.base_seed,
        "jobs": jobs,
        "rng_stream": RNG_STREAM,
        "numpy_version": np.__version__,
        "gap_orientation": "group A minus group B",
        "n_records": len(result.records),
        "n_failed": result.n_failed,
        "wall_time_s": wall,
    }
    (outdir / "metadata.json").write_text(json.dumps(metadata, indent=2) + "\n")
    print(
        f"wrote {outdir}/records.csv ({len(result.records)} records, "
        f"{result.n_failed} failed) in {wall:.1f}s"
    )
    return 0


def cmd_stats(args: argparse.Namespace) -> int:
    if args.test == "wilson":
        if args.successes is None or args.n is None:
            raise _InputError("wilson requires --successes and --n")
        try:
            interval = wilson_interval(args.successes, args.n, args.confidence)
        except ValueError as exc:
            raise _InputError(str(exc)) from exc
        _write_json(
            {
                "test": "wilson",
                "successes": args.successes,
                "n": args.n,
                "confidence": args.confidence,
                "point": interval.point,
                "lo": interval.lo,
                "hi": interval.hi,
            },
            args.out,
        )
        return 0

    if not args.table:
        raise _InputError(f"{args.test} requires a contingency table CSV")
    try:
        table = table_from_csv(args.table)
    except OSError as exc:
        raise _InputError(f"cannot read table: {exc}") from exc
    except ValueError as exc:
        raise _InputError(f"{args.table}: {exc}") from exc

    if args.test == "chi2":
        correction = {"auto": "auto", "always": True, "never": False}[args.correction]
        res = chi2_independence(table, correction=correction)
        _write_json(
            {
                "test": "chi2_independence",
                "row_labels": list(table.row_labels),
                "col_labels": list(table.col_labels),
                "statistic": res.statistic,
                "dof": res.dof,
                "p_value": res.p_value,
                "log10_p": res.log10_p,
                "cramers_v": res.cramers_v,
                "expected": res.expected.tolist(),
            },
            args.out,
        )
        return 0

    if args.test == "proportions":
        cells = conditional_proportions(table, axis=args.axis)
        _write_json(
            {
                "test": "conditional_proportions",
                "axis": args.axis,
                "row_labels": list(table.row_labels),
                "col_labels": list(table.col_labels),
                "cells": [
                    [
                        {"point": c.point, "lo": c.lo, "hi": c.hi, "confidence": c.confidence}
                        for c in row
                    ]
                    for row in cells
                ],
            },
            args.out,
        )
        return 0
    raise _InputError(f"unknown stats test {args.test!r}")


def cmd_export_population(args: argparse.Namespace) -> int:
    if args.beta_a or args.beta_b:
        if not (args.beta_a and args.beta_b):
            raise _InputError("--beta-a and --beta-b must be given together")
        uptake = UptakeConfig(
            beta_a=_parse_shapes(args.beta_a, "--beta-a"),
            beta_b=_parse_shapes(args.beta_b, "--beta-b"),
        )
    else:
        uptake = UPTAKE_VARIANTS[UptakeVariant(args.uptake)]
    try:
        spec = PopulationSpec(
            n_a=args.na,
            n_b=args.nb,
            uptake=uptake,
            click=ClickConfig(k_a=args.ka, k_b=args.kb),
            seed=args.seed,
        )
    except ValueError as exc:
        raise _InputError(str(exc)) from exc
    pop = sample_population(spec)
    population_to_csv(pop, args.out)
    print(f"wrote {args.out} ({pop.n_a}+{pop.n_b} users, seed {args.seed})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hermfair",
        description="Fairness-constrained ad allocation: solve, sweep, and survey statistics.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_alloc = sub.add_parser("allocate", help="solve one allocation from a population CSV")
    p_alloc.add_argument("population", help="CSV with header group,p,rho")
    _add_param_flags(p_alloc)
    p_alloc.add_argument("--parity", action="store_true", help="enforce exposure parity")
    p_alloc.add_argument("--eo", action="store_true", help="enforce click-weighted equality")
    p_alloc.add_argument("--eho", action="store_true", help="enforce uptake-weighted equality")
    p_alloc.add_argument("--mode", choices=("fractional", "binary-exact"), default="fractional")
    p_alloc.add_argument("--tol", type=float, default=None,
                         help="constraint tolerance (default 1e-6 fractional, 0.02 binary-exact)")
    p_alloc.add_argument("--cap", type=int, default=22, help="binary enumeration cap")
    p_alloc.add_argument("--out", default=".", help="output directory")
    p_alloc.set_defaults(func=cmd_allocate)

    p_sweep = sub.add_parser("sweep", help="run a replicated scenario sweep")
    p_sweep.add_argument("--scenario", choices=_SCENARIO_CHOICES)
    p_sweep.add_argument("--config", help="JSON run configuration (flags override it)")
    p_sweep.add_argument("--uptake", choices=_UPTAKE_CHOICES, default=None)
    p_sweep.add_argument("--seed", type=int, default=None, help="base seed (default 0)")
    p_sweep.add_argument("--reps", type=int, default=None, help="replications (default 100)")
    p_sweep.add_argument("--grid", default=None,
                         help="varying-parameter grid: 'start:stop:step' or comma list")
    p_sweep.add_argument("--na", type=int, default=None, help="group A size (default 1000)")
    p_sweep.add_argument("--nb", type=int, default=None, help="group B size (default 1000)")
    p_sweep.add_argument("--tol", type=float, default=None, help="solver tolerance (default 1e-6)")
    p_sweep.add_argument("--jobs", type=int, default=None, help="parallel workers (default 1)")
    p_sweep.add_argument("--out", default="sweep-out", help="output directory")
    p_sweep.set_defaults(func=cmd_sweep)

    p_stats = sub.add_parser("stats", help="contingency-table statistics")
    p_stats.add_argument("test", choices=("chi2", "wilson", "proportions"))
    p_stats.add_argument("table", nargs="?", help="labelled contingency table CSV")
    p_stats.add_argument("--successes", type=int, default=None)
    p_stats.add_argument("--n", type=int, default=None)
    p_stats.add_argument("--confidence", type=float, default=0.95)
    p_stats.add_argument("--correction", choices=("auto", "always", "never"), default="auto",
                         help="continuity correction (auto: 2x2 tables only)")
    p_stats.add_argument("--axis", choices=("rows", "cols"), default="rows")
    p_stats.add_argument("--out", default=None, help="output JSON path (default stdout)")
    p_stats.set_defaults(func=cmd_stats)

    p_export = sub.add_parser("export-population", help="sample a population to CSV")
    p_export.add_argument("--na", type=int, default=1000)
    p_export.add_argument("--nb", type=int, default=1000)
    p_export.add_argument("--uptake", choices=_UPTAKE_CHOICES,
                          default=UptakeVariant.MAIN_B_ADVANTAGED.value)
    p_export.add_argument("--beta-a", default=None, help="custom group-A shapes 'a,b'")
    p_export.add_argument("--beta-b", default=None, help="custom group-B shapes 'a,b'")
    p_export.add_argument("--ka", type=float, default=0.05, help="group A click coefficient")
    p_export.add_argument("--kb", type=float, default=0.05, help="group B click coefficient")
    p_export.add_argument("--seed", type=int, default=0)
    p_export.add_argument("--out", required=True, help="output CSV path")
    p_export.set_defaults(func=cmd_export_population)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
