"""Command-line front end: ``check``, ``solve``, ``norms`` and ``residual``.

Exit codes: 0 success, 1 configuration or parse error, 2 admissibility or
contraction failure (or a residual above 10 * tol), 3 the iteration did not
converge.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, cert_report, dump_report, load_config
from .geometry import GeometryError, Kind, forward_transform, inverse_transform, project_constrained
from .io import grid_csv, read_grid_csv, spectral_csv, write_text
from .multipliers import BlowUpError
from .solver import ConvergenceError, random_state, solve_fixed_point
from .verify import residual

EXIT_OK, EXIT_CONFIG, EXIT_FAILED, EXIT_NOT_CONVERGED = 0, 1, 2, 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nonlocal-fp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("config", help="JSON run configuration")
        p.add_argument("--seed", type=int, help="seed for randomized probes (default: config or 0)")
        p.add_argument("--out", help="output directory (default: config output.dir)")

    p = sub.add_parser("check", help="admissibility, multiplier norms and contraction certificate")
    common(p)
    p = sub.add_parser("solve", help="run the fixed-point iteration and write CSV results")
    common(p)
    p.add_argument("--tol", type=float)
    p.add_argument("--max-iter", type=int)
    p.add_argument("--override-uncertified", action="store_true",
                   help="iterate even when q >= 1 (no convergence guarantee)")
    p = sub.add_parser("norms", help="multiplier report only")
    common(p)
    p = sub.add_parser("residual", help="re-verify a stored solution CSV")
    common(p)
    p.add_argument("solution", help="grid CSV written by solve")
    p.add_argument("--tol", type=float)
    return parser


def _apply_flags(config: RunConfig, args) -> RunConfig:
    settings = config.solver
    if args.seed is not None:
        settings = replace(settings, seed=args.seed)
    if getattr(args, "tol", None) is not None:
        settings = replace(settings, tol=args.tol)
    if getattr(args, "max_iter", None) is not None:
        settings = replace(settings, max_iter=args.max_iter)
    if getattr(args, "override_uncertified", False):
        settings = replace(settings, override_uncertified=True)
    out = args.out if args.out is not None else config.output_dir
    return replace(config, solver=settings, output_dir=out)


def _emit(text: str, path: Path | None = None):
    sys.stdout.write(text)
    if path is not None:
        write_text(path, text)


def _check(config: RunConfig) -> int:
    report = cert_report(config)
    _emit(dump_report(report))
    ok = report["admissible"] and report["certificate"]["certified"]
    return EXIT_OK if ok else EXIT_FAILED


def _norms(config: RunConfig) -> int:
    report = cert_report(config)
    _emit(dump_report({"version": report["version"], "geometry": report["geometry"],
                       "multipliers": report["multipliers"]}))
    return EXIT_FAILED if report["multipliers"]["blow_up"] else EXIT_OK


def _solve(config: RunConfig) -> int:
    system, settings = config.system, config.solver
    outdir = Path(config.output_dir)
    report = cert_report(config)
    _emit(dump_report(report), outdir / "cert_report.json")
    if not report["admissible"] and not settings.override_uncertified:
        print("refusing to solve: a kernel fails its admissibility conditions", file=sys.stderr)
        return EXIT_FAILED
    if not report["certificate"]["certified"] and not settings.override_uncertified:
        print(f"refusing to solve: q = {report['certificate']['q']:.6g} is not < 1 "
              "(use --override-uncertified to iterate anyway)", file=sys.stderr)
        return EXIT_FAILED
    init = None
    if settings.init == "random":
        init = random_state(system, np.random.default_rng(settings.seed))
    try:
        sol = solve_fixed_point(system, init, settings.tol, settings.max_iter, override=True)
    except ConvergenceError as exc:
        write_text(outdir / "trace.csv", exc.trace.to_csv())
        print(f"not converged: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    write_text(outdir / "solution.csv", grid_csv(inverse_transform(sol.state)))
    write_text(outdir / "solution_spectrum.csv", spectral_csv(sol.state))
    write_text(outdir / "trace.csv", sol.trace.to_csv())
    summary = {
        "iterations": sol.trace.iterations,
        "final_increment": sol.trace.increments[-1],
        "residual": sol.residual,
        "h2_norm": sol.h2_norm,
        "tol": settings.tol,
        "nontriviality": sol.nontriviality.to_dict(),
        "outputs": sorted(str(outdir / n) for n in
                          ("cert_report.json", "solution.csv", "solution_spectrum.csv", "trace.csv")),
    }
    _emit(json.dumps(summary, sort_keys=True, indent=2) + "\n")
    return EXIT_OK


def _residual(config: RunConfig, solution_path: str) -> int:
    system, tol = config.system, config.solver.tol
    try:
        grid = read_grid_csv(Path(solution_path).read_text(), system.geometry)
    except OSError as exc:
        raise ConfigError(f"{solution_path}: {exc.strerror}") from exc
    except (ValueError, GeometryError) as exc:
        raise ConfigError(f"{solution_path}: {exc}") from exc
    if grid.n_components != system.n_components:
        raise ConfigError(f"{solution_path}: {grid.n_components} components, system has {system.n_components}")
    state = forward_transform(grid)
    if system.geometry.kind is Kind.INTERVAL:
        # the CSV stores 17 significant digits; constrained modes come back at round-off level
        state = project_constrained(state, system.regimes)
    value = residual(state, system)
    ok = value <= 10 * tol
    _emit(json.dumps({"residual": value, "tol": tol, "bound": 10 * tol, "within_bound": ok},
                     sort_keys=True, indent=2) + "\n")
    return EXIT_OK if ok else EXIT_FAILED


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = _apply_flags(load_config(args.config), args)
        if args.command == "check":
            return _check(config)
        if args.command == "norms":
            return _norms(config)
        if args.command == "solve":
            return _solve(config)
        return _residual(config, args.solution)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BlowUpError as exc:
        print(f"multiplier blow-up: {exc}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
