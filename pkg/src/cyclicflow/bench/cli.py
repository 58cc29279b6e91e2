"""Command line entry point ``cyclicflow``.

Exit codes: 0 success, 2 a run did not converge within ``max_cycles``,
3 configuration error, 4 solver failure.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from dataclasses import replace

from ..errors import ConfigError, CyclicFlowError, SolverError, StepError
from ..grid import build_grid
from ..modemodel import DiscreteSchemeParams, sup_abs_reduction, theta_shifted
from ..saddle import compute_stokes_spectrum
from .config import load_config
from .report import emit_report, summarize
from .scenarios import grid_spec, run_config
from .sweep import SweepSpec, run_sweep

EXIT_OK, EXIT_NOT_CONVERGED, EXIT_CONFIG, EXIT_SOLVER = 0, 2, 3, 4

CONTINUOUS_BOUND = 0.299
DISCRETE_BOUND = 0.42


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"expected comma-separated integers, got {text!r}") from exc


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}") from exc


def cmd_rho(args) -> int:
    lo, hi = _float_list(args.bracket)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["kind", "N", "theta", "sup_abs_rho", "argmax_s", "bound", "within_bound"])
    rep = sup_abs_reduction("continuous", (lo, min(hi, 1e3)))
    w.writerow(["continuous", "", "", f"{rep.sup_abs_rho:.10f}", f"{rep.argmax_s:.6g}", CONTINUOUS_BOUND, rep.sup_abs_rho < CONTINUOUS_BOUND])
    if args.table:
        for N in _int_list(args.n_list):
            theta = theta_shifted(N) if args.theta == "shifted" else 0.5
            rep = sup_abs_reduction("discrete", (lo, hi), DiscreteSchemeParams(N, theta))
            w.writerow(["discrete", N, theta, f"{rep.sup_abs_rho:.10f}", f"{rep.argmax_s:.6g}", DISCRETE_BOUND, rep.sup_abs_rho <= DISCRETE_BOUND])
    return EXIT_OK


def cmd_spectrum(args) -> int:
    config = load_config(args.config)
    grid = build_grid(grid_spec(config))
    pairs = compute_stokes_spectrum(grid, config.nu, args.modes)
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["index", "lambda", "decay_rate", "forward_factor", "residual"])
        for i, p in enumerate(pairs, start=1):
            w.writerow([i, repr(p.lam), repr(p.decay_rate), repr(math.exp(-p.decay_rate * config.period)), repr(p.residual)])
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


def _announce(report):
    print(
        f"  cycle {report.cycle_index:3d}  periodicity {report.periodicity_error:.3e}  delta {report.initial_delta:.3e}",
        file=sys.stderr,
    )


def cmd_solve(args) -> int:
    config = load_config(args.config)
    if args.method:
        config = replace(config, method=args.method)
    results = run_config(config, on_cycle=_announce if args.verbose else None)
    emit_report(results, args.out, "csv", config, timing=not args.no_timing)
    emit_report(results, args.out, "plot-data", config)
    for line in summarize(results):
        print(line)
    return EXIT_OK if all(r.converged for r in results.values()) else EXIT_NOT_CONVERGED


def cmd_sweep(args) -> int:
    config = load_config(args.config)
    if args.method:
        config = replace(config, method=args.method)
    spec = SweepSpec(config, args.axis, tuple(_float_list(args.values)))
    result = run_sweep(spec, workers=args.workers)
    emit_report(result, args.out, "csv", timing=not args.no_timing)
    emit_report(result, args.out, "plot-data")
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["axis_value", "method", "cycles", "sigma_tail", "converged", "error"])
    for r in result.rows:
        sigma = "" if r.sigma_tail is None else f"{r.sigma_tail:.4f}"
        w.writerow([r.axis_value, r.method, r.cycles if r.cycles is not None else "", sigma, r.converged, r.error or ""])
    if any(r.error for r in result.rows):
        return EXIT_SOLVER
    return EXIT_OK if all(r.converged for r in result.rows) else EXIT_NOT_CONVERGED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cyclicflow", description="Time-periodic Stokes and Navier-Stokes states.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rho", help="reduction-factor bounds of the averaging scheme")
    p.add_argument("--table", action="store_true", help="add one row per N from --n-list")
    p.add_argument("--n-list", default="4,8,16,64,128")
    p.add_argument("--theta", choices=("shifted", "cn"), default="shifted")
    p.add_argument("--bracket", default="1e-6,1e6", help="stiffness range lo,hi")
    p.set_defaults(func=cmd_rho)

    p = sub.add_parser("spectrum", help="lowest discrete Stokes eigenvalues as CSV")
    p.add_argument("--config", required=True)
    p.add_argument("--modes", type=int, default=10)
    p.add_argument("--out")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("solve", help="run forward and/or averaging cycling")
    p.add_argument("--config", required=True)
    p.add_argument("--method", choices=("forward", "averaging", "both"))
    p.add_argument("--out", required=True)
    p.add_argument("--no-timing", action="store_true", help="leave wall_ms empty for byte-reproducible output")
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sweep", help="one-parameter sweep with a summary table")
    p.add_argument("--config", required=True)
    p.add_argument("--axis", required=True, choices=("L", "nu", "period", "Re"))
    p.add_argument("--values", required=True)
    p.add_argument("--method", choices=("forward", "averaging", "both"))
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, help="worker processes (default from CYCLICFLOW_WORKERS, else 1)")
    p.add_argument("--no-timing", action="store_true")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverError, StepError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except CyclicFlowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
