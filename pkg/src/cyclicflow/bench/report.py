"""CSV and plot-data emitters."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Mapping

from ..cycler import CYCLE_COLUMNS, RunResult, convergence_rate, cycle_rows
from ..errors import InsufficientDataError, ReportError
from .config import ScenarioConfig, config_hash, dumps_config
from .sweep import SweepResult

SUMMARY_COLUMNS = ["axis_value", "method", "cycles", "sigma_tail", "converged", "fallback_cycles", "error"]


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def provenance_lines(config: ScenarioConfig | None, extra: Mapping[str, str] | None = None) -> list[str]:
    lines = []
    if config is not None:
        lines.append(f"config_sha256={config_hash(config)}")
    for k, v in (extra or {}).items():
        lines.append(f"{k}={v}")
    return lines


def _open(path: Path):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        return open(path, "w", newline="")
    except OSError as exc:
        raise ReportError(f"cannot write {path}: {exc}") from exc


def _write(path: Path, header, rows, comments=()):
    with _open(path) as fh:
        for line in comments:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    return path


def _curve_name(label: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "-_." else "_" for ch in label)


def emit_report(
    results,
    out_dir,
    format: str = "csv",
    config: ScenarioConfig | None = None,
    timing: bool = True,
) -> list[Path]:
    """Write reports for ``results`` into ``out_dir``; returns the written paths.

    ``results`` is a :class:`SweepResult` or a mapping ``label -> RunResult``.
    ``csv`` writes the per-cycle table (and the sweep summary for sweeps);
    ``plot-data`` writes one ``(cycle, periodicity_error)`` file per curve.
    """
    out = Path(out_dir)
    if format not in ("csv", "plot-data"):
        raise ReportError(f"unknown report format {format!r}")
    if isinstance(results, SweepResult):
        config = config or results.spec.base
        curves = {f"{results.spec.axis}={v!r}-{m}": r for (v, m), r in results.runs.items()}
        if not results.rows:
            raise ReportError("no results to report")
    else:
        curves = dict(results)
        if not curves:
            raise ReportError("no results to report")
    comments = provenance_lines(config)
    paths = []
    if format == "csv":
        rows = []
        for label, result in curves.items():
            rows.extend(cycle_rows(result, timing))
        paths.append(_write(out / "cycles.csv", CYCLE_COLUMNS, rows, comments))
        if isinstance(results, SweepResult):
            summary = [
                [_fmt(r.axis_value), r.method, _fmt(r.cycles), _fmt(r.sigma_tail), _fmt(r.converged), _fmt(r.fallback_cycles), _fmt(r.error)]
                for r in results.rows
            ]
            sweep_comments = comments + [f"axis={results.spec.axis}"]
            paths.append(_write(out / "sweep_summary.csv", SUMMARY_COLUMNS, summary, sweep_comments))
        if config is not None:
            path = out / "config.json"
            try:
                path.write_text(dumps_config(config) + "\n")
            except OSError as exc:
                raise ReportError(f"cannot write {path}: {exc}") from exc
            paths.append(path)
    else:
        for label, result in curves.items():
            rows = [[r.cycle_index, repr(r.periodicity_error)] for r in result.reports]
            path = out / f"curve_{_curve_name(label)}.csv"
            paths.append(_write(path, ["cycle", "periodicity_error"], rows, comments + [f"curve={label}"]))
    return paths


def summarize(results: Mapping[str, RunResult]) -> list[str]:
    """One human-readable line per run."""
    lines = []
    for label, r in results.items():
        try:
            sigma = f"{convergence_rate(r.reports).sigma_geometric_mean_tail:.4f}"
        except InsufficientDataError:
            sigma = "n/a"
        state = "converged" if r.converged else "not converged"
        lines.append(
            f"{label}: {state} after {r.cycles_used} cycles, last error {r.reports[-1].periodicity_error:.3e}, sigma {sigma}"
        )
    return lines
