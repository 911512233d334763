"""
Run Artifacts

report.csv (one row per x and estimator), asymptotic.csv, single_jump.csv,
summary.txt (ratio table and flags) and meta.json (config echo, version,
seed scheme, timing). Everything except meta.json depends only on
(config, seed, workers), so equal runs give byte-identical files.
"""

from pathlib import Path
from typing import Dict, List, Optional
import json
import logging
import math

import pandas as pd
from rich.table import Table

from estimators.reports import REPORT_COLUMNS

logger = logging.getLogger(__name__)


def report_frame(rows: List[Dict]) -> pd.DataFrame:
    return pd.DataFrame(rows, columns=REPORT_COLUMNS)


def write_report_csv(rows: List[Dict], path: Path) -> Path:
    """Write the estimator report with the fixed column order"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    report_frame(rows).to_csv(path, index=False)
    logger.info("Report written to %s (%d rows)", path, len(rows))
    return path


def write_single_jump_csv(rows: List[Dict], path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    columns = ['x', 'weights', 'ratio', 'stderr', 'oracle_ratio', 'hits']
    pd.DataFrame(rows, columns=columns).to_csv(path, index=False)
    return path


def _format(value) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "-"
    if isinstance(value, float):
        return f"{value:.4g}"
    return str(value)


def summary_text(name: str, rows: List[Dict], flags: List[str], notes: Optional[List[str]] = None) -> str:
    """Plain-text summary: ratio table followed by notes and flags"""
    frame = report_frame(rows)
    table = frame[['x', 'estimator', 'estimate', 'asymptotic', 'ratio', 'ratio_ci_lo', 'ratio_ci_hi']]
    lines = [f"Experiment: {name}", ""]
    if table.empty:
        lines.append("(no estimates)")
    else:
        lines.append(table.to_string(index=False, float_format=lambda v: f"{v:.4g}"))

    if notes:
        lines += ["", "Notes:"] + [f"  - {note}" for note in notes]
    lines += ["", "Flags:"]
    lines += [f"  - {flag}" for flag in flags] if flags else ["  (none)"]
    return "\n".join(lines) + "\n"


def write_summary(text: str, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path


def write_meta(meta: Dict, path: Path) -> Path:
    """meta.json; NaN and inf are written as JSON null"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w') as f:
        json.dump(_json_safe(meta), f, indent=2)
        f.write("\n")
    return path


def _json_safe(value):
    if isinstance(value, dict):
        return {key: _json_safe(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(item) for item in value]
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def ratio_table(rows: List[Dict], title: str = "Estimate / asymptotic") -> Table:
    """Rich table of the report rows for the console"""
    table = Table(title=title)
    table.add_column("x", justify="right")
    table.add_column("estimator", style="cyan")
    table.add_column("estimate", justify="right")
    table.add_column("stderr", justify="right")
    table.add_column("asymptotic", justify="right")
    table.add_column("ratio", justify="right", style="green")
    table.add_column("ratio CI", justify="right")

    for row in rows:
        interval = f"[{_format(row['ratio_ci_lo'])}, {_format(row['ratio_ci_hi'])}]"
        table.add_row(
            _format(row['x']),
            row['estimator'],
            _format(row['estimate']),
            _format(row['stderr']),
            _format(row['asymptotic']),
            _format(row['ratio']),
            interval,
        )
    return table


def asymptotic_table(rows: List[Dict]) -> Table:
    table = Table(title="Asymptotic values")
    table.add_column("x", justify="right")
    table.add_column("asymptotic", justify="right", style="green")
    table.add_column("method", style="cyan")
    table.add_column("error bound", justify="right")
    for row in rows:
        table.add_row(_format(row['x']), _format(row['asymptotic']), row['method'], _format(row['error_bound']))
    return table
