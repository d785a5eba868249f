"""
Report files: hypothesis key/value text, automorphy table and summary.
"""

from pathlib import Path
from typing import Union

import pyarrow as pa

from mildlab.formats._common import _read_table, _write_json, _write_table
from mildlab.hypotheses import HypothesisReport, report_to_text, summary_line
from mildlab.metrics import AutomorphyReport

HYPOTHESIS_REPORT_NAME = "hypotheses.txt"
AUTOMORPHY_TABLE_NAME = "automorphy.csv"
AUTOMORPHY_SUMMARY_NAME = "automorphy.json"


def write_hypothesis_report(report: HypothesisReport, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(f"# {summary_line(report)}\n" + report_to_text(report), encoding="utf-8")
    return path


def read_hypothesis_report(path: Union[str, Path]) -> dict:
    """Parse a key/value report back into strings keyed by field."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"File not found: {path}")
    values = {}
    for line in path.read_text(encoding="utf-8").splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        key, _, value = line.partition(" = ")
        values[key.strip()] = value.strip()
    return values


def automorphy_table(report: AutomorphyReport) -> pa.Table:
    rows = report.rows
    return pa.table(
        {
            "t": pa.array([row.t for row in rows], type=pa.float64()),
            "tau": pa.array([row.tau for row in rows], type=pa.float64()),
            "epsilon": pa.array([row.epsilon for row in rows], type=pa.float64()),
            "beta": pa.array([row.beta for row in rows], type=pa.float64()),
            "role": pa.array([row.role for row in rows], type=pa.string()),
        }
    )


def write_automorphy_table(report: AutomorphyReport, path: Union[str, Path]) -> Path:
    return _write_table(automorphy_table(report), path)


def read_automorphy_table(path: Union[str, Path]) -> pa.Table:
    return _read_table(path)


def write_automorphy_summary(report: AutomorphyReport, path: Union[str, Path]) -> Path:
    return _write_json(report.summary(), path)
