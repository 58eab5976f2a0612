"""
Report files.

Attack reports are CSV or JSON with the column order of AttackReportRow.
Plot-data files are long-format CSVs: one row per point, grouped by
(defender, attack) series and sorted by the swept parameter. Writes are
atomic and contain no timestamps, so identical rows give identical bytes.
"""
import json
import logging
from pathlib import Path
from typing import Iterable, Literal, Optional, Sequence, Union

import numpy as np
import pandas as pd

from ..schemas.report import REPORT_COLUMNS, AttackReportRow, ClassifierMetrics, ComparisonSummary, DefenseComparisonRow
from ..utils.common import atomic_write, write_json
from ..utils.errors import DataFormatError, MissingArtifactError, ValidationError

logger = logging.getLogger(__name__)

ReportFormat = Literal["csv", "json"]
PARAM_COLUMNS = ("epsilon", "step", "size", "sigma", "max_iter", "alpha", "u")
PLOT_METRICS = ("recall", "bypass", "avg_l1", "l1_fraction")
METRIC_COLUMNS = ("model_id", "accuracy", "fpr", "recall", "tp", "fp", "tn", "fn", "seed")


def _rows_frame(rows: Sequence[AttackReportRow]) -> pd.DataFrame:
    records = [row.model_dump(mode="json") for row in rows]
    return pd.DataFrame.from_records(records, columns=list(REPORT_COLUMNS))


def _write_csv(frame: pd.DataFrame, path: Path) -> Path:
    return atomic_write(path, lambda tmp: frame.to_csv(tmp, index=False, lineterminator="\n"))


def emit_report(rows: Sequence[AttackReportRow], fmt: ReportFormat, path: Union[str, Path]) -> Path:
    """
    Write attack rows as CSV or JSON.

    Args:
        rows: Report rows in the order they should appear
        fmt: "csv" or "json"
        path: Destination file

    Returns:
        Path written
    """
    path = Path(path)
    if fmt == "csv":
        _write_csv(_rows_frame(rows), path)
    elif fmt == "json":
        payload = [{col: row.model_dump(mode="json")[col] for col in REPORT_COLUMNS} for row in rows]
        text = json.dumps(payload, indent=2) + "\n"
        atomic_write(path, lambda tmp: tmp.write_text(text, encoding="utf-8"))
    else:
        raise ValidationError(f"Unknown report format: {fmt}")
    logger.debug(f"Wrote {len(rows)} rows to {path}")
    return path


def read_report(path: Union[str, Path]) -> list[AttackReportRow]:
    """Parse a report written by emit_report (format from the suffix)."""
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError("Report", str(path))
    if path.suffix == ".json":
        records = json.loads(path.read_text(encoding="utf-8"))
    else:
        frame = pd.read_csv(path, float_precision="round_trip")
        if list(frame.columns) != list(REPORT_COLUMNS):
            raise DataFormatError(f"{path}: unexpected columns {list(frame.columns)}")
        frame = frame.astype(object).where(frame.notna(), None)
        records = frame.to_dict(orient="records")
    return [AttackReportRow(**record) for record in records]


def emit_plot_data(rows: Sequence[AttackReportRow], path: Union[str, Path], x: Sequence[str]) -> Path:
    """
    Plot-ready CSV: series = "<defender>/<attack>/<setting>", then x columns and metrics.

    Args:
        rows: Rows of one figure
        path: Destination
        x: Parameter columns spanning the axes (e.g. ["epsilon"] or ["step", "size"])
    """
    unknown = [c for c in x if c not in PARAM_COLUMNS]
    if unknown:
        raise ValidationError(f"Unknown plot axes: {unknown}")
    frame = _rows_frame(rows)
    frame.insert(0, "series", frame["defender"] + "/" + frame["attack"] + "/" + frame["setting"])
    columns = ["series", "setting", "defender", "surrogate", "attack", *x, *PLOT_METRICS, "n"]
    frame = frame[columns].sort_values(["series", *x], kind="mergesort")
    return _write_csv(frame, Path(path))


def emit_metrics(metrics: Iterable[ClassifierMetrics], path: Union[str, Path]) -> Path:
    """One CSV row per model."""
    records = [m.model_dump() for m in metrics]
    frame = pd.DataFrame.from_records(records, columns=list(METRIC_COLUMNS))
    return _write_csv(frame, Path(path))


def read_metrics(path: Union[str, Path]) -> list[ClassifierMetrics]:
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError("Metrics", str(path))
    frame = pd.read_csv(path)
    out = []
    for record in frame.to_dict(orient="records"):
        seed = record.get("seed")
        out.append(ClassifierMetrics(
            model_id=record["model_id"],
            tp=int(record["tp"]), fp=int(record["fp"]), tn=int(record["tn"]), fn=int(record["fn"]),
            seed=None if seed is None or (isinstance(seed, float) and np.isnan(seed)) else int(seed),
        ))
    return out


def emit_comparison(
    rows: Sequence[DefenseComparisonRow],
    summary: ComparisonSummary,
    path: Union[str, Path],
) -> Path:
    """Comparison CSV plus a JSON summary next to it."""
    path = Path(path)
    frame = pd.DataFrame.from_records(
        [r.model_dump(mode="json") for r in rows],
        columns=list(DefenseComparisonRow.model_fields),
    )
    _write_csv(frame, path)
    write_json(path.with_suffix(".summary.json"), summary.model_dump())
    return path


def emit_acceptance(results: dict, path: Union[str, Path], extra: Optional[dict] = None) -> Path:
    """acceptance.json: criterion -> {passed, measured...}, plus an overall flag."""
    evaluated = [r["passed"] for r in results.values() if r.get("passed") is not None]
    payload = {
        "criteria": results,
        "all_passed": bool(evaluated) and all(evaluated),
        **(extra or {}),
    }
    return write_json(Path(path), payload)
