"""Per-series test battery collected into a p-value summary table."""

from __future__ import annotations

import json
import math
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .breaks import (
    BreakModelKind,
    fit_break_model,
    search_break,
    test_break_coefficients,
)
from .errors import AnalysisError, DegenerateSeries
from .mannkendall import mk_test
from .regression import default_hac_lags, trend_test
from .series import AnnualSeries, DatasetBundle, write_csv

COLUMNS = ("p_MK_two", "p_MK_pos", "p_MK_neg", "p_slope1", "p_slope2",
           "p_br_trend", "p_br_intercept")


@dataclass(frozen=True)
class AnalysisConfig:
    hac_lags: int | None = None
    continuity_correction: bool = True
    trim: int = 10
    dist: str = "normal"
    tau: int | None = None

    def header(self, n: int) -> dict:
        d = asdict(self)
        d["hac_lags_used"] = default_hac_lags(n) if self.hac_lags is None else self.hac_lags
        return d


@dataclass
class SummaryRow:
    column: str
    source: str | None
    variant: str | None
    tau: int | None = None
    break_year: int | None = None
    p_MK_two: float | None = None
    p_MK_pos: float | None = None
    p_MK_neg: float | None = None
    p_slope1: float | None = None
    p_slope2: float | None = None
    p_br_trend: float | None = None
    p_br_intercept: float | None = None
    errors: dict = field(default_factory=dict)

    @property
    def label(self) -> str:
        if self.source is None:
            return self.column
        return f"{self.source} {self.variant}"

    def values(self) -> list:
        return [getattr(self, c) for c in COLUMNS]


@dataclass
class SummaryTable:
    rows: list[SummaryRow]
    config: AnalysisConfig
    n: int
    start_year: int
    fitted: dict = field(default_factory=dict, repr=False)

    def to_dict(self) -> dict:
        return {
            "options": self.config.header(self.n),
            "n": self.n,
            "start_year": self.start_year,
            "columns": list(COLUMNS),
            "rows": [_clean(asdict(r)) for r in self.rows],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, allow_nan=False) + "\n"

    def to_csv(self) -> str:
        header = ["series", "source", "variant", "tau", "break_year", *COLUMNS, "errors"]
        rows = [[r.column, r.source or "", r.variant or "", _blank(r.tau), _blank(r.break_year),
                 *[_fmt(v) for v in r.values()], "; ".join(f"{k}: {v}" for k, v in r.errors.items())]
                for r in self.rows]
        return write_csv(None, header, rows)

    def to_text(self) -> str:
        opts = self.config.header(self.n)
        lines = ["p-values for trend and break tests",
                 "options: " + ", ".join(f"{k}={v}" for k, v in opts.items()), ""]
        width = max([len(r.label) for r in self.rows] + [6])
        head = f"{'series':<{width}}  {'tau':>4}  {'year':>5}  " + "  ".join(f"{c:>14}" for c in COLUMNS)
        lines += [head, "-" * len(head)]
        for r in self.rows:
            cells = "  ".join(f"{_fmt(v) or 'error':>14}" for v in r.values())
            lines.append(f"{r.label:<{width}}  {_blank(r.tau):>4}  {_blank(r.break_year):>5}  {cells}")
        errs = [(r.label, k, v) for r in self.rows for k, v in r.errors.items()]
        if errs:
            lines.append("")
            lines += [f"{lab}: {k}: {msg}" for lab, k, msg in errs]
        return "\n".join(lines) + "\n"


def _fmt(v) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    return f"{v:.4f}"


def _blank(v) -> str:
    return "" if v is None else str(v)


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def _require_inference(fit):
    if fit.exact_fit:
        raise DegenerateSeries("the model fits exactly; t statistics are undefined")


def analyse_series(column: str, y: AnnualSeries, label, config: AnalysisConfig):
    """Run every test on one series; failures are recorded per test group.

    Returns (SummaryRow, fitted-value columns).
    """
    source, variant = label if label else (None, None)
    row = SummaryRow(column=column, source=source, variant=variant)
    fitted = {"observed": y.values}
    try:
        mk = mk_test(y, continuity_correction=config.continuity_correction)
        row.p_MK_two, row.p_MK_pos, row.p_MK_neg = mk.p_two, mk.p_pos, mk.p_neg
    except AnalysisError as exc:
        row.errors["mann-kendall"] = str(exc)
    try:
        fit, p_two, _, _ = trend_test(y, hac_lags=config.hac_lags, dist=config.dist)
        _require_inference(fit)
        row.p_slope1 = p_two
        fitted["linear_fit"] = fit.fitted
    except AnalysisError as exc:
        row.errors["trend"] = str(exc)
    try:
        if config.tau is None:
            bf2 = search_break(y, BreakModelKind.INTERCEPT_AND_TREND, trim=config.trim,
                               hac_lags=config.hac_lags, dist=config.dist)
        else:
            bf2 = fit_break_model(y, BreakModelKind.INTERCEPT_AND_TREND, config.tau,
                                  hac_lags=config.hac_lags, dist=config.dist)
        bf1 = fit_break_model(y, BreakModelKind.INTERCEPT, bf2.tau,
                              hac_lags=config.hac_lags, dist=config.dist)
        _require_inference(bf2.fit)
        _require_inference(bf1.fit)
        row.tau, row.break_year = bf2.tau, bf2.break_year
        row.p_br_trend = test_break_coefficients(bf2)[1]
        row.p_br_intercept = test_break_coefficients(bf1)[0]
        row.p_slope2 = bf1.fit.test("b")[0]
        fitted["break_fit"] = bf2.fit.fitted
        fitted["intercept_break_fit"] = bf1.fit.fitted
    except AnalysisError as exc:
        row.errors["break"] = str(exc)
    return row, fitted


def build_summary(bundle: DatasetBundle, config: AnalysisConfig | None = None) -> SummaryTable:
    """Table of p-values, one row per series in GCP, H&N, New x raw, filter order.

    Each series gets its own break date from the SSE search on the
    intercept-and-trend model unless ``config.tau`` fixes it.
    """
    config = config or AnalysisConfig()
    rows = []
    fitted = {}
    members = bundle.ordered()
    for column, y in members:
        row, fit_cols = analyse_series(column, y, bundle.labels.get(column), config)
        rows.append(row)
        fitted[column] = fit_cols
    first = members[0][1]
    return SummaryTable(rows=rows, config=config, n=first.n, start_year=first.start_year, fitted=fitted)


def safe_name(column: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", column).strip("_") or "series"


def write_report(table: SummaryTable, out_dir) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, text in (("summary.txt", table.to_text()), ("summary.csv", table.to_csv()),
                       ("summary.json", table.to_json())):
        (out / name).write_text(text, encoding="utf-8")
        written.append(out / name)
    years = table.start_year + np.arange(table.n)
    cols = ("observed", "linear_fit", "break_fit", "intercept_break_fit")
    for column, fit_cols in table.fitted.items():
        path = out / f"fitted_{safe_name(column)}.csv"
        rows = [[int(yr)] + [float(fit_cols[c][i]) if c in fit_cols else float("nan") for c in cols]
                for i, yr in enumerate(years)]
        write_csv(path, ["year", *cols], rows)
        written.append(path)
    return written
