"""Trend, structural-break and stochastic-trend tests for short annual series."""

__version__ = "0.1.0"

from .breaks import (
    BreakFit,
    BreakModelKind,
    ModelComparison,
    compare_models,
    fit_break_model,
    search_break,
    test_break_coefficients,
)
from .diagnostics import RunningChangeResult, running_change
from .locallevel import BreakScanResult, LocalLevelFit, break_dummy_scan, fit_local_level
from .mannkendall import MKResult, mk_test
from .montecarlo import DGPSpec, MCResult, run_mc, run_vanmarle_design
from .regression import DesignMatrix, TrendFit, ols_fit, trend_test
from .report import AnalysisConfig, SummaryTable, build_summary
from .series import AnnualSeries, DatasetBundle, compute_af, load_csv
