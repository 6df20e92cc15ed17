"""Running average of year-to-year changes."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import TooFewObservations
from .locallevel import Z95
from .series import as_series

CI_METHODS = ("iid", "none")


@dataclass(frozen=True)
class RunningChangeResult:
    """Running mean of first differences.

    ``taus`` counts observations 1-based, so entry ``tau`` averages the
    ``tau - 1`` changes y_2 - y_1, ..., y_tau - y_{tau-1}; ``years`` is the
    calendar year of observation ``tau``.
    """

    taus: np.ndarray
    years: np.ndarray
    running_mean: np.ndarray
    ci_lower: np.ndarray = field(repr=False)
    ci_upper: np.ndarray = field(repr=False)

    def rows(self):
        for yr, m, lo, hi in zip(self.years, self.running_mean, self.ci_lower, self.ci_upper):
            yield int(yr), float(m), float(lo), float(hi)


def running_change(y, ci: str = "iid") -> RunningChangeResult:
    """Running average change with 95% pointwise normal intervals.

    The interval at ``tau`` is mean +/- 1.96 s / sqrt(tau - 1) where ``s`` is
    the sample standard deviation of the first ``tau - 1`` changes; it is NaN
    at tau = 2 and everywhere when ``ci="none"``.
    """
    ys = as_series(y)
    if ys.n < 3:
        raise TooFewObservations(f"running change needs n >= 3, got {ys.n}")
    if ci not in CI_METHODS:
        raise ValueError(f"ci must be one of {CI_METHODS}")
    d = np.diff(ys.values)
    m = np.arange(1, d.size + 1, dtype=float)
    csum = np.cumsum(d)
    mean = csum / m
    mean[-1] = (ys.values[-1] - ys.values[0]) / d.size
    lower = np.full(d.size, np.nan)
    upper = np.full(d.size, np.nan)
    if ci == "iid":
        # Welford's recursion keeps the variance exact for constant differences
        sd = np.full(d.size, np.nan)
        mu, m2 = d[0], 0.0
        for i in range(1, d.size):
            delta = d[i] - mu
            mu += delta / (i + 1)
            m2 += delta * (d[i] - mu)
            sd[i] = np.sqrt(max(m2, 0.0) / i)
        half = Z95 * sd / np.sqrt(m)
        lower = mean - half
        upper = mean + half
    taus = np.arange(2, ys.n + 1)
    return RunningChangeResult(taus=taus, years=ys.start_year + taus - 1, running_mean=mean,
                               ci_lower=lower, ci_upper=upper)
