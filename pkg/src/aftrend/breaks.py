"""Single-break trend models, break-date search by least squares, and model comparison.

Two specifications are supported, with ``D_t = I(t >= tau)``:

* ``INTERCEPT_AND_TREND``: y_t = a1 + b1 t + a2 D_t + b2 (t - tau) D_t + e_t
* ``INTERCEPT``:           y_t = a1 + b t  + a2 D_t + e_t

The break date is picked by minimum OLS SSE over the trimmed grid; HAC
inference is applied afterwards at the chosen date. The LR p-value treats the
date as fixed, which overstates significance when the date was searched.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import DegenerateBreakPlacement, RankDeficientDesign, SeriesTooShortForTrim
from .regression import (
    DesignMatrix,
    TrendFit,
    _qr_solve,
    ols_fit,
    time_index,
)
from .series import as_series


class BreakModelKind(enum.Enum):
    INTERCEPT_AND_TREND = "intercept-trend"
    INTERCEPT = "intercept"

    @property
    def k(self) -> int:
        return 4 if self is BreakModelKind.INTERCEPT_AND_TREND else 3

    @classmethod
    def parse(cls, value) -> BreakModelKind:
        if isinstance(value, cls):
            return value
        return cls(value)


def break_design(n: int, tau: int, kind: BreakModelKind) -> DesignMatrix:
    t = time_index(n)
    d = (t >= tau).astype(float)
    if kind is BreakModelKind.INTERCEPT_AND_TREND:
        return DesignMatrix.from_columns(
            [("a1", np.ones(n)), ("b1", t), ("a2", d), ("b2", (t - tau) * d)])
    return DesignMatrix.from_columns([("a1", np.ones(n)), ("b", t), ("a2", d)])


@dataclass(frozen=True)
class BreakFit:
    kind: BreakModelKind
    tau: int
    break_year: int
    fit: TrendFit
    taus: np.ndarray = field(default=None, repr=False)
    sse_profile: np.ndarray = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {"model": self.kind.value, "tau": self.tau, "break_year": self.break_year,
                **self.fit.to_dict()}


def fit_break_model(y, kind, tau: int, hac_lags: int | None = None,
                    dist: str = "normal") -> BreakFit:
    """Fit a break model at a given break index ``tau`` (0-based, first post-break index)."""
    y = as_series(y)
    kind = BreakModelKind.parse(kind)
    n = y.n
    tau = int(tau)
    if not 1 <= tau <= n - 2:
        raise DegenerateBreakPlacement(f"tau must lie in [1, {n - 2}], got {tau}")
    try:
        fit = ols_fit(y, break_design(n, tau, kind), hac_lags=hac_lags, dist=dist)
    except RankDeficientDesign as exc:
        raise DegenerateBreakPlacement(
            f"too few observations on one side of tau={tau} for the {kind.value} model") from exc
    return BreakFit(kind=kind, tau=tau, break_year=y.year(tau), fit=fit)


def break_grid(n: int, trim: int = 10) -> np.ndarray:
    """Candidate break indices: ``trim + 1`` .. ``n - trim`` (11..51 for n = 61)."""
    if n <= 2 * trim + 4:
        raise SeriesTooShortForTrim(f"n = {n} is too short for trim = {trim}; need n > {2 * trim + 4}")
    return np.arange(trim + 1, n - trim + 1)


def sse_profile(y, kind, taus) -> np.ndarray:
    y = as_series(y)
    kind = BreakModelKind.parse(kind)
    out = np.empty(len(taus))
    for i, tau in enumerate(taus):
        X = break_design(y.n, int(tau), kind).matrix
        coef, _ = _qr_solve(X, y.values)
        r = y.values - X @ coef
        out[i] = r @ r
    return out


def search_break(y, kind=BreakModelKind.INTERCEPT_AND_TREND, trim: int = 10,
                 hac_lags: int | None = None, dist: str = "normal") -> BreakFit:
    """Pick the break index minimising SSE; ties go to the earliest index."""
    y = as_series(y)
    kind = BreakModelKind.parse(kind)
    taus = break_grid(y.n, trim)
    profile = sse_profile(y, kind, taus)
    # round-off level differences count as ties
    tol = max(1e-12 * float(profile.min()), 1e-24 * float(y.values @ y.values))
    best = int(taus[int(np.flatnonzero(profile <= profile.min() + tol)[0])])
    bf = fit_break_model(y, kind, best, hac_lags=hac_lags, dist=dist)
    return BreakFit(kind=kind, tau=best, break_year=bf.break_year, fit=bf.fit,
                    taus=taus, sse_profile=profile)


def test_break_coefficients(bf: BreakFit) -> tuple[float, float | None]:
    """Two-sided HAC p-values for a2 = 0 and (when present) b2 = 0."""
    p_a2 = bf.fit.test("a2")[0]
    p_b2 = bf.fit.test("b2")[0] if "b2" in bf.fit.names else None
    return p_a2, p_b2


# keep pytest from collecting the function above as a test
test_break_coefficients.__test__ = False


def lr_critical_value(level: float = 0.05, df: int = 1) -> float:
    return float(stats.chi2.isf(level, df))


@dataclass(frozen=True)
class ModelComparison:
    tau: int
    n: int
    logL_1: float
    logL_2: float
    bic_1: float
    bic_2: float
    lr_stat: float
    lr_pvalue: float
    critical_value_5pct: float
    preferred: BreakModelKind

    def to_dict(self) -> dict:
        return {
            "tau": self.tau, "n": self.n,
            "logL_1": self.logL_1, "logL_2": self.logL_2,
            "bic_1": self.bic_1, "bic_2": self.bic_2,
            "lr_stat": self.lr_stat, "lr_pvalue": self.lr_pvalue,
            "critical_value_5pct": self.critical_value_5pct,
            "preferred": self.preferred.value,
        }


def compare_models(y, tau: int, hac_lags: int | None = None) -> ModelComparison:
    """Intercept-break model (1) against intercept-and-trend-break model (2) at ``tau``."""
    y = as_series(y)
    m1 = fit_break_model(y, BreakModelKind.INTERCEPT, tau, hac_lags=hac_lags).fit
    m2 = fit_break_model(y, BreakModelKind.INTERCEPT_AND_TREND, tau, hac_lags=hac_lags).fit
    # both models interpolate the data: the likelihoods are infinite and equal
    floor = 1e-24 * max(1.0, float(y.values @ y.values))
    if m1.sse <= floor:
        lr = 0.0
    else:
        lr = max(0.0, -2.0 * (m1.logL - m2.logL))
    return ModelComparison(
        tau=int(tau), n=y.n, logL_1=m1.logL, logL_2=m2.logL, bic_1=m1.bic, bic_2=m2.bic,
        lr_stat=lr, lr_pvalue=float(stats.chi2.sf(lr, 1)),
        critical_value_5pct=lr_critical_value(0.05, 1),
        preferred=BreakModelKind.INTERCEPT if m1.bic < m2.bic else BreakModelKind.INTERCEPT_AND_TREND,
    )

