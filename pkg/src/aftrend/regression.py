"""Least-squares trend models with Newey-West (Bartlett kernel) HAC inference."""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy import stats

from .errors import InsufficientObservations, RankDeficientDesign
from .series import as_series

RANK_RTOL = 1e-10
REFERENCE_DISTRIBUTIONS = ("normal", "t")


@dataclass(frozen=True)
class DesignMatrix:
    """Named regressor columns; the first column is the intercept."""

    names: tuple[str, ...]
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        X = np.array(self.matrix, dtype=float)
        if X.ndim != 2 or X.shape[1] != len(self.names):
            raise ValueError("matrix must be n x k with one name per column")
        if not np.all(X[:, 0] == 1.0):
            raise ValueError("first design column must be the intercept")
        X.setflags(write=False)
        object.__setattr__(self, "matrix", X)
        object.__setattr__(self, "names", tuple(self.names))

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def k(self) -> int:
        return self.matrix.shape[1]

    @classmethod
    def from_columns(cls, columns: Sequence[tuple[str, np.ndarray]]):
        names = [c[0] for c in columns]
        return cls(names=tuple(names), matrix=np.column_stack([c[1] for c in columns]))


def time_index(n: int) -> np.ndarray:
    return np.arange(n, dtype=float)


def linear_trend_design(n: int) -> DesignMatrix:
    """Columns [1, t] with t = 0, ..., n-1."""
    t = time_index(n)
    return DesignMatrix.from_columns([("a", np.ones(n)), ("b", t)])


def default_hac_lags(n: int) -> int:
    """Automatic Newey-West bandwidth floor(4 (n/100)^(2/9))."""
    return int(math.floor(4.0 * (n / 100.0) ** (2.0 / 9.0)))


def bartlett_weights(lags: int) -> np.ndarray:
    return 1.0 - np.arange(1, lags + 1) / (lags + 1.0)


def hac_meat(X: np.ndarray, resid: np.ndarray, lags: int) -> np.ndarray:
    """Bartlett-weighted long-run covariance of the scores x_t e_t (unscaled sums)."""
    u = X * resid[:, None]
    S = u.T @ u
    for lag, w in enumerate(bartlett_weights(lags), start=1):
        if lag >= X.shape[0]:
            break
        G = u[lag:].T @ u[:-lag]
        S += w * (G + G.T)
    return S


def newey_west_cov(X: np.ndarray, resid: np.ndarray, lags: int, xtx_inv=None) -> np.ndarray:
    """Sandwich (X'X)^-1 S (X'X)^-1, no small-sample degrees-of-freedom scaling."""
    if xtx_inv is None:
        xtx_inv = np.linalg.inv(X.T @ X)
    cov = xtx_inv @ hac_meat(X, resid, lags) @ xtx_inv
    return 0.5 * (cov + cov.T)


def pvalues(tstat, df=None, dist="normal"):
    """Two-sided, upper and lower tail p-values for a t statistic."""
    if dist == "normal":
        ref = stats.norm
    elif dist == "t":
        ref = stats.t(df)
    else:
        raise ValueError(f"unknown reference distribution {dist!r}")
    tstat = np.asarray(tstat, dtype=float)
    p_pos = ref.sf(tstat)
    p_neg = ref.cdf(tstat)
    p_two = np.minimum(1.0, 2.0 * ref.sf(np.abs(tstat)))
    return p_two, p_pos, p_neg


def loglik_from_sse(sse: float, n: int) -> float:
    """Concentrated Gaussian log-likelihood -n/2 log(SSE/n), constants dropped."""
    with np.errstate(divide="ignore"):
        return float(-0.5 * n * np.log(sse / n))


def bic_from_loglik(logL: float, k: int, n: int) -> float:
    return float(-2.0 * logL + k * math.log(n))


@dataclass(frozen=True)
class TrendFit:
    names: tuple[str, ...]
    coef: np.ndarray
    cov_hac: np.ndarray
    se: np.ndarray
    t_stats: np.ndarray
    p_two: np.ndarray
    p_pos: np.ndarray
    p_neg: np.ndarray
    residuals: np.ndarray
    fitted: np.ndarray
    sse: float
    logL: float
    bic: float
    n: int
    k: int
    hac_lags: int
    dist: str
    cov_ols: np.ndarray
    exact_fit: bool = False

    def index(self, name: str) -> int:
        return self.names.index(name)

    def __getitem__(self, name: str) -> float:
        return float(self.coef[self.index(name)])

    def test(self, name: str) -> tuple[float, float, float]:
        """(p_two, p_pos, p_neg) for H0: coefficient = 0."""
        i = self.index(name)
        return float(self.p_two[i]), float(self.p_pos[i]), float(self.p_neg[i])

    @property
    def se_ols(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.cov_ols), 0.0, None))

    def coefficient_table(self) -> list[dict]:
        return [
            {"name": nm, "coef": float(self.coef[i]), "se": float(self.se[i]),
             "t": float(self.t_stats[i]), "p_two": float(self.p_two[i]),
             "p_pos": float(self.p_pos[i]), "p_neg": float(self.p_neg[i]),
             "se_ols": float(self.se_ols[i])}
            for i, nm in enumerate(self.names)
        ]

    def to_dict(self) -> dict:
        return {
            "n": self.n, "k": self.k, "hac_lags": self.hac_lags, "dist": self.dist,
            "coefficients": self.coefficient_table(),
            "sse": self.sse, "logL": self.logL, "bic": self.bic,
        }


def _qr_solve(X: np.ndarray, y: np.ndarray):
    Q, R, piv = sla.qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    if diag.size == 0 or diag[-1] <= RANK_RTOL * diag[0]:
        raise RankDeficientDesign(
            f"design matrix is rank deficient (|R_kk|/|R_11| = {diag[-1] / diag[0] if diag[0] else 0:.3g})")
    k = X.shape[1]
    coef = np.empty(k)
    coef[piv] = sla.solve_triangular(R, Q.T @ y)
    Rinv = sla.solve_triangular(R, np.eye(k))
    xtx_inv = np.empty((k, k))
    xtx_inv[np.ix_(piv, piv)] = Rinv @ Rinv.T
    return coef, xtx_inv


EXACT_FIT_RTOL = 1e-24


def ols_fit(y, X: DesignMatrix, hac_lags: int | None = None, dist: str = "normal") -> TrendFit:
    """Least-squares fit of ``y`` on the columns of ``X`` with HAC standard errors.

    Parameters
    ----------
    y : AnnualSeries or array-like
    X : DesignMatrix
    hac_lags : int, optional
        Bartlett truncation lag; ``default_hac_lags(n)`` when omitted.
    dist : {"normal", "t"}
        Reference distribution for the p-values. ``"t"`` uses n - k degrees
        of freedom.
    """
    yv = as_series(y).values
    n, k = X.matrix.shape
    if yv.size != n:
        raise ValueError(f"y has {yv.size} observations, design has {n} rows")
    if n <= k:
        raise InsufficientObservations(f"need n > k, got n={n}, k={k}")
    if dist not in REFERENCE_DISTRIBUTIONS:
        raise ValueError(f"dist must be one of {REFERENCE_DISTRIBUTIONS}")
    lags = default_hac_lags(n) if hac_lags is None else int(hac_lags)
    if lags < 0:
        raise ValueError("hac_lags must be >= 0")

    Xm = X.matrix
    coef, xtx_inv = _qr_solve(Xm, yv)
    fitted = Xm @ coef
    resid = yv - fitted
    sse = float(resid @ resid)
    cov = newey_west_cov(Xm, resid, lags, xtx_inv)
    se = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    # residuals at round-off level: standard errors are noise, so t is undefined
    exact = sse <= EXACT_FIT_RTOL * float(yv @ yv)
    with np.errstate(divide="ignore", invalid="ignore"):
        tstat = np.full(k, np.nan) if exact else coef / se
    p_two, p_pos, p_neg = pvalues(tstat, n - k, dist)
    logL = loglik_from_sse(sse, n)
    return TrendFit(
        names=X.names, coef=coef, cov_hac=cov, se=se, t_stats=tstat,
        p_two=p_two, p_pos=p_pos, p_neg=p_neg, residuals=resid, fitted=fitted,
        sse=sse, logL=logL, bic=bic_from_loglik(logL, k, n), n=n, k=k,
        hac_lags=lags, dist=dist, cov_ols=(sse / (n - k)) * xtx_inv, exact_fit=exact,
    )


def trend_test(y, hac_lags: int | None = None, dist: str = "normal"):
    """Fit y_t = a + b t + e_t and test b = 0.

    Returns ``(fit, p_two, p_pos, p_neg)`` for the slope.
    """
    y = as_series(y)
    fit = ols_fit(y, linear_trend_design(y.n), hac_lags=hac_lags, dist=dist)
    return (fit, *fit.test("b"))
