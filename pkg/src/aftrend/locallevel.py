"""Local level (random walk plus noise) model.

    y_t = mu_t + eps_t,      eps_t ~ N(0, sigma2_eps)
    mu_{t+1} = mu_t + eta_t, eta_t ~ N(0, sigma2_eta)

The initial level is diffuse. In the diffuse limit the first observation pins
the level down to N(y_1, sigma2_eps), so the recursions start from there and
the first observation does not enter the likelihood. sigma2_eps is
concentrated out and the signal-to-noise ratio q = sigma2_eta / sigma2_eps is
found by a log-spaced grid followed by golden-section refinement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .errors import DegenerateSeries, OptimizerFailed, TooFewObservations
from .series import as_series

LOG2PI = math.log(2.0 * math.pi)
Q_MIN, Q_MAX = 1e-8, 1e8
GRID_STEPS_PER_DECADE = 10
Z95 = 1.959963984540054


@dataclass(frozen=True)
class KalmanOutput:
    a_pred: np.ndarray   # predicted level, index 0 unused
    P_pred: np.ndarray
    a_filt: np.ndarray
    P_filt: np.ndarray
    v: np.ndarray        # innovations, index 0 unused
    F: np.ndarray
    K: np.ndarray


def kalman_filter(y, sigma2_eps: float, sigma2_eta: float) -> KalmanOutput:
    y = np.asarray(y, dtype=float)
    n = y.size
    a_pred = np.full(n, np.nan)
    P_pred = np.full(n, np.nan)
    v = np.full(n, np.nan)
    F = np.full(n, np.nan)
    K = np.full(n, np.nan)
    a_filt = np.empty(n)
    P_filt = np.empty(n)
    a_filt[0] = y[0]
    P_filt[0] = sigma2_eps
    for t in range(1, n):
        a_pred[t] = a_filt[t - 1]
        P_pred[t] = P_filt[t - 1] + sigma2_eta
        F[t] = P_pred[t] + sigma2_eps
        v[t] = y[t] - a_pred[t]
        K[t] = P_pred[t] / F[t]
        a_filt[t] = a_pred[t] + K[t] * v[t]
        P_filt[t] = P_pred[t] * (1.0 - K[t])
    return KalmanOutput(a_pred, P_pred, a_filt, P_filt, v, F, K)


def loglik(y, sigma2_eps: float, sigma2_eta: float) -> float:
    """Diffuse log-likelihood of y_2..y_n given y_1 at fixed variances."""
    kf = kalman_filter(y, sigma2_eps, sigma2_eta)
    v, F = kf.v[1:], kf.F[1:]
    return float(-0.5 * np.sum(LOG2PI + np.log(F) + v * v / F))


def _gain_path(q: np.ndarray, n: int):
    """F_t and K_t for unit sigma2_eps, vectorised over q. Shapes (len(q), n - 1)."""
    q = np.asarray(q, dtype=float)
    F = np.empty((q.size, n - 1))
    K = np.empty((q.size, n - 1))
    P = np.ones(q.size)
    for t in range(n - 1):
        Pp = P + q
        F[:, t] = Pp + 1.0
        K[:, t] = Pp / F[:, t]
        P = Pp / F[:, t]
    return F, K


def _innovations(Z: np.ndarray, K: np.ndarray) -> np.ndarray:
    """Innovations of each column of Z (n x m) under a fixed gain path K (n - 1,)."""
    a = Z[0].astype(float).copy()
    V = np.empty((Z.shape[0] - 1, Z.shape[1]))
    for t in range(1, Z.shape[0]):
        V[t - 1] = Z[t] - a
        a = a + K[t - 1] * V[t - 1]
    return V


def _innovations_q(y: np.ndarray, K: np.ndarray) -> np.ndarray:
    """Innovations of y for each row of gain paths K (len(q) x n - 1)."""
    a = np.full(K.shape[0], y[0])
    V = np.empty_like(K)
    for t in range(1, y.size):
        V[:, t - 1] = y[t] - a
        a = a + K[:, t - 1] * V[:, t - 1]
    return V


def concentrated_loglik(y, q) -> tuple[np.ndarray, np.ndarray]:
    """Profile log-likelihood over q with sigma2_eps at its conditional MLE.

    Returns (loglik, sigma2_eps_hat), each with the shape of ``q``.
    """
    y = np.asarray(y, dtype=float)
    qa = np.atleast_1d(np.asarray(q, dtype=float))
    m = y.size - 1
    F, K = _gain_path(qa, y.size)
    V = _innovations_q(y, K)
    s2 = np.sum(V * V / F, axis=1) / m
    with np.errstate(divide="ignore"):
        ll = -0.5 * m * (LOG2PI + 1.0 + np.log(s2)) - 0.5 * np.sum(np.log(F), axis=1)
    if np.ndim(q) == 0:
        return ll[0], s2[0]
    return ll, s2


def _maximize_logq(fun, grid_q):
    """Grid search over log q then golden-section refinement.

    ``fun`` maps an array of q to an array of log-likelihoods. Returns
    (q_hat, loglik, boundary, converged, nfev, trace).
    """
    vals = fun(grid_q)
    nfev = grid_q.size
    i = int(np.nanargmax(vals))
    trace = [float(vals[i])]
    zero = float(fun(np.array([0.0]))[0])
    nfev += 1
    if i == 0 and zero >= vals[0]:
        trace.append(max(trace[-1], zero))
        return 0.0, zero, True, True, nfev, trace
    if i == grid_q.size - 1 or i == 0:
        return float(grid_q[i]), float(vals[i]), True, True, nfev, trace
    lg = np.log(grid_q)

    def neg(x):
        return -float(fun(np.array([math.exp(x)]))[0])

    try:
        res = optimize.minimize_scalar(neg, bracket=(lg[i - 1], lg[i], lg[i + 1]),
                                       method="golden", tol=1e-10)
    except (ValueError, RuntimeError):
        return float(grid_q[i]), float(vals[i]), False, False, nfev, trace
    nfev += int(res.nfev)
    if -res.fun >= vals[i]:
        trace.append(float(-res.fun))
        return math.exp(res.x), float(-res.fun), False, bool(res.success), nfev, trace
    return float(grid_q[i]), float(vals[i]), False, bool(res.success), nfev, trace


def q_grid() -> np.ndarray:
    decades = math.log10(Q_MAX) - math.log10(Q_MIN)
    return np.logspace(math.log10(Q_MIN), math.log10(Q_MAX),
                       int(round(decades * GRID_STEPS_PER_DECADE)) + 1)


@dataclass(frozen=True)
class LocalLevelFit:
    sigma2_eps: float
    sigma2_eta: float
    q: float
    smoothed_level: np.ndarray = field(repr=False)
    smoothed_var: np.ndarray = field(repr=False)
    filtered_level: np.ndarray = field(repr=False)
    filtered_var: np.ndarray = field(repr=False)
    loglik: float
    converged: bool
    boundary: bool
    iterations: int
    loglik_trace: tuple = ()

    @property
    def lower95(self) -> np.ndarray:
        return self.smoothed_level - Z95 * np.sqrt(self.smoothed_var)

    @property
    def upper95(self) -> np.ndarray:
        return self.smoothed_level + Z95 * np.sqrt(self.smoothed_var)

    def to_dict(self) -> dict:
        return {
            "sigma2_eps": self.sigma2_eps, "sigma2_eta": self.sigma2_eta, "q": self.q,
            "loglik": self.loglik, "converged": self.converged, "boundary": self.boundary,
            "iterations": self.iterations,
        }


def smooth(y, sigma2_eps: float, sigma2_eta: float):
    """Fixed-interval (Rauch-Tung-Striebel) smoother.

    Returns (smoothed level, smoothed variance, KalmanOutput).
    """
    y = np.asarray(y, dtype=float)
    kf = kalman_filter(y, sigma2_eps, sigma2_eta)
    n = y.size
    level = np.empty(n)
    var = np.empty(n)
    level[-1] = kf.a_filt[-1]
    var[-1] = kf.P_filt[-1]
    for t in range(n - 2, -1, -1):
        J = kf.P_filt[t] / kf.P_pred[t + 1] if kf.P_pred[t + 1] > 0 else 0.0
        level[t] = kf.a_filt[t] + J * (level[t + 1] - kf.a_pred[t + 1])
        var[t] = kf.P_filt[t] + J * J * (var[t + 1] - kf.P_pred[t + 1])
    return level, np.maximum(var, 0.0), kf


def _fit_at(y, sigma2_eps, sigma2_eta, ll, converged, boundary, nfev, trace=()):
    level, var, kf = smooth(y, sigma2_eps, sigma2_eta)
    q = sigma2_eta / sigma2_eps if sigma2_eps > 0 else math.inf
    return LocalLevelFit(
        sigma2_eps=float(sigma2_eps), sigma2_eta=float(sigma2_eta), q=float(q),
        smoothed_level=level, smoothed_var=var, filtered_level=kf.a_filt,
        filtered_var=kf.P_filt, loglik=float(ll), converged=converged,
        boundary=boundary, iterations=nfev, loglik_trace=tuple(trace))


def fit_local_level(y, q: float | None = None) -> LocalLevelFit:
    """Maximum-likelihood fit of the local level model and its smoothed level.

    With ``q`` given, the signal-to-noise ratio is held fixed and only
    sigma2_eps is estimated. A constant series returns zero variances and a
    flat level.
    """
    y = as_series(y).values
    n = y.size
    if n < 5:
        raise TooFewObservations(f"local level model needs n >= 5, got {n}")
    if np.ptp(y) == 0:
        level = np.full(n, y[0])
        zeros = np.zeros(n)
        return LocalLevelFit(0.0, 0.0, 0.0, level, zeros, level.copy(), zeros.copy(),
                             math.inf, True, True, 0)

    if q is not None:
        if q < 0:
            raise ValueError("q must be >= 0")
        ll, s2 = concentrated_loglik(y, float(q))
        return _fit_at(y, s2, q * s2, ll, True, False, 1, (ll,))

    def profile(qs):
        return concentrated_loglik(y, qs)[0]

    q_hat, ll, boundary, converged, nfev, trace = _maximize_logq(profile, q_grid())
    if not math.isfinite(ll):
        raise OptimizerFailed("log-likelihood is not finite at any q on the search grid")
    s2 = float(concentrated_loglik(y, q_hat)[1])
    return _fit_at(y, s2, q_hat * s2, ll, converged, boundary, nfev, trace)


@dataclass(frozen=True)
class BreakScanResult:
    """t statistics for a level shift after index tau (dummy I(t > tau))."""

    taus: np.ndarray
    years: np.ndarray
    t_stats: np.ndarray
    dummy_estimates: np.ndarray
    dummy_se: np.ndarray
    reestimated: bool

    @property
    def argmax(self) -> int:
        return int(self.taus[int(np.nanargmax(np.abs(self.t_stats)))])

    def to_dict(self) -> dict:
        return {
            "reestimated": self.reestimated,
            "tau_max_abs_t": self.argmax,
            "max_abs_t": float(np.nanmax(np.abs(self.t_stats))),
            "scan": [{"tau": int(t), "year": int(yr), "estimate": float(d), "se": float(s), "t": float(ts)}
                     for t, yr, d, s, ts in zip(self.taus, self.years, self.dummy_estimates,
                                                self.dummy_se, self.t_stats)],
        }


def _scan_fixed(y, taus, q, sigma2_eps):
    n = y.size
    F, K = _gain_path(np.array([q]), n)
    F, K = F[0] * sigma2_eps, K[0]
    t = np.arange(n)
    X = (t[:, None] > taus[None, :]).astype(float)
    Vy = _innovations(y[:, None], K)[:, 0]
    Vx = _innovations(X, K)
    info = np.sum(Vx * Vx / F[:, None], axis=0)
    delta = np.sum(Vx * (Vy / F)[:, None], axis=0) / info
    se = np.sqrt(1.0 / info)
    return delta, se


def _scan_reestimate(y, tau, grid):
    """Profile over q with the dummy coefficient concentrated out (diffuse regression effect)."""
    n = y.size
    m = n - 2
    x = (np.arange(n) > tau).astype(float)

    def profile(qs):
        F, K = _gain_path(qs, n)
        Vy = _innovations_q(y, K)
        Vx = _innovations_q(x, K)
        sxx = np.sum(Vx * Vx / F, axis=1)
        sxy = np.sum(Vx * Vy / F, axis=1)
        rss = np.sum(Vy * Vy / F, axis=1) - sxy * sxy / sxx
        with np.errstate(divide="ignore", invalid="ignore"):
            return (-0.5 * m * (LOG2PI + 1.0 + np.log(rss / m))
                    - 0.5 * np.sum(np.log(F), axis=1) - 0.5 * np.log(sxx))

    q_hat, _, _, _, _, _ = _maximize_logq(profile, grid)
    F, K = _gain_path(np.array([q_hat]), n)
    F, K = F[0], K[0]
    vy = _innovations(y[:, None], K)[:, 0]
    vx = _innovations(x[:, None], K)[:, 0]
    sxx = np.sum(vx * vx / F)
    delta = np.sum(vx * vy / F) / sxx
    s2 = max(np.sum((vy - delta * vx) ** 2 / F) / m, 0.0)
    return delta, math.sqrt(s2 / sxx)


def break_dummy_scan(y, reestimate_variances: bool = False, taus=None,
                     base_fit: LocalLevelFit | None = None) -> BreakScanResult:
    """t tests of a level-shift dummy I(t > tau) added to the local level model.

    For each tau the shift enters as a regression effect on the observation
    equation with a diffuse coefficient, estimated by GLS through the Kalman
    filter. By default the variances stay at the no-break maximum-likelihood
    values; ``reestimate_variances=True`` refits them at every tau.
    """
    ys = as_series(y)
    yv = ys.values
    n = yv.size
    if n < 10:
        raise TooFewObservations(f"break scan needs n >= 10, got {n}")
    if np.ptp(yv) == 0:
        raise DegenerateSeries("constant series: break dummy t statistics are undefined")
    taus = np.arange(2, n - 1) if taus is None else np.asarray(taus, dtype=int)
    if reestimate_variances:
        grid = q_grid()
        est = [_scan_reestimate(yv, int(tau), grid) for tau in taus]
        delta = np.array([e[0] for e in est])
        se = np.array([e[1] for e in est])
    else:
        fit = base_fit if base_fit is not None else fit_local_level(ys)
        delta, se = _scan_fixed(yv, taus, fit.q, fit.sigma2_eps)
    with np.errstate(divide="ignore", invalid="ignore"):
        tstat = delta / se
    return BreakScanResult(taus=taus, years=ys.start_year + taus, t_stats=tstat,
                           dummy_estimates=delta, dummy_se=se,
                           reestimated=reestimate_variances)
