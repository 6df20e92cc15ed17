"""Monte Carlo size and power of trend tests.

Every replication draws from its own Philox stream keyed by
``SeedSequence([seed, replication])``, and Gaussian variates come from the
inverse normal CDF applied to 53-bit uniforms. Replications therefore do not
depend on how they are batched or which thread runs them, and results are
bit-identical for any thread count.

``run_vanmarle_design`` reproduces the perturb-the-observed-series design.
Its detection frequencies depend on the realised base series and do not
estimate size or power.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .errors import InvalidSpec
from .mannkendall import mk_variance
from .regression import default_hac_lags, hac_meat, linear_trend_design
from .series import as_series

PERCENTILES = (1.0, 2.5, 5.0, 10.0, 50.0, 90.0, 95.0, 97.5, 99.0)
TESTS = ("mk", "hac-trend")
DGP_KINDS = ("null", "trend", "perturb")
NOISE_KINDS = ("iid", "ar1")
CHUNK = 256
VANMARLE_NOTE = "detection frequency - not interpretable as size, power, or trend probability"


@dataclass(frozen=True)
class DGPSpec:
    """Data-generating process for the simulated series.

    ``kind`` is ``"null"`` (intercept + noise), ``"trend"`` (intercept +
    slope * t + noise) or ``"perturb"`` (base series + noise). ``sd`` is the
    innovation standard deviation; AR(1) noise starts from its stationary
    distribution.
    """

    kind: str = "null"
    n: int = 61
    noise: str = "iid"
    sd: float = 1.0
    phi: float = 0.0
    intercept: float = 0.0
    slope: float = 0.0
    base: tuple | None = None
    seed: int = 42

    def __post_init__(self):
        if self.kind not in DGP_KINDS:
            raise InvalidSpec(f"kind must be one of {DGP_KINDS}, got {self.kind!r}")
        if self.noise not in NOISE_KINDS:
            raise InvalidSpec(f"noise must be one of {NOISE_KINDS}, got {self.noise!r}")
        if not (self.sd >= 0 and math.isfinite(self.sd)):
            raise InvalidSpec(f"sd must be finite and >= 0, got {self.sd}")
        if self.noise == "ar1" and not abs(self.phi) < 1:
            raise InvalidSpec(f"AR(1) coefficient must satisfy |phi| < 1, got {self.phi}")
        if self.kind == "perturb":
            if self.base is None:
                raise InvalidSpec("perturb design needs a base series")
            base = tuple(float(v) for v in np.asarray(self.base, dtype=float))
            object.__setattr__(self, "base", base)
            object.__setattr__(self, "n", len(base))
        if self.n < 4:
            raise InvalidSpec(f"n must be >= 4, got {self.n}")
        if not 0 <= int(self.seed) < 2**64:
            raise InvalidSpec("seed must be a 64-bit unsigned integer")

    def mean_path(self) -> np.ndarray:
        if self.kind == "perturb":
            return np.asarray(self.base)
        t = np.arange(self.n, dtype=float)
        return self.intercept + (self.slope * t if self.kind == "trend" else 0.0 * t)

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "n": self.n, "noise": self.noise, "sd": self.sd,
             "seed": int(self.seed)}
        if self.noise == "ar1":
            d["phi"] = self.phi
        if self.kind != "perturb":
            d["intercept"] = self.intercept
        if self.kind == "trend":
            d["slope"] = self.slope
        return d


def standard_normals(seed: int, rep: int, n: int) -> np.ndarray:
    """n N(0,1) draws for one replication, by inverse CDF."""
    gen = np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(rep)])))
    k = gen.integers(0, 2**53, size=n, dtype=np.uint64)
    u = (k.astype(np.float64) + 0.5) / 2.0**53
    return special.ndtri(u)


def simulate(dgp: DGPSpec, rep: int) -> np.ndarray:
    z = standard_normals(dgp.seed, rep, dgp.n)
    if dgp.noise == "iid":
        e = dgp.sd * z
    else:
        e = np.empty(dgp.n)
        e[0] = dgp.sd / math.sqrt(1.0 - dgp.phi**2) * z[0]
        for t in range(1, dgp.n):
            e[t] = dgp.phi * e[t - 1] + dgp.sd * z[t]
    return dgp.mean_path() + e


def _mk_batch(Y: np.ndarray):
    """Continuity-corrected Mann-Kendall Z for each row of Y."""
    n = Y.shape[1]
    D = np.sign(Y[:, None, :] - Y[:, :, None])
    iu = np.triu_indices(n, k=1)
    S = D[:, iu[0], iu[1]].sum(axis=1)
    var = np.full(Y.shape[0], n * (n - 1) * (2 * n + 5) / 18.0)
    tied = np.any(np.diff(np.sort(Y, axis=1), axis=1) == 0, axis=1)
    for i in np.flatnonzero(tied):
        var[i] = mk_variance(Y[i])
    with np.errstate(divide="ignore", invalid="ignore"):
        Z = np.where(S > 0, (S - 1) / np.sqrt(var), np.where(S < 0, (S + 1) / np.sqrt(var), 0.0))
    return Z


def hac_slope_tstats(Y: np.ndarray, lags: int | None = None) -> np.ndarray:
    """HAC t statistic of the slope in y = a + b t + e, for each row of Y."""
    n = Y.shape[1]
    X = linear_trend_design(n).matrix
    L = default_hac_lags(n) if lags is None else lags
    xtx_inv = np.linalg.inv(X.T @ X)
    coef = Y @ X @ xtx_inv
    E = Y - coef @ X.T
    out = np.empty(Y.shape[0])
    for i in range(Y.shape[0]):
        cov = xtx_inv @ hac_meat(X, E[i], L) @ xtx_inv
        out[i] = coef[i, 1] / math.sqrt(max(cov[1, 1], 0.0))
    return out


def _statistics(dgp: DGPSpec, test: str, reps: range, hac_lags) -> np.ndarray:
    Y = np.vstack([simulate(dgp, r) for r in reps])
    if test == "mk":
        return _mk_batch(Y)
    return hac_slope_tstats(Y, hac_lags)


def resolve_threads(threads: int | None = None) -> int:
    """Explicit value, else AFTREND_THREADS, else 1; 0 means all cores."""
    if threads is None:
        env = os.environ.get("AFTREND_THREADS", "").strip()
        threads = int(env) if env else 1
    if threads < 0:
        raise InvalidSpec("thread count must be >= 0")
    return threads or (os.cpu_count() or 1)


@dataclass(frozen=True)
class MCResult:
    reps: int
    test: str
    level: float
    design: str
    reject_two: float
    reject_pos: float
    reject_neg: float
    statistic_percentiles: tuple
    dgp: dict = field(default_factory=dict)
    note: str = ""
    statistics: np.ndarray = field(default=None, repr=False, compare=False)

    def reject_rate(self, level: float, alternative: str = "two-sided") -> float:
        return _reject_rates(self.statistics, level)[alternative]

    def to_dict(self) -> dict:
        d = {
            "design": self.design, "test": self.test, "reps": self.reps, "level": self.level,
            "reject_two": self.reject_two, "reject_pos": self.reject_pos,
            "reject_neg": self.reject_neg,
            "statistic_percentiles": [{"percentile": p, "value": v} for p, v in self.statistic_percentiles],
            "dgp": self.dgp,
        }
        if self.note:
            d["note"] = self.note
        return d


def _reject_rates(stat: np.ndarray, level: float) -> dict:
    # p_pos = sf(stat), p_neg = cdf(stat), p_two = 2 sf(|stat|); reject when p < level
    p_pos = special.ndtr(-stat)
    p_neg = special.ndtr(stat)
    p_two = np.minimum(1.0, 2.0 * special.ndtr(-np.abs(stat)))
    reps = stat.size
    return {
        "two-sided": int(np.count_nonzero(p_two < level)) / reps,
        "positive": int(np.count_nonzero(p_pos < level)) / reps,
        "negative": int(np.count_nonzero(p_neg < level)) / reps,
    }


def run_mc(dgp: DGPSpec, test: str = "mk", reps: int = 10_000, level: float = 0.05,
           threads: int | None = None, hac_lags: int | None = None,
           design: str | None = None, note: str = "") -> MCResult:
    """Simulate ``reps`` series from ``dgp`` and record how often ``test`` rejects.

    The statistic is the Mann-Kendall Z (``"mk"``) or the HAC slope t
    statistic (``"hac-trend"``), both referred to the standard normal.
    """
    if test not in TESTS:
        raise InvalidSpec(f"test must be one of {TESTS}, got {test!r}")
    if reps < 100:
        raise InvalidSpec(f"reps must be >= 100, got {reps}")
    if not 0 < level < 1:
        raise InvalidSpec(f"level must lie in (0, 1), got {level}")
    chunks = [range(s, min(s + CHUNK, reps)) for s in range(0, reps, CHUNK)]
    nthreads = resolve_threads(threads)
    if nthreads == 1:
        parts = [_statistics(dgp, test, c, hac_lags) for c in chunks]
    else:
        with ThreadPoolExecutor(max_workers=nthreads) as pool:
            parts = list(pool.map(lambda c: _statistics(dgp, test, c, hac_lags), chunks))
    stat = np.concatenate(parts)
    rates = _reject_rates(stat, level)
    pct = tuple((p, float(v)) for p, v in zip(PERCENTILES, np.percentile(stat, PERCENTILES)))
    return MCResult(
        reps=reps, test=test, level=level,
        design=design or {"null": "size", "trend": "power", "perturb": "vanmarle"}[dgp.kind],
        reject_two=rates["two-sided"], reject_pos=rates["positive"], reject_neg=rates["negative"],
        statistic_percentiles=pct, dgp=dgp.to_dict(), note=note, statistics=stat,
    )


def run_vanmarle_design(base, perturb_sd: float | None = None, reps: int = 10_000,
                        seed: int = 42, level: float = 0.05,
                        threads: int | None = None) -> MCResult:
    """Perturb an observed series with Gaussian noise and count Mann-Kendall detections.

    ``perturb_sd`` defaults to the sample standard deviation of ``base``.
    ``reject_pos``/``reject_neg`` are the shares of perturbed copies in which
    the one-sided test at ``level`` finds an upward/downward trend.
    """
    base = as_series(base)
    sd = float(np.std(base.values, ddof=1)) if perturb_sd is None else float(perturb_sd)
    if not sd >= 0:
        raise InvalidSpec(f"perturb_sd must be >= 0, got {perturb_sd}")
    dgp = DGPSpec(kind="perturb", base=tuple(base.values), sd=sd, seed=seed)
    return run_mc(dgp, "mk", reps, level, threads=threads, design="vanmarle", note=VANMARLE_NOTE)
