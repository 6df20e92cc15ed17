"""Mann-Kendall trend test with tie-corrected variance."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import stats

from .errors import AllValuesTied, TooFewObservations
from .series import as_series


@dataclass(frozen=True)
class MKResult:
    S: int
    var_S: float
    Z: float
    p_two: float
    p_pos: float
    p_neg: float
    n: int
    continuity_correction: bool = True

    def pvalue(self, alternative="two-sided") -> float:
        return {"two-sided": self.p_two, "positive": self.p_pos, "negative": self.p_neg}[alternative]

    def to_dict(self):
        return asdict(self)


def mk_score(x) -> int:
    """S = sum over i < j of sign(x_j - x_i)."""
    x = np.asarray(x, dtype=float)
    d = np.sign(x[None, :] - x[:, None])
    return int(np.triu(d, k=1).sum())


def tie_group_sizes(x) -> np.ndarray:
    _, counts = np.unique(np.asarray(x, dtype=float), return_counts=True)
    return counts[counts > 1]


def mk_variance(x) -> float:
    """Variance of S under no trend, corrected for tied groups."""
    n = len(x)
    t = tie_group_sizes(x).astype(float)
    return (n * (n - 1) * (2 * n + 5) - np.sum(t * (t - 1) * (2 * t + 5))) / 18.0


def mk_z(S: int, var_S: float, continuity_correction: bool = True) -> float:
    if S == 0:
        return 0.0
    adj = (1 if S > 0 else -1) if continuity_correction else 0
    return (S - adj) / math.sqrt(var_S)


def mk_test(series, continuity_correction: bool = True) -> MKResult:
    """Mann-Kendall test against two-sided, positive and negative trend alternatives.

    Normal approximation with the +/-1 continuity correction on S (switchable).
    ``p_pos`` tests for an upward trend, ``p_neg`` for a downward one.
    """
    x = as_series(series).values
    n = x.size
    if n < 4:
        raise TooFewObservations(f"Mann-Kendall test needs n >= 4, got {n}")
    var_S = mk_variance(x)
    if var_S <= 0:
        raise AllValuesTied("all values are tied; Mann-Kendall variance is zero")
    S = mk_score(x)
    Z = mk_z(S, var_S, continuity_correction)
    p_pos = float(stats.norm.sf(Z))
    p_neg = float(stats.norm.cdf(Z))
    p_two = min(1.0, float(2 * stats.norm.sf(abs(Z))))
    return MKResult(S=S, var_S=float(var_S), Z=float(Z), p_two=p_two, p_pos=p_pos,
                    p_neg=p_neg, n=n, continuity_correction=continuity_correction)
