import math

import numpy as np
import pytest

from aftrend.errors import InvalidSpec
from aftrend.mannkendall import mk_test
from aftrend.montecarlo import (
    VANMARLE_NOTE,
    DGPSpec,
    _mk_batch,
    hac_slope_tstats,
    resolve_threads,
    run_mc,
    run_vanmarle_design,
    simulate,
    standard_normals,
)
from aftrend.regression import linear_trend_design, ols_fit


class TestStreams:
    def test_deterministic(self):
        np.testing.assert_array_equal(standard_normals(42, 7, 61), standard_normals(42, 7, 61))

    def test_replications_differ(self):
        assert not np.array_equal(standard_normals(42, 0, 61), standard_normals(42, 1, 61))
        assert not np.array_equal(standard_normals(42, 0, 61), standard_normals(43, 0, 61))

    def test_prefix_stable_in_n(self):
        np.testing.assert_array_equal(standard_normals(5, 3, 20), standard_normals(5, 3, 61)[:20])

    def test_moments(self):
        z = np.concatenate([standard_normals(1, r, 100) for r in range(200)])
        assert abs(z.mean()) < 0.02
        assert abs(z.std() - 1) < 0.02
        assert np.all(np.isfinite(z))

    def test_trend_mean_path(self):
        dgp = DGPSpec(kind="trend", n=10, sd=0.0, intercept=1.0, slope=0.5)
        np.testing.assert_array_equal(simulate(dgp, 0), 1.0 + 0.5 * np.arange(10))

    def test_ar1_recursion(self):
        dgp = DGPSpec(noise="ar1", phi=0.6, n=30, seed=3)
        z = standard_normals(3, 2, 30)
        e = simulate(dgp, 2)
        assert e[0] == pytest.approx(z[0] / math.sqrt(1 - 0.36), abs=1e-12)
        np.testing.assert_allclose(e[1:] - 0.6 * e[:-1], z[1:], atol=1e-12)

    def test_ar1_stationary_variance(self):
        dgp = DGPSpec(noise="ar1", phi=0.5, n=61, seed=9)
        first = np.array([simulate(dgp, r)[0] for r in range(4000)])
        last = np.array([simulate(dgp, r)[-1] for r in range(4000)])
        target = 1 / (1 - 0.25)
        assert first.var() == pytest.approx(target, rel=0.08)
        assert last.var() == pytest.approx(target, rel=0.08)


class TestBatchStatistics:
    def test_mk_batch_matches_scalar(self, rng):
        Y = rng.normal(size=(40, 25))
        Y[3, 5] = Y[3, 9]  # a tie
        Y[7] = np.round(Y[7])
        Z = _mk_batch(Y)
        for i in range(Y.shape[0]):
            assert Z[i] == pytest.approx(mk_test(Y[i]).Z, abs=1e-12)

    @pytest.mark.parametrize("lags", [None, 0, 5])
    def test_hac_batch_matches_ols_fit(self, rng, lags):
        Y = rng.normal(size=(20, 61)) + 0.01 * np.arange(61)
        t = hac_slope_tstats(Y, lags)
        for i in range(Y.shape[0]):
            fit = ols_fit(Y[i], linear_trend_design(61), hac_lags=lags)
            assert t[i] == pytest.approx(fit.t_stats[1], rel=1e-9)


class TestRunMc:
    def test_bit_reproducible(self):
        a = run_mc(DGPSpec(seed=5), reps=600)
        b = run_mc(DGPSpec(seed=5), reps=600)
        assert a.to_dict() == b.to_dict()
        np.testing.assert_array_equal(a.statistics, b.statistics)

    @pytest.mark.parametrize("threads", [2, 3, 8])
    def test_threads_do_not_change_results(self, threads):
        one = run_mc(DGPSpec(seed=5), test="hac-trend", reps=1000, threads=1)
        many = run_mc(DGPSpec(seed=5), test="hac-trend", reps=1000, threads=threads)
        assert one.statistics.tobytes() == many.statistics.tobytes()

    def test_rejections_nest_across_levels(self):
        res = run_mc(DGPSpec(seed=11), reps=2000)
        for alt in ("two-sided", "positive", "negative"):
            r = [res.reject_rate(a, alt) for a in (0.01, 0.05, 0.10)]
            assert r[0] <= r[1] <= r[2]
        assert res.reject_rate(0.05) == res.reject_two

    def test_strong_trend_power(self):
        # slope chosen so the expected t statistic is about 5
        n, sd = 61, 1.0
        b = 5 * sd * math.sqrt(12 / (n**3 - n))
        res = run_mc(DGPSpec(kind="trend", slope=b, sd=sd), reps=1000)
        assert res.reject_pos > 0.99
        assert res.reject_neg == 0.0

    def test_percentiles_sorted(self):
        res = run_mc(DGPSpec(), reps=500)
        vals = [v for _, v in res.statistic_percentiles]
        assert vals == sorted(vals)
        assert res.design == "size"

    def test_env_threads(self, monkeypatch):
        monkeypatch.setenv("AFTREND_THREADS", "3")
        assert resolve_threads() == 3
        assert resolve_threads(2) == 2
        monkeypatch.delenv("AFTREND_THREADS")
        assert resolve_threads() == 1
        assert resolve_threads(0) >= 1
        with pytest.raises(InvalidSpec):
            resolve_threads(-1)


class TestVanMarle:
    def test_zero_noise_is_deterministic(self):
        base = np.sin(np.arange(30) / 3.0) + 0.05 * np.arange(30)
        res = run_vanmarle_design(base, perturb_sd=0.0, reps=200)
        r = mk_test(base)
        assert res.reject_pos == float(r.p_pos < 0.05)
        assert res.reject_neg == float(r.p_neg < 0.05)
        assert res.note == VANMARLE_NOTE

    def test_strong_trend_always_detected(self):
        base = 0.2 * np.arange(61)
        res = run_vanmarle_design(base, perturb_sd=0.5, reps=500)
        assert res.reject_pos == 1.0

    def test_default_sd_is_sample_sd(self, rng):
        base = rng.normal(size=61)
        res = run_vanmarle_design(base, reps=100)
        assert res.dgp["sd"] == pytest.approx(np.std(base, ddof=1))

    @pytest.mark.slow
    def test_frequency_depends_on_base_draw(self):
        # two pure-noise bases of the same process give very different detection frequencies
        f = []
        for s in (1, 11):
            base = simulate(DGPSpec(kind="null", n=61, seed=s), 0)
            res = run_vanmarle_design(base, reps=10_000, seed=7)
            f.append((res.reject_pos, res.reject_neg))
        assert abs(f[0][0] - f[1][0]) > 0.2 or abs(f[0][1] - f[1][1]) > 0.2


@pytest.mark.parametrize("kwargs", [
    {"kind": "bogus"}, {"noise": "ma1"}, {"sd": -1.0}, {"sd": float("inf")},
    {"noise": "ar1", "phi": 1.0}, {"kind": "perturb"}, {"n": 3}, {"seed": -1},
])
def test_invalid_spec(kwargs):
    with pytest.raises(InvalidSpec):
        DGPSpec(**kwargs)


@pytest.mark.parametrize("kwargs", [{"test": "t"}, {"reps": 50}, {"level": 1.5}])
def test_invalid_run(kwargs):
    with pytest.raises(InvalidSpec):
        run_mc(DGPSpec(), **kwargs)
