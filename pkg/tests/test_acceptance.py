"""Acceptance criteria, one test per criterion.

Each test prints a single PASS/FAIL/SKIP line (also collected into the
"acceptance criteria" section of the pytest summary) and then asserts.
Criteria 1-3 need the published AF series; see conftest.dataset_path.
"""

import math
import shutil
import subprocess
import sys
import time

import numpy as np
import pytest
from scipy.special import ndtr

from aftrend.breaks import BreakModelKind, compare_models, fit_break_model, lr_critical_value, search_break
from aftrend.locallevel import break_dummy_scan, fit_local_level, loglik
from aftrend.mannkendall import mk_test
from aftrend.montecarlo import DGPSpec, run_mc, standard_normals
from aftrend.regression import linear_trend_design, ols_fit
from aftrend.report import COLUMNS, AnalysisConfig, build_summary

from . import golden
from .conftest import ACCEPTANCE_LINES
from .oracles import local_level_dense_loglik, mk_bruteforce, ols_normal_equations

BOTH = BreakModelKind.INTERCEPT_AND_TREND
INTERCEPT = BreakModelKind.INTERCEPT


def record(number, title, ok, detail=""):
    line = f"{'PASS' if ok else 'FAIL'} criterion {number:>2}: {title}" + (f" ({detail})" if detail else "")
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


@pytest.fixture
def dataset(request):
    number, title = request.node.get_closest_marker("criterion").args
    try:
        return request.getfixturevalue("published_bundle")
    except pytest.skip.Exception as exc:
        ACCEPTANCE_LINES.append(f"SKIP criterion {number:>2}: {title} ({exc.msg})")
        raise


@pytest.mark.criterion(1, "published p-value table")
def test_criterion_01_summary_table(dataset):
    best = None
    for cc in (True, False):
        for L in range(7):
            table = build_summary(dataset, AnalysisConfig(hac_lags=L, continuity_correction=cc))
            misses = []
            for row in table.rows:
                want = golden.SUMMARY[(row.source, row.variant)]
                for col, got, ref in zip(COLUMNS, row.values(), want):
                    if got is None or abs(got - ref) > 5e-4:
                        misses.append(f"{row.label}/{col}: {got} vs {ref}")
            if best is None or len(misses) < len(best[2]):
                best = (L, cc, misses)
    L, cc, misses = best
    detail = f"best setting L={L}, continuity_correction={cc}: {42 - len(misses)}/42 cells within 5e-4"
    if misses:
        detail += "; off: " + "; ".join(misses)
    record(1, "published p-value table", not misses, detail)


def _regression_mismatches(bundle):
    misses = []

    def check(label, got, ref, tol):
        if abs(got - ref) > tol:
            misses.append(f"{label}: {got:.5f} vs {ref}")

    for i, key in enumerate(golden.SERIES):
        y = bundle[key]
        tag = f"{key[0]}-{key[1]}"
        tau = golden.TAU[key[1]]
        fits = {
            "linear": (ols_fit(y, linear_trend_design(y.n)), golden.LINEAR),
            "both": (fit_break_model(y, BOTH, tau).fit, golden.INTERCEPT_AND_TREND),
            "intercept": (fit_break_model(y, INTERCEPT, tau).fit, golden.INTERCEPT),
        }
        for model, (fit, table) in fits.items():
            names = list(fit.names)
            if model == "intercept":
                names = ["a1", "b", "a2"]
            for pos, name in enumerate(names):
                est, se, t = table[name][i]
                check(f"{tag} {model} {name}", fit.coef[pos], est, 5e-4)
                check(f"{tag} {model} SE({name})", fit.se[pos], se, 5e-4)
                check(f"{tag} {model} t({name})", fit.t_stats[pos], t, 5e-4)
        cmp = compare_models(y, tau)
        for field in ("logL_1", "logL_2", "bic_1", "bic_2", "lr_stat"):
            check(f"{tag} {field}", getattr(cmp, field), golden.COMPARISON[field][i], 1e-3)
    return misses


@pytest.mark.criterion(2, "published regression and model-comparison tables")
def test_criterion_02_regression_tables(dataset):
    misses = _regression_mismatches(dataset)
    detail = "all cells within tolerance" if not misses else f"{len(misses)} cells off: " + "; ".join(misses)
    record(2, "published regression and model-comparison tables", not misses, detail)


@pytest.mark.criterion(3, "break-date recovery")
def test_criterion_03_break_dates(dataset):
    taus = {key: search_break(dataset[key], BOTH).tau for key in golden.SERIES}
    raw = {taus[k] for k in golden.SERIES if k[1] == "raw"}
    filt = {taus[k] for k in golden.SERIES if k[1] == "filter"}
    ok = len(raw) == 1 and len(filt) == 1 and min(filt) - min(raw) == 2
    record(3, "break-date recovery", ok, f"raw tau {sorted(raw)}, filtered tau {sorted(filt)}")


def test_criterion_04_oracle_equivalence():
    rng = np.random.default_rng(4)
    start = time.perf_counter()
    worst_coef = 0.0
    mk_exact = True
    for _ in range(200):
        n = int(rng.integers(4, 13))
        y = rng.integers(-4, 5, size=n).astype(float) if rng.random() < 0.3 else rng.normal(size=n)
        S, var = mk_bruteforce(y)
        if var > 0:
            r = mk_test(y)
            mk_exact &= (r.S == S and r.var_S == var)
        if n >= 4:
            X = linear_trend_design(n)
            worst_coef = max(worst_coef, np.max(np.abs(ols_fit(y, X).coef - ols_normal_equations(y, X.matrix))))
        if n >= 6:
            for kind in (BOTH, INTERCEPT):
                tau = int(rng.integers(2, n - 2))
                bf = fit_break_model(y, kind, tau)
                ref = ols_normal_equations(y, _design(n, tau, kind))
                worst_coef = max(worst_coef, np.max(np.abs(bf.fit.coef - ref)))
    worst_ll = 0.0
    for _ in range(50):
        y = rng.normal(size=5)
        s_eps, s_eta = np.exp(rng.uniform(-4, 2, size=2))
        worst_ll = max(worst_ll, abs(loglik(y, s_eps, s_eta) - local_level_dense_loglik(y, s_eps, s_eta)))
    elapsed = time.perf_counter() - start
    ok = mk_exact and worst_coef <= 1e-10 and worst_ll <= 1e-8 and elapsed < 10
    record(4, "oracle equivalence", ok,
           f"MK exact={mk_exact}, max coef diff {worst_coef:.1e}, max loglik diff {worst_ll:.1e}, {elapsed:.1f}s")


def _design(n, tau, kind):
    t = np.arange(n, dtype=float)
    d = (t >= tau).astype(float)
    cols = [np.ones(n), t, d] + ([(t - tau) * d] if kind is BOTH else [])
    return np.column_stack(cols)


def test_criterion_05_mc_size():
    start = time.perf_counter()
    res = run_mc(DGPSpec(kind="null", n=61, seed=42), test="mk", reps=10_000, level=0.05, threads=1)
    elapsed = time.perf_counter() - start
    nested = all(
        res.reject_rate(0.01, alt) <= res.reject_rate(0.05, alt) <= res.reject_rate(0.10, alt)
        for alt in ("two-sided", "positive", "negative")
    )
    # with a shared stream, rejection sets nest statistic by statistic
    p_two = 2 * ndtr(-np.abs(res.statistics))
    nested &= bool(np.all((p_two < 0.01) <= (p_two < 0.05)) and np.all((p_two < 0.05) <= (p_two < 0.10)))
    ok = 0.044 <= res.reject_two <= 0.056 and nested and elapsed < 60
    record(5, "Monte Carlo size calibration", ok,
           f"size {res.reject_two:.4f}, nested={nested}, {elapsed:.1f}s single-threaded")


SLOPE_GRID = (0.0, 0.005, 0.01, 0.02, 0.03)


def test_criterion_06_power_monotone():
    power = [run_mc(DGPSpec(kind="trend", slope=b, seed=42), test="hac-trend", reps=10_000).reject_two
             for b in SLOPE_GRID]
    drops = [power[i] - power[i + 1] for i in range(len(power) - 1) if power[i + 1] < power[i]]
    ok = len(drops) <= 1 and all(d <= 0.005 for d in drops)
    record(6, "Monte Carlo power monotonicity", ok,
           "power " + ", ".join(f"b={b}: {p:.4f}" for b, p in zip(SLOPE_GRID, power)))


def _cli(argv):
    exe = shutil.which("aftrend")
    cmd = [exe] if exe else [sys.executable, "-m", "aftrend.cli"]
    return subprocess.run(cmd + argv, capture_output=True, check=True).stdout


def test_criterion_07_thread_determinism():
    outputs = {}
    for test in ("mk", "hac-trend"):
        for threads in (1, 4, 8):
            outputs[test, threads] = _cli(["mc", "--test", test, "--reps", "10000", "--seed", "2022",
                                           "--threads", str(threads)])
    ok = all(outputs[t, k] == outputs[t, 1] for t, k in outputs)
    record(7, "thread determinism of `aftrend mc`", ok,
           f"{len(outputs)} runs, {len(set(outputs.values()))} distinct outputs for 2 tests")


def test_criterion_08_identities():
    rng = np.random.default_rng(8)
    ok = True
    for _ in range(50):
        y = rng.normal(size=61) + 0.3 * (np.arange(61) >= 30)
        tau = int(rng.integers(11, 52))
        f1 = fit_break_model(y, INTERCEPT, tau).fit
        f2 = fit_break_model(y, BOTH, tau).fit
        cmp = compare_models(y, tau)
        for f in (f1, f2):
            ok &= math.isclose(f.logL, -(61 / 2) * math.log(f.sse / 61), rel_tol=0, abs_tol=1e-10)
            ok &= math.isclose(f.bic, -2 * f.logL + f.k * math.log(61), rel_tol=0, abs_tol=1e-10)
        ok &= math.isclose(cmp.lr_stat, -2 * (f1.logL - f2.logL), rel_tol=0, abs_tol=1e-9) and cmp.lr_stat >= 0
    crit = lr_critical_value(0.05, 1)
    ok &= abs(crit - golden.CHI2_1_CRITICAL_5PCT) <= 1e-4
    # the published comparison table obeys the same identities
    published = True
    c = golden.COMPARISON
    for i in range(6):
        published &= abs(-2 * c["logL_1"][i] + 3 * math.log(61) - c["bic_1"][i]) <= 1e-3
        published &= abs(-2 * c["logL_2"][i] + 4 * math.log(61) - c["bic_2"][i]) <= 1e-3
        published &= abs(-2 * (c["logL_1"][i] - c["logL_2"][i]) - c["lr_stat"][i]) <= 1e-3
    ok &= published
    record(8, "likelihood identities and chi2 critical value", ok,
           f"critical value {crit:.6f}, published table consistent={published}")


def test_criterion_09_local_level():
    rng = np.random.default_rng(9)
    y = np.cumsum(rng.normal(0, 0.3, 61)) + rng.normal(size=61)
    fit = fit_local_level(y)
    shifted = fit_local_level(y + 3.0)
    shift_ok = (np.max(np.abs(shifted.smoothed_level - fit.smoothed_level - 3.0)) <= 1e-8
                and math.isclose(shifted.q, fit.q, rel_tol=1e-6))
    scale_ok = True
    for c in (0.01, 10.0):
        scaled = fit_local_level(c * y)
        scale_ok &= math.isclose(scaled.sigma2_eps, c * c * fit.sigma2_eps, rel_tol=1e-6)
        scale_ok &= math.isclose(scaled.sigma2_eta, c * c * fit.sigma2_eta, rel_tol=1e-6)
    a, b, h = math.log(fit.sigma2_eps), math.log(fit.sigma2_eta), 1e-5

    def f(u, v):
        return loglik(y, math.exp(u), math.exp(v))

    grad = max(abs(f(a + h, b) - f(a - h, b)), abs(f(a, b + h) - f(a, b - h))) / (2 * h)
    flat = fit_local_level(y, q=0.0)
    q0_dev = float(np.max(np.abs(flat.smoothed_level - y.mean())))
    ok = shift_ok and scale_ok and grad <= 1e-4 and not fit.boundary and q0_dev <= 1e-8
    record(9, "local-level properties", ok,
           f"shift={shift_ok}, scale={scale_ok}, |grad|={grad:.1e}, q=0 level vs mean {q0_dev:.1e}")


@pytest.mark.slow
def test_criterion_10_break_scan_recovery():
    n, reps, step = 61, 500, 5.0
    hits = 0
    for rep in range(reps):
        tau = 10 + rep % 41
        y = step * (np.arange(n) > tau) + standard_normals(10, rep, n)
        hits += break_dummy_scan(y).argmax == tau
    rate = hits / reps
    record(10, "break-scan recovery", rate >= 0.95, f"{hits}/{reps} = {rate:.3f}, step 5 sd")
