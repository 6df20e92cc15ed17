"""``aftrend`` command line.

Exit codes: 0 success, 1 analysis or I/O error, 2 usage error. Results go to
stdout (or ``--out``), diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .breaks import BreakModelKind, compare_models, fit_break_model, search_break, test_break_coefficients
from .diagnostics import running_change
from .errors import AnalysisError
from .locallevel import break_dummy_scan, fit_local_level
from .mannkendall import mk_test
from .montecarlo import DGPSpec, run_mc, run_vanmarle_design
from .regression import trend_test
from .report import AnalysisConfig, build_summary, write_report
from .series import AnnualSeries, load_csv, write_csv


class UsageError(Exception):
    pass


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, allow_nan=False) + "\n"


def _emit(args, text: str, out):
    if getattr(args, "out", None):
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        out.write(text)


def _series(args) -> AnnualSeries:
    if not args.input:
        raise UsageError("--input is required")
    columns = [args.column] if args.column else None
    bundle = load_csv(args.input, columns=columns)
    if args.column:
        return bundle[args.column]
    if len(bundle) != 1:
        raise UsageError(f"--column is required; {args.input} has columns {', '.join(bundle.series)}")
    return next(iter(bundle.series.values()))


def _fmt_choice(args, default: str) -> str:
    if args.json:
        return "json"
    if args.csv:
        return "csv"
    return default


def cmd_mk(args, out):
    y = _series(args)
    res = mk_test(y, continuity_correction=not args.no_continuity_correction)
    d = {"series": y.name, "n": res.n, "S": res.S, "var_S": res.var_S, "Z": res.Z,
         "p_two": res.p_two, "p_pos": res.p_pos, "p_neg": res.p_neg,
         "alternative": args.alternative, "p_value": res.pvalue(args.alternative),
         "continuity_correction": res.continuity_correction}
    if _fmt_choice(args, "json") == "csv":
        _emit(args, write_csv(None, list(d), [list(d.values())]), out)
    else:
        _emit(args, dumps(d), out)


def cmd_trend(args, out):
    y = _series(args)
    fit, p_two, p_pos, p_neg = trend_test(y, hac_lags=args.hac_lags, dist=args.dist)
    d = {"series": y.name, "start_year": y.start_year, **fit.to_dict(),
         "slope_test": {"p_two": p_two, "p_pos": p_pos, "p_neg": p_neg}}
    if args.emit_fitted:
        write_csv(args.emit_fitted, ["year", "observed", "fitted"],
                  ([int(yr), float(o), float(f)] for yr, o, f in zip(y.years, y.values, fit.fitted)))
    _emit(args, dumps(d), out)


def cmd_break(args, out):
    y = _series(args)
    kind = BreakModelKind(args.model)
    if args.tau is not None:
        bf = fit_break_model(y, kind, args.tau, hac_lags=args.hac_lags, dist=args.dist)
    else:
        bf = search_break(y, kind, trim=args.trim, hac_lags=args.hac_lags, dist=args.dist)
    p_a2, p_b2 = test_break_coefficients(bf)
    tests = {"a2": p_a2}
    if p_b2 is not None:
        tests["b2"] = p_b2
    d = {"series": y.name, **bf.to_dict(), "break_tests": tests,
         "comparison": compare_models(y, bf.tau, hac_lags=args.hac_lags).to_dict()}
    if args.emit_profile:
        if bf.sse_profile is None:
            raise UsageError("--emit-profile needs a break search (omit --tau)")
        write_csv(args.emit_profile, ["tau", "year", "sse"],
                  ([int(t), y.year(t), float(s)] for t, s in zip(bf.taus, bf.sse_profile)))
    if args.emit_fitted:
        write_csv(args.emit_fitted, ["year", "observed", "fitted"],
                  ([int(yr), float(o), float(f)] for yr, o, f in zip(y.years, y.values, bf.fit.fitted)))
    _emit(args, dumps(d), out)


def cmd_locallevel(args, out):
    y = _series(args)
    fit = fit_local_level(y)
    d = {"series": y.name, "n": y.n, **fit.to_dict()}
    if args.emit_level:
        write_csv(args.emit_level, ["year", "level", "lower95", "upper95"],
                  ([int(yr), float(m), float(lo), float(hi)]
                   for yr, m, lo, hi in zip(y.years, fit.smoothed_level, fit.lower95, fit.upper95)))
    if args.break_scan or args.emit_scan:
        scan = break_dummy_scan(y, reestimate_variances=args.reestimate_variances, base_fit=fit)
        d["break_scan"] = scan.to_dict()
        if args.emit_scan:
            write_csv(args.emit_scan, ["year", "t_stat"],
                      ([int(yr), float(t)] for yr, t in zip(scan.years, scan.t_stats)))
    elif args.reestimate_variances:
        raise UsageError("--reestimate-variances only applies together with --break-scan")
    _emit(args, dumps(d), out)


def cmd_mc(args, out):
    if args.design == "vanmarle":
        if args.test != "mk":
            raise UsageError("the vanmarle design uses the Mann-Kendall test (--test mk)")
        y = _series(args)
        res = run_vanmarle_design(y, perturb_sd=args.sd, reps=args.reps, seed=args.seed,
                                  level=args.level, threads=args.threads)
    else:
        if args.input or args.column:
            raise UsageError("--input/--column only apply to --design vanmarle")
        if args.design == "power" and args.slope is None:
            raise UsageError("--design power needs --slope")
        spec = DGPSpec(kind="null" if args.design == "size" else "trend", n=args.n,
                       noise=args.noise, sd=1.0 if args.sd is None else args.sd,
                       phi=args.phi, slope=args.slope or 0.0, seed=args.seed)
        res = run_mc(spec, args.test, args.reps, args.level, threads=args.threads,
                     hac_lags=args.hac_lags)
    _emit(args, dumps(res.to_dict()), out)


def cmd_changes(args, out):
    y = _series(args)
    res = running_change(y, ci=args.ci)
    if _fmt_choice(args, "csv") == "json":
        d = {"series": y.name, "rows": [{"year": yr, "tau": int(t), "running_mean": m,
                                         "lower95": lo, "upper95": hi}
                                        for t, (yr, m, lo, hi) in zip(res.taus, res.rows())]}
        _emit(args, dumps(d), out)
    else:
        _emit(args, write_csv(None, ["year", "running_mean", "lower95", "upper95"], res.rows()), out)


def cmd_report(args, out):
    if not args.input:
        raise UsageError("--input is required")
    bundle = load_csv(args.input, columns=[args.column] if args.column else None)
    config = AnalysisConfig(hac_lags=args.hac_lags, continuity_correction=not args.no_continuity_correction,
                            trim=args.trim, dist=args.dist, tau=args.tau)
    table = build_summary(bundle, config)
    if args.out:
        write_report(table, args.out)
    fmt = _fmt_choice(args, "text")
    text = {"json": table.to_json, "csv": table.to_csv, "text": table.to_text}[fmt]()
    out.write(text)


def _nonneg_int(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", metavar="CSV", help="CSV file with a 'year' column")
    common.add_argument("--column", help="value column to analyse")
    common.add_argument("--out", help="write the result here instead of stdout")
    fmt = common.add_mutually_exclusive_group()
    fmt.add_argument("--json", action="store_true", help="JSON output")
    fmt.add_argument("--csv", action="store_true", help="CSV output")

    hac = argparse.ArgumentParser(add_help=False)
    hac.add_argument("--hac-lags", type=_nonneg_int, default=None,
                     help="Newey-West truncation lag (default floor(4 (n/100)^(2/9)))")
    hac.add_argument("--dist", choices=("normal", "t"), default="normal",
                     help="reference distribution for t statistics")

    p = argparse.ArgumentParser(prog="aftrend", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"aftrend {__version__}")
    sub = p.add_subparsers(dest="command", metavar="COMMAND", required=True)

    s = sub.add_parser("mk", parents=[common], help="Mann-Kendall trend test")
    s.add_argument("--alternative", choices=("two-sided", "positive", "negative"), default="two-sided")
    s.add_argument("--no-continuity-correction", action="store_true")
    s.set_defaults(func=cmd_mk)

    s = sub.add_parser("trend", parents=[common, hac], help="linear trend with HAC t tests")
    s.add_argument("--emit-fitted", metavar="PATH")
    s.set_defaults(func=cmd_trend)

    s = sub.add_parser("break", parents=[common, hac], help="single-break trend model")
    s.add_argument("--model", choices=[k.value for k in BreakModelKind], default="intercept-trend")
    s.add_argument("--trim", type=_nonneg_int, default=10)
    s.add_argument("--tau", type=int, default=None, help="fixed 0-based break index (skips the search)")
    s.add_argument("--emit-profile", metavar="PATH")
    s.add_argument("--emit-fitted", metavar="PATH")
    s.set_defaults(func=cmd_break)

    s = sub.add_parser("locallevel", parents=[common], help="local level model and break-dummy scan")
    s.add_argument("--break-scan", action="store_true")
    s.add_argument("--reestimate-variances", action="store_true")
    s.add_argument("--emit-level", metavar="PATH")
    s.add_argument("--emit-scan", metavar="PATH")
    s.set_defaults(func=cmd_locallevel)

    s = sub.add_parser("mc", parents=[common], help="Monte Carlo size/power simulation")
    s.add_argument("--design", choices=("size", "power", "vanmarle"), default="size")
    s.add_argument("--test", choices=("mk", "hac-trend"), default="mk")
    s.add_argument("--reps", type=int, default=10_000)
    s.add_argument("--seed", type=_nonneg_int, default=42)
    s.add_argument("--level", type=float, default=0.05)
    s.add_argument("--n", type=int, default=61)
    s.add_argument("--noise", choices=("iid", "ar1"), default="iid")
    s.add_argument("--sd", type=float, default=None,
                   help="noise sd (default 1; vanmarle: sample sd of the input)")
    s.add_argument("--phi", type=float, default=0.0)
    s.add_argument("--slope", type=float, default=None)
    s.add_argument("--hac-lags", type=_nonneg_int, default=None)
    s.add_argument("--threads", type=_nonneg_int, default=None,
                   help="worker threads (default AFTREND_THREADS or 1; 0 = all cores)")
    s.set_defaults(func=cmd_mc)

    s = sub.add_parser("changes", parents=[common], help="running average of year-to-year changes")
    s.add_argument("--ci", choices=("iid", "none"), default="iid")
    s.set_defaults(func=cmd_changes)

    s = sub.add_parser("report", parents=[common, hac], help="p-value summary for every series")
    s.add_argument("--trim", type=_nonneg_int, default=10)
    s.add_argument("--tau", type=int, default=None)
    s.add_argument("--no-continuity-correction", action="store_true")
    s.set_defaults(func=cmd_report)
    return p


def main(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        args.func(args, stdout)
    except UsageError as exc:
        parser.print_usage(stderr)
        print(f"aftrend {args.command}: error: {exc}", file=stderr)
        return 2
    except (AnalysisError, OSError) as exc:
        print(f"aftrend {args.command}: {exc}", file=stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
