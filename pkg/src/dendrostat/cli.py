"""``dendrostat`` command-line entry point.

Every subcommand writes its results to files under ``--out`` together with a
``manifest.json`` holding the resolved options, the package version and the
SHA-256 digest of each input file.
"""

from __future__ import annotations

import argparse
import datetime as dt
import hashlib
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
from scipy.stats import chi2

from . import __version__, mcstudy, ringdata, svg
from .evt import (
    PARAM_NAMES,
    block_maxima,
    bundle_csv,
    bundle_svg,
    default_profile_grid,
    diagnostics,
    fit_gev,
    profile_loglik,
)
from .exceptions import DendroError, ParseError, ValidationError
from .mlbench import LABELS, run_benchmark

EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _float_list(text):
    try:
        values = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="master random seed (default 0)")
    common.add_argument("--threads", type=_positive_int, default=1, help="worker threads (default 1)")
    common.add_argument("--out", type=Path, required=True, help="output directory")

    parser = _Parser(prog="dendrostat", description="Statistical tools for tree-ring width series.")
    parser.add_argument("--version", action="version", version=f"dendrostat {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", parents=[common], help="parse a ring-width CSV and align it")
    p.add_argument("--data", type=Path, required=True, help="ring-width CSV (year,<id>,...)")
    p.set_defaults(run=_run_ingest)

    p = sub.add_parser("synth", parents=[common], help="write a synthetic ring-width panel")
    p.add_argument("--n-series", type=_positive_int, default=9)
    p.add_argument("--n-years", type=int, default=141)
    p.add_argument("--start-year", type=int, default=1835)
    p.add_argument("--layout", choices=("aligned", "site"), default="aligned",
                   help="'site' staggers the nine series over their historical ring spans")
    p.set_defaults(run=_run_synth)

    p = sub.add_parser("mcstudy", parents=[common], help="AIC order-selection Monte Carlo grid")
    p.add_argument("--n-obs", type=int, default=140)
    p.add_argument("--reps", type=_positive_int, default=200)
    p.add_argument("--theta", type=_float_list, default=list(mcstudy.DEFAULT_GRID), help="AR grid, comma separated")
    p.add_argument("--phi", type=_float_list, default=list(mcstudy.DEFAULT_GRID), help="MA grid, comma separated")
    p.set_defaults(run=_run_mcstudy)

    p = sub.add_parser("mlbench", parents=[common], help="cross-validated regression benchmark")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--target", required=True, help="sample id predicted from the other series")
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--threshold", type=float, default=0.75, help="correlation cut-off for the modified variant")
    p.set_defaults(run=_run_mlbench)

    p = sub.add_parser("evt", parents=[common], help="GEV fit, profile likelihoods and diagnostics")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--series", required=True)
    p.add_argument("--transform", default="logdiff", choices=ringdata.TRANSFORMS)
    p.add_argument("--block", type=_positive_int, default=None, help="fit maxima of blocks of this length")
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--no-align", dest="align", action="store_false",
                   help="use the full series instead of the panel's common interval")
    p.add_argument("--profile", action="store_true")
    p.add_argument("--diagnostics", action="store_true")
    p.set_defaults(run=_run_evt)
    return parser


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, np.generic):
        return _clean(obj.item())
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, Path):
        return str(obj)
    return obj


def _write_json(path, obj):
    path.write_text(json.dumps(_clean(obj), indent=2, allow_nan=False) + "\n", encoding="utf-8")


def _write_text(path, text):
    path.write_text(text, encoding="utf-8")


def _started_at():
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    when = (
        dt.datetime.fromtimestamp(int(epoch), dt.timezone.utc)
        if epoch else dt.datetime.now(dt.timezone.utc)
    )
    return when.replace(microsecond=0).isoformat()


class _Run:
    def __init__(self, args):
        self.args = args
        self.out = args.out
        self.digests = {}

    def read(self, path):
        raw = Path(path).read_bytes()
        self.digests[str(path)] = hashlib.sha256(raw).hexdigest()
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"{path} is not UTF-8 text ({exc.reason})") from None

    def manifest(self, started_at):
        options = {k: v for k, v in vars(self.args).items() if k not in ("run", "command")}
        return {
            "subcommand": self.args.command,
            "options": options,
            "seed": self.args.seed,
            "input_sha256": self.digests,
            "version": __version__,
            "started_at": started_at,
        }


def _load_series(run, path):
    return ringdata.parse_panel(run.read(path))


def _run_ingest(run):
    series = _load_series(run, run.args.data)
    summary = ringdata.panel_summary(series)
    _write_json(run.out / "summary.json", summary)
    common = summary["common_interval"]
    if common is not None:
        _write_text(run.out / "aligned.csv", ringdata.write_panel(ringdata.align_common_interval(series)))
        print(f"{len(series)} series; common interval {common['start_year']}-{common['end_year']} "
              f"({common['n_years']} years)")
    else:
        print(f"{len(series)} series; no common interval")


def _run_synth(run):
    a = run.args
    if a.layout == "site":
        series = ringdata.synth_site_series(a.seed)
    else:
        series = ringdata.synth_panel(a.seed, a.n_series, a.n_years, a.start_year).series
    _write_text(run.out / "panel.csv", ringdata.write_panel(series))
    _write_json(run.out / "summary.json", ringdata.panel_summary(series))
    print(f"wrote {len(series)} synthetic series to {run.out / 'panel.csv'}")


def _run_mcstudy(run):
    a = run.args
    config = mcstudy.McConfig(
        n_obs=a.n_obs, n_reps=a.reps, theta_grid=a.theta, phi_grid=a.phi, base_seed=a.seed,
    )
    grid = mcstudy.run_grid(config, threads=a.threads)
    mcstudy.write_outputs(grid, run.out)
    p = grid.proportions
    print(f"{p.shape[0]}x{p.shape[1]} grid, {a.reps} replicates per cell; "
          f"ARMA(1,1) chosen in {p.min():.3f}-{p.max():.3f} of replicates")


def _trace_svg(trace, xlabel, title):
    h = np.array([t[0] for t in trace], dtype=float)
    r = np.array([t[1] for t in trace], dtype=float)
    panel = svg.Panel(title, xlabel, "CV RMSE").line(h, r).points(h, r)
    return svg.figure([panel])


def _run_mlbench(run):
    a = run.args
    panel = ringdata.align_common_interval(_load_series(run, a.data))
    report = run_benchmark(panel, a.target, seed=a.seed, folds=a.folds, threshold=a.threshold, threads=a.threads)
    _write_text(run.out / "table4.csv", report.table_csv())
    _write_text(run.out / "knn_tuning.csv", report.trace_csv("knn", "n_neighbors"))
    _write_text(run.out / "rf_tuning.csv", report.trace_csv("random-forest", "max_features"))
    svg.write(run.out / "knn_tuning.svg", _trace_svg(report.tuning_traces["knn"], "K", "KNN tuning"))
    svg.write(run.out / "rf_tuning.svg",
              _trace_svg(report.tuning_traces["random-forest"], "features per split", "Random forest tuning"))
    _write_json(run.out / "report.json", report.to_dict())
    best = min((v, k) for k, v in report.rmse.items() if v is not None)
    print(f"target {a.target}: lowest CV RMSE {best[0]:.4g} ({LABELS[best[1][0]]}, {best[1][1]})")


def _profile_rows_csv(curve):
    lines = [f"{curve.parameter},profile_loglik,failed"]
    for v, ll, bad in curve.to_rows():
        lines.append(f"{v!r},{'' if not math.isfinite(ll) else repr(ll)},{int(bad)}")
    return "\n".join(lines) + "\n"


def _profile_svg(curve):
    cutoff = curve.max_loglik - 0.5 * float(chi2.ppf(curve.level, 1))
    panel = svg.Panel(f"Profile log-likelihood: {curve.parameter}", curve.parameter, "log-likelihood")
    panel.line(curve.grid, curve.profile_loglik)
    panel.line([curve.grid[0], curve.grid[-1]], [cutoff, cutoff], "gray", "4,3")
    lo = np.nanmin(curve.profile_loglik)
    panel.line([curve.mle, curve.mle], [lo, curve.max_loglik], "gray", "2,2")
    return svg.figure([panel])


def _run_evt(run):
    a = run.args
    if not 0.0 < a.level < 1.0:
        raise ValidationError("--level must lie in (0, 1)")
    series = _load_series(run, a.data)
    by_id = {s.sample_id: s for s in series}
    if a.series not in by_id:
        raise ValidationError(f"no series {a.series!r} in {a.data} (have {', '.join(by_id)})")
    chosen = ringdata.align_common_interval(series).get(a.series) if a.align else by_id[a.series]
    x = ringdata.stationary_transform(chosen, a.transform).values
    if a.block:
        x = block_maxima(x, a.block)
    fit = fit_gev(x)
    result = {
        "series": a.series,
        "first_year": chosen.first_year,
        "last_year": chosen.last_year,
        "transform": a.transform,
        "block": a.block,
        **fit.to_dict(a.level),
    }
    if a.profile:
        def one(name):
            return profile_loglik(x, fit, name, default_profile_grid(fit, name), a.level)

        with ThreadPoolExecutor(max_workers=a.threads) as pool:
            curves = list(pool.map(one, PARAM_NAMES))
        result["profile_ci"] = {
            c.parameter: {"level": c.level, "lower": c.ci[0], "upper": c.ci[1],
                          "max_loglik": float(np.nanmax(c.profile_loglik))}
            for c in curves
        }
        for c in curves:
            _write_text(run.out / f"profile_{c.parameter}.csv", _profile_rows_csv(c))
            svg.write(run.out / f"profile_{c.parameter}.svg", _profile_svg(c))
    if a.diagnostics:
        bundle = diagnostics(fit, x, a.level)
        _write_text(run.out / "diagnostics.csv", bundle_csv(bundle))
        svg.write(run.out / "diagnostics.svg", bundle_svg(bundle, a.series))
        result["warnings"] = sorted(set(result["warnings"]) | set(bundle.warnings))
    _write_json(run.out / "fit.json", result)
    p = fit.params
    print(f"{a.series}: mu={p.mu:.5g} sigma={p.sigma:.5g} gamma={p.gamma:.5g} ({fit.domain_class}), "
          f"loglik={fit.loglik:.6g}")


def main(argv=None):
    """Run one subcommand; returns the process exit status."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_INVALID
    run = _Run(args)
    started_at = _started_at()
    try:
        args.out.mkdir(parents=True, exist_ok=True)
        args.run(run)
        _write_json(args.out / "manifest.json", run.manifest(started_at))
    except OSError as exc:
        print(f"dendrostat: error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (DendroError, ValueError, KeyError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"dendrostat: error: {msg}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
