"""Command-line interface.

Exit codes: 0 success, 2 invalid input, 3 numerical failure (fit or blow-up).
Set ``AVGERR_LOG`` (e.g. ``INFO``, ``DEBUG``) to control log output on stderr.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io as _io
import logging
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import io
from .ar import PRESETS, ar_error_estimate, fit_ar_mle, simulate_ar, yule_walker_truth
from .errors import AvgErrError, FitError, InvalidInputError, NumericalError
from .experiments import benchmark, ks_truth, parse_grid, truth_table
from .ks import KsConfig, ks_run
from .multiscale import (FitConfig, model_asymptote, model_sq_error, estimate)
from .series import TimeSeries, multiscale_profile
from .transient import detect_transient, split_at_transient

__all__ = ["main", "build_parser", "EXIT_OK", "EXIT_INVALID", "EXIT_NUMERICAL"]

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 2, 3
REPORT_SCHEMA = "avgerr.report/1"
BENCHMARK_COLUMNS = ("N", "truth", "ms_mean", "ms_var", "mle_mean", "mle_var")

log = logging.getLogger("avgerr")

_GLOBAL_DEFAULTS = {"seed": 0, "jobs": 1, "out": None, "format": None}


# ---------------------------------------------------------------------------
# helpers


def _coerce(value, default):
    """Convert a config value to the type of the dataclass default."""
    if isinstance(default, bool):
        if isinstance(value, str):
            low = value.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {value!r}")
        return bool(value)
    if isinstance(default, int):
        f = float(value)
        if f != int(f):
            raise ValueError(f"not an integer: {value!r}")
        return int(f)
    if isinstance(default, float):
        return float(value)
    return value


def _dataclass_from(cls, cfg: dict, overrides: dict):
    """Build a config dataclass from a parsed document plus non-None CLI overrides."""
    fields = {f.name: f.default for f in dataclasses.fields(cls)}
    values = {}
    for key, raw in list(cfg.items()) + [(k, v) for k, v in overrides.items() if v is not None]:
        if key not in fields:
            continue
        try:
            values[key] = _coerce(raw, fields[key])
        except (TypeError, ValueError) as exc:
            raise InvalidInputError(f"config field {key}: {exc}") from None
    return cls(**values)


def _load_config(path) -> dict:
    return io.read_config(path) if path else {}


def _emit_text(text: str, out):
    if out:
        io.atomic_write_text(out, text)
    else:
        sys.stdout.write(text)
        sys.stdout.flush()


def _csv_text(header, rows, comments=()) -> str:
    buf = _io.StringIO()
    for line in comments:
        buf.write(f"# {line}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def _finite_or_none(v):
    return float(v) if v is not None and math.isfinite(v) else None


def _params_dict(p):
    return None if p is None else p.to_dict()


# ---------------------------------------------------------------------------
# generate


def _resolve_ar(args):
    cfg = _load_config(args.config)
    if args.preset is not None:
        cfg = {**cfg, "preset": args.preset}
    if "preset" not in cfg and "coeffs" not in cfg:
        cfg["preset"] = "paper-ar6"
    return cfg, io.ar_model_from_config(cfg)


def _cmd_generate(args) -> int:
    if args.kind == "ar":
        cfg, model = _resolve_ar(args)
        model.require_stationary()
        n = args.n if args.n is not None else int(float(cfg.get("n", 16384)))
        seed = args.seed if args.seed_given else int(float(cfg.get("seed", args.seed)))
        init = args.init if args.init is not None else cfg.get("init")
        start = None if init is None else np.full(model.order, float(init))
        series = simulate_ar(model, n, init=start, seed=seed, sampling_interval=args.dt)
        resolved = {"kind": "ar", "coeffs": list(model.coeffs),
                    "noise_variance": model.noise_variance, "mean": model.mean,
                    "order": model.order, "n": n, "seed": seed,
                    "init": None if init is None else float(init), "dt": args.dt}
    else:
        cfg = _load_config(args.config)
        overrides = {"n_steps": args.steps, "dt": args.dt_ks, "n_modes": args.modes,
                     "domain_length": args.length, "sample_stride": args.stride}
        if args.seed_given:
            overrides["seed"] = args.seed
        kcfg = _dataclass_from(KsConfig, cfg, overrides)
        series = ks_run(kcfg)
        resolved = {"kind": "ks", **dataclasses.asdict(kcfg)}
    if args.out:
        io.write_series(args.out, series)
        io.atomic_write_text(str(args.out) + ".config.json", io.dumps_json(resolved))
    else:
        sys.stdout.write(io.series_to_csv(series))
    sys.stderr.write(io.dumps_json(resolved))
    log.info("generated %d samples", len(series))
    return EXIT_OK


# ---------------------------------------------------------------------------
# detect-transient


def _cmd_detect(args) -> int:
    series = io.read_series(args.input)
    result = detect_transient(series)
    if args.curve_out:
        rows = zip(result.candidates.tolist(), result.objective_curve.tolist())
        io.atomic_write_text(args.curve_out, _csv_text(("k", "objective"), rows))
    doc = {"k_hat": result.k_hat, "n": result.n, "tail_length": result.n - result.k_hat,
           "degenerate": result.degenerate}
    if args.format == "json":
        _emit_text(io.dumps_json(doc), args.out)
    else:
        _emit_text(_csv_text(("k_hat", "n", "tail_length", "degenerate"),
                             [(result.k_hat, result.n, result.n - result.k_hat,
                               int(result.degenerate))]), args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# estimate


def _parse_baseline(text):
    if text is None:
        return None
    kind, sep, order = text.partition(":")
    if kind != "ar" or not sep:
        raise InvalidInputError(f"--baseline expects ar:<order>, got {text!r}")
    try:
        p = int(order)
    except ValueError:
        raise InvalidInputError(f"--baseline order must be an integer, got {order!r}") from None
    if p < 1:
        raise InvalidInputError("--baseline order must be positive")
    return p


def _flatten(doc, prefix=""):
    for key in sorted(doc):
        value = doc[key]
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            yield from _flatten(value, name + ".")
        elif isinstance(value, list):
            yield name, " ".join(repr(v) for v in value)
        else:
            yield name, value


def _cmd_estimate(args) -> int:
    order = _parse_baseline(args.baseline)
    fit_cfg = _dataclass_from(FitConfig, _load_config(args.config),
                              {"m": args.m, "n_starts": args.n_starts, "tol_eq": args.tol_eq,
                               "seed": args.seed if args.seed_given else None})
    timings = {}
    t0 = time.perf_counter()
    series = io.read_series(args.input)
    if args.skip_transient:
        k_hat, tail = None, series
    else:
        tr = detect_transient(series)
        k_hat, tail = tr.k_hat, split_at_transient(series, tr)
    timings["transient_s"] = time.perf_counter() - t0

    report = {"schema": REPORT_SCHEMA,
              "input": {"path": os.path.basename(str(args.input)),
                        "digest": io.file_digest(args.input), "n_samples": len(series),
                        "sampling_interval": series.sampling_interval},
              "transient": {"skipped": bool(args.skip_transient), "k_hat": k_hat},
              "n_used": len(tail),
              "config": dataclasses.asdict(fit_cfg)}
    status = EXIT_OK
    t1 = time.perf_counter()
    try:
        est = estimate(tail, config=fit_cfg)
        report["estimate"] = {
            "eps2_n": est.eps2_n, "eps_n": est.eps_n, "q_hat": est.q_hat,
            "params": _params_dict(est.params), "objective": est.objective_value,
            "equality_residual": est.equality_residual, "converged": est.converged,
            "n_starts_used": est.n_starts_used, "degenerate": est.degenerate,
            "acf_exceeds_one": est.acf_exceeds_one}
    except FitError as exc:
        status = EXIT_NUMERICAL
        p = exc.best_iterate
        block = {"converged": False, "error": str(exc), "params": _params_dict(p)}
        if p is not None:
            profile = multiscale_profile(tail)
            eps2 = model_sq_error(p, len(tail))
            block.update(eps2_n=_finite_or_none(eps2),
                         eps_n=_finite_or_none(math.sqrt(max(eps2, 0.0))),
                         q_hat=_finite_or_none(model_asymptote(p)),
                         equality_residual=None, msq_q=float(profile.msq[-1]))
        report["estimate"] = block
    timings["estimate_s"] = time.perf_counter() - t1

    if order is not None:
        t2 = time.perf_counter()
        model = fit_ar_mle(tail.samples, order)
        eps2 = ar_error_estimate(model, len(tail))
        report["baseline"] = {"kind": f"ar:{order}", "coeffs": list(model.coeffs),
                              "noise_variance": model.noise_variance, "mean": model.mean,
                              "log_likelihood": _finite_or_none(model.log_likelihood),
                              "converged": model.converged,
                              "eps2_n": eps2, "eps_n": math.sqrt(eps2)}
        timings["baseline_s"] = time.perf_counter() - t2
    if not args.no_timings:
        report["timings"] = timings

    if args.format == "csv":
        _emit_text(_csv_text(("field", "value"), _flatten(report)), args.out)
    else:
        _emit_text(io.dumps_json(report), args.out)
    return status


# ---------------------------------------------------------------------------
# benchmark


def _cmd_benchmark(args) -> int:
    grid = parse_grid(args.n_grid)
    fit_cfg = _dataclass_from(FitConfig, _load_config(args.config), {"m": args.m})
    ar_model = None
    truth = None
    ks_cfg = None
    if args.kind == "ar":
        _, ar_model = _resolve_ar(args)
        ar_model.require_stationary()
    elif args.kind == "ks":
        ks_cfg = _dataclass_from(KsConfig, _load_config(args.ks_config), {})
        truth = ks_truth(ks_cfg, max(grid), args.multiplier)
    out_dir = Path(args.out_dir)
    table_path = out_dir / f"benchmark_{args.kind}.csv"
    meta = {"kind": args.kind, "n_grid": grid, "ensemble": args.ensemble, "seed": args.seed,
            "baseline_order": args.baseline_order, "init": args.init,
            "fit_config": dataclasses.asdict(fit_cfg)}
    if ar_model is not None:
        meta["ar_model"] = {"coeffs": list(ar_model.coeffs),
                            "noise_variance": ar_model.noise_variance, "mean": ar_model.mean}
    if ks_cfg is not None:
        meta["ks_config"] = dataclasses.asdict(ks_cfg)
        meta["truth_multiplier"] = args.multiplier
    io.atomic_write_text(out_dir / f"benchmark_{args.kind}.json", io.dumps_json(meta))
    done = []

    def flush(row):
        done.append(row.as_tuple())
        # rewrite the whole table so a crash leaves every finished N on disk
        io.atomic_write_text(table_path, _csv_text(BENCHMARK_COLUMNS, done))
        log.info("benchmark N=%d done (%d multiscale failures)", row.n, row.ms_failures)

    kwargs = {"ar_model": ar_model} if ar_model is not None else {}
    benchmark(args.kind, grid, args.ensemble, seed=args.seed, fit_config=fit_cfg,
              baseline_order=args.baseline_order, ks_config=ks_cfg, truth=truth,
              init=args.init, jobs=args.jobs, on_row=flush, **kwargs)
    text = table_path.read_text()
    if args.out:
        io.atomic_write_text(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# truth


def _cmd_truth(args) -> int:
    if args.s_grid:
        s_values = parse_grid(args.s_grid)
    else:
        s_values = list(range(1, args.s_max + 1))
    s_max = max(s_values)
    if args.kind == "ar":
        _, model = _resolve_ar(args)
        model.require_stationary()
        stats = yule_walker_truth(model, s_max - 1)
        comments = [f"sigma={math.sqrt(stats.sigma2)!r}", f"mu={stats.mu!r}",
                    "source=Yule-Walker"]
    else:
        kcfg = _dataclass_from(KsConfig, _load_config(args.config),
                               {"seed": args.seed if args.seed_given else None})
        stats = ks_truth(kcfg, s_max, args.multiplier)
        comments = [f"sigma={math.sqrt(stats.sigma2)!r}", f"mu={stats.mu!r}",
                    f"source=KS run, multiplier={args.multiplier!r}"]
    rows = truth_table(stats, s_values)
    if args.format == "json":
        doc = {"sigma": math.sqrt(stats.sigma2), "mu": stats.mu,
               "rows": [{"s": s, "eps2": e2, "eps": e} for s, e2, e in rows]}
        _emit_text(io.dumps_json(doc), args.out)
    else:
        _emit_text(_csv_text(("s", "eps2", "eps"), rows, comments), args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _global_parent():
    parent = argparse.ArgumentParser(add_help=False)
    g = parent.add_argument_group("global options")
    g.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="random seed (default 0)")
    g.add_argument("--jobs", type=int, default=argparse.SUPPRESS,
                   help="worker processes for benchmarks (default 1)")
    g.add_argument("--out", default=argparse.SUPPRESS, help="output file (default stdout)")
    g.add_argument("--format", choices=("csv", "json"), default=argparse.SUPPRESS,
                   help="tabular output format")
    return parent


def _add_ar_source(p):
    p.add_argument("--preset", choices=sorted(PRESETS), default=None,
                   help="named AR model (default paper-ar6)")
    p.add_argument("--config", help="AR config file (JSON or key = value)")


def build_parser() -> argparse.ArgumentParser:
    parent = _global_parent()
    parser = argparse.ArgumentParser(
        prog="avgerr", parents=[parent],
        description="Estimate the averaging error of finite-time means of stationary series.")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", parents=[parent], help="simulate AR or KS series")
    gsub = gen.add_subparsers(dest="kind", required=True)
    gar = gsub.add_parser("ar", parents=[parent], help="AR(n) process")
    _add_ar_source(gar)
    gar.add_argument("--n", type=int, default=None, help="number of samples (default 16384)")
    gar.add_argument("--init", type=float, default=None,
                     help="value of all initial conditions (default 0)")
    gar.add_argument("--dt", type=float, default=1.0, help="sampling interval")
    gks = gsub.add_parser("ks", parents=[parent], help="Kuramoto-Sivashinsky energy")
    gks.add_argument("--config", help="KS config file")
    gks.add_argument("--steps", type=int, default=None)
    gks.add_argument("--dt", dest="dt_ks", type=float, default=None)
    gks.add_argument("--modes", type=int, default=None)
    gks.add_argument("--length", type=float, default=None)
    gks.add_argument("--stride", type=int, default=None)

    det = sub.add_parser("detect-transient", parents=[parent], help="find the initial transient")
    det.add_argument("input")
    det.add_argument("--curve-out", help="write the objective curve as CSV")

    est = sub.add_parser("estimate", parents=[parent], help="multiscale error estimate")
    est.add_argument("input")
    est.add_argument("--m", type=int, default=None, help="number of modes (default 3)")
    est.add_argument("--n-starts", type=int, default=None)
    est.add_argument("--tol-eq", type=float, default=None)
    est.add_argument("--config", help="FitConfig file")
    est.add_argument("--skip-transient", action="store_true",
                     help="use the whole series without transient detection")
    est.add_argument("--baseline", help="also fit an MLE baseline, e.g. ar:3")
    est.add_argument("--no-timings", action="store_true", help="omit wall-clock timings")

    bench = sub.add_parser("benchmark", parents=[parent], help="ensemble study")
    bench.add_argument("kind", choices=("ar", "white", "ks"))
    _add_ar_source(bench)
    bench.add_argument("--n-grid", default="128..16384")
    bench.add_argument("--ensemble", type=int, default=30)
    bench.add_argument("--out-dir", default=".")
    bench.add_argument("--m", type=int, default=None)
    bench.add_argument("--baseline-order", type=int, default=3)
    bench.add_argument("--init", type=float, default=None)
    bench.add_argument("--ks-config", help="KS config file (kind ks)")
    bench.add_argument("--multiplier", type=float, default=100.0,
                       help="KS truth run length as a multiple of max N")

    tr = sub.add_parser("truth", parents=[parent], help="exact or long-run error curve")
    tr.add_argument("kind", choices=("ar", "ks"))
    tr.add_argument("--preset", choices=sorted(PRESETS), default=None)
    tr.add_argument("--config", help="AR or KS config file")
    tr.add_argument("--s-max", type=int, default=16384)
    tr.add_argument("--s-grid", help="block lengths, e.g. 1..16384 or 1,10,100")
    tr.add_argument("--multiplier", type=float, default=100.0)
    return parser


_COMMANDS = {"generate": _cmd_generate, "detect-transient": _cmd_detect,
             "estimate": _cmd_estimate, "benchmark": _cmd_benchmark, "truth": _cmd_truth}


def _setup_logging():
    level = os.environ.get("AVGERR_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    args.seed_given = hasattr(args, "seed")
    for key, value in _GLOBAL_DEFAULTS.items():
        if not hasattr(args, key):
            setattr(args, key, value)
    if args.jobs < 1:
        sys.stderr.write("avgerr: --jobs must be positive\n")
        return EXIT_INVALID
    try:
        return _COMMANDS[args.command](args)
    except (InvalidInputError, OSError) as exc:
        sys.stderr.write(f"avgerr: error: {exc}\n")
        return EXIT_INVALID
    except NumericalError as exc:
        sys.stderr.write(f"avgerr: numerical failure: {exc}\n")
        return EXIT_NUMERICAL
    except AvgErrError as exc:
        sys.stderr.write(f"avgerr: error: {exc}\n")
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
