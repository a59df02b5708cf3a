"""Truth curves and ensemble benchmarks.

Seeding rule for ensembles: member ``j`` at grid index ``i`` draws from
``SeedSequence(master_seed, spawn_key=(i, j))``. Results therefore do not
depend on how members are scheduled across worker processes.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .ar import (PAPER_AR6, WHITE_NOISE, ArModel, ar_error_estimate, fit_ar_mle, simulate_ar,
                 yule_walker_truth)
from .errors import AvgErrError, InvalidInputError
from .ks import KsConfig, ks_run
from .multiscale import FitConfig, estimate
from .series import (ExactStatistics, TimeSeries, empirical_autocorrelation,
                     exact_sq_averaging_error)
from .transient import detect_transient, split_at_transient

__all__ = ["parse_grid", "member_seed", "ar_truth", "ks_truth", "truth_table",
           "BenchmarkRow", "benchmark"]

log = logging.getLogger(__name__)


def parse_grid(text: str) -> list[int]:
    """``"128..16384"`` (doubling), ``"a..b:step"`` (arithmetic) or ``"1,2,5"``."""
    text = text.strip()
    try:
        if ".." in text:
            lo, _, hi = text.partition("..")
            hi, _, step = hi.partition(":")
            lo, hi = int(lo), int(hi)
            if lo < 1 or hi < lo:
                raise ValueError
            if step:
                return list(range(lo, hi + 1, int(step)))
            out = []
            v = lo
            while v <= hi:
                out.append(v)
                v *= 2
            return out
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise InvalidInputError(f"cannot parse grid {text!r}") from None
    if not values or min(values) < 1:
        raise InvalidInputError(f"grid {text!r} must list positive integers")
    return values


def member_seed(master: int, grid_index: int, member: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(int(master), spawn_key=(int(grid_index), int(member)))


def ar_truth(model: ArModel, s_max: int) -> ExactStatistics:
    return yule_walker_truth(model, max(int(s_max) - 1, 0))


def ks_truth(cfg: KsConfig, s_max: int, multiplier: float = 100.0) -> ExactStatistics:
    """Empirical statistics from a KS run ``multiplier`` times longer than ``s_max``.

    The run's own initial transient is detected and removed first.
    """
    n_keep = int(math.ceil(multiplier * s_max))
    # transient lasts a few hundred steps for the default configuration
    burn = max(2000, cfg.n_steps // 10)
    long_cfg = replace(cfg, n_steps=(n_keep + burn) * cfg.sample_stride)
    series = ks_run(long_cfg)
    probe = TimeSeries(series.samples[: 2 * burn])
    k_hat = detect_transient(probe).k_hat
    tail = series.samples[k_hat:k_hat + n_keep]
    return empirical_autocorrelation(tail, int(s_max) - 1)


def truth_table(stats: ExactStatistics, s_values: Sequence[int]) -> list[tuple[int, float, float]]:
    rows = []
    for s in s_values:
        eps2 = exact_sq_averaging_error(stats, int(s))
        rows.append((int(s), eps2, math.sqrt(eps2)))
    return rows


@dataclass(frozen=True)
class BenchmarkRow:
    n: int
    truth: float
    ms_mean: float
    ms_var: float
    mle_mean: float
    mle_var: float
    ms_failures: int = 0

    def as_tuple(self):
        return (self.n, self.truth, self.ms_mean, self.ms_var, self.mle_mean, self.mle_var)


def _member_series(kind, n, seed, ar_model, ks_cfg, init):
    if kind in ("ar", "white"):
        model = ar_model if kind == "ar" else WHITE_NOISE
        start = None if init is None else np.full(model.order, float(init))
        return simulate_ar(model, n, init=start, seed=seed)
    # KS member: own seed, transient removed, first n stationary samples
    int_seed = int(seed.generate_state(1)[0])
    steps = n + max(2000, n // 4)
    series = ks_run(replace(ks_cfg, n_steps=steps * ks_cfg.sample_stride, seed=int_seed))
    tail = split_at_transient(series, detect_transient(series))
    if len(tail) < n:
        raise InvalidInputError("KS run too short after transient removal")
    return TimeSeries(tail.samples[:n], tail.sampling_interval, tail.label)


def _run_member(args):
    kind, n, seed, fit_cfg, order, ar_model, ks_cfg, init = args
    x = _member_series(kind, n, seed, ar_model, ks_cfg, init)
    try:
        ms = estimate(x, config=fit_cfg).eps_n
    except AvgErrError as exc:
        log.warning("multiscale fit failed for N=%d: %s", n, exc)
        ms = math.nan
    mle = math.sqrt(ar_error_estimate(fit_ar_mle(x, order), n)) if order else math.nan
    return ms, mle


def _moments(values):
    arr = np.asarray([v for v in values if math.isfinite(v)])
    if arr.size == 0:
        return math.nan, math.nan
    if arr.size == 1:
        return float(arr[0]), 0.0
    return float(arr.mean()), float(arr.var(ddof=1))


def benchmark(kind: str, n_grid: Sequence[int], ensemble: int, seed: int = 0,
              fit_config: FitConfig = FitConfig(), baseline_order: int = 3,
              ar_model: ArModel = PAPER_AR6, ks_config: Optional[KsConfig] = None,
              truth: Optional[ExactStatistics] = None, init: Optional[float] = None,
              jobs: int = 1,
              on_row: Optional[Callable[[BenchmarkRow], None]] = None) -> list[BenchmarkRow]:
    """Ensemble mean and variance of estimated ``eps_N`` next to the truth, for each N.

    ``kind`` is ``"ar"`` (``ar_model``, zero initial values unless ``init`` is
    given, no transient removal), ``"white"`` (unit white noise) or ``"ks"``
    (independent KS runs with their transients removed; ``truth`` must then
    be supplied, e.g. from :func:`ks_truth`). ``on_row`` is called as each N
    completes.
    """
    if kind not in ("ar", "white", "ks"):
        raise InvalidInputError(f"unknown benchmark kind {kind!r}")
    if ensemble < 1:
        raise InvalidInputError("ensemble size must be positive")
    n_grid = [int(n) for n in n_grid]
    ks_cfg = ks_config or KsConfig()
    if truth is None:
        if kind == "ks":
            raise InvalidInputError("KS benchmark needs truth statistics")
        truth = ar_truth(ar_model if kind == "ar" else WHITE_NOISE, max(n_grid))
    rows = []
    pool = ProcessPoolExecutor(max_workers=jobs) if jobs > 1 else None
    try:
        for gi, n in enumerate(n_grid):
            tasks = [(kind, n, member_seed(seed, gi, j), replace(fit_config, seed=j),
                      baseline_order, ar_model, ks_cfg, init) for j in range(ensemble)]
            results = list(pool.map(_run_member, tasks)) if pool else list(map(_run_member, tasks))
            ms_mean, ms_var = _moments([r[0] for r in results])
            mle_mean, mle_var = _moments([r[1] for r in results])
            row = BenchmarkRow(n=n, truth=math.sqrt(exact_sq_averaging_error(truth, n)),
                               ms_mean=ms_mean, ms_var=ms_var, mle_mean=mle_mean,
                               mle_var=mle_var,
                               ms_failures=sum(not math.isfinite(r[0]) for r in results))
            rows.append(row)
            if on_row is not None:
                on_row(row)
    finally:
        if pool is not None:
            pool.shutdown()
    return rows
