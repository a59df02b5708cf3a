"""Core time-series statistics.

Sample means, non-overlapping block means, the multiscale profile of
mean-squared block means, the biased empirical autocorrelation, and the exact
expected squared averaging error of a process with known statistics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numba
import numpy as np
import numpy.typing as npt

from .errors import DegenerateVarianceError, InvalidInputError

__all__ = [
    "TimeSeries",
    "MultiscaleProfile",
    "ExactStatistics",
    "as_series",
    "sample_mean",
    "shifted_sample_means",
    "mean_squared_shifted_sample_mean",
    "multiscale_profile",
    "exact_sq_averaging_error",
    "exact_sq_error_curve",
    "empirical_autocorrelation",
    "iid_error",
    "integral_timescale_error",
    "suggested_sampling_interval",
]


@dataclass(frozen=True)
class TimeSeries:
    """Uniformly sampled scalar signal.

    Parameters
    ----------
    samples : array_like
        Sample values, in time order. Must be finite.
    sampling_interval : float
        Time between consecutive samples, > 0.
    label : str, optional
        Free-text description carried into files and reports.
    """

    samples: npt.NDArray[np.float64]
    sampling_interval: float = 1.0
    label: Optional[str] = None

    def __post_init__(self):
        arr = np.array(self.samples, dtype=np.float64).ravel()
        if not np.all(np.isfinite(arr)):
            raise InvalidInputError("time series contains NaN or Inf samples")
        dt = float(self.sampling_interval)
        if not (dt > 0 and math.isfinite(dt)):
            raise InvalidInputError(f"sampling_interval must be positive, got {dt}")
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)
        object.__setattr__(self, "sampling_interval", dt)

    def __len__(self) -> int:
        return self.samples.shape[0]

    def tail(self, start: int) -> "TimeSeries":
        """Samples from 0-based index ``start`` to the end, same interval and label."""
        return TimeSeries(self.samples[start:], self.sampling_interval, self.label)


def as_series(x, sampling_interval: float = 1.0) -> TimeSeries:
    """Wrap an array-like as a :class:`TimeSeries` (no-op for TimeSeries)."""
    if isinstance(x, TimeSeries):
        return x
    return TimeSeries(np.asarray(x, dtype=np.float64), sampling_interval)


@dataclass(frozen=True)
class MultiscaleProfile:
    """Mean-squared block means for block lengths s = 1..q.

    ``msq[s-1]`` holds the value for block length ``s`` and ``block_counts[s-1]``
    the number of full blocks ``N // s`` that went into it. ``sample_mean`` and
    ``sample_var`` are optional summaries of the raw data, used only to seed
    the fit; profiles built synthetically may leave them as None.
    """

    n: int
    q: int
    msq: npt.NDArray[np.float64]
    block_counts: npt.NDArray[np.int64]
    sample_mean: Optional[float] = None
    sample_var: Optional[float] = None

    def __post_init__(self):
        msq = np.asarray(self.msq, dtype=np.float64)
        counts = np.asarray(self.block_counts, dtype=np.int64)
        if msq.shape != (self.q,) or counts.shape != (self.q,):
            raise InvalidInputError("msq and block_counts must have exactly q entries")
        if np.any(msq < 0) or not np.all(np.isfinite(msq)):
            raise InvalidInputError("msq entries must be finite and nonnegative")
        object.__setattr__(self, "msq", msq)
        object.__setattr__(self, "block_counts", counts)

    @property
    def scales(self) -> npt.NDArray[np.int64]:
        return np.arange(1, self.q + 1)


@dataclass(frozen=True)
class ExactStatistics:
    """Mean, variance and autocorrelation sequence rho[0], rho[1], ... of a process."""

    mu: float
    sigma2: float
    rho: npt.NDArray[np.float64] = field(repr=False)

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=np.float64).ravel()
        if rho.size == 0 or abs(rho[0] - 1.0) > 1e-12:
            raise InvalidInputError("rho[0] must equal 1")
        if np.any(np.abs(rho) > 1.0 + 1e-9):
            raise InvalidInputError("autocorrelations must satisfy |rho(k)| <= 1")
        if not self.sigma2 >= 0:
            raise InvalidInputError("sigma2 must be nonnegative")
        object.__setattr__(self, "rho", rho)

    @property
    def k_max(self) -> int:
        return self.rho.size - 1


@numba.njit(cache=True)
def _kahan_cumsum(x):
    # out[0] = 0, out[i] = x[0] + ... + x[i-1]
    out = np.empty(x.shape[0] + 1)
    out[0] = 0.0
    total = 0.0
    comp = 0.0
    for i in range(x.shape[0]):
        y = x[i] - comp
        t = total + y
        comp = (t - total) - y
        total = t
        out[i + 1] = total
    return out


def _samples(x) -> npt.NDArray[np.float64]:
    return as_series(x).samples


def sample_mean(x) -> float:
    """Arithmetic mean of the samples, computed with exact (fsum) accumulation."""
    arr = _samples(x)
    if arr.size == 0:
        raise InvalidInputError("sample_mean of an empty series")
    return math.fsum(arr) / arr.size


def _check_block_length(n: int, s: int):
    if not (1 <= s <= n):
        raise InvalidInputError(f"block length s must satisfy 1 <= s <= N={n}, got {s}")


def _block_means(arr, prefix, shift, s):
    p = arr.size // s
    edges = prefix[: p * s + 1 : s]
    return shift + np.diff(edges) / s


def _shifted_prefix(arr):
    shift = math.fsum(arr) / arr.size
    return shift, _kahan_cumsum(arr - shift)


def shifted_sample_means(x, s: int) -> npt.NDArray[np.float64]:
    """Means of the ``N // s`` consecutive non-overlapping blocks of length ``s``.

    The trailing ``N mod s`` samples are discarded.
    """
    arr = _samples(x)
    s = int(s)
    _check_block_length(arr.size, s)
    if s == 1:
        return arr.copy()
    shift, prefix = _shifted_prefix(arr)
    return _block_means(arr, prefix, shift, s)


def mean_squared_shifted_sample_mean(x, s: int) -> float:
    """Average of the squared block means for block length ``s``."""
    means = shifted_sample_means(x, s)
    return float(np.mean(means * means))


def multiscale_profile(x) -> MultiscaleProfile:
    """Mean-squared block means for every block length ``s = 1..floor(sqrt(N))``.

    One shifted, compensated prefix-sum array is built once; each block mean is
    then a difference of two entries, so the whole profile costs O(N log N).
    """
    arr = _samples(x)
    n = arr.size
    if n < 4:
        raise InvalidInputError(f"multiscale profile needs N >= 4 samples, got {n}")
    q = math.isqrt(n)
    shift, prefix = _shifted_prefix(arr)
    msq = np.empty(q)
    msq[0] = float(np.mean(arr * arr))
    for s in range(2, q + 1):
        means = _block_means(arr, prefix, shift, s)
        msq[s - 1] = np.mean(means * means)
    counts = n // np.arange(1, q + 1)
    var = float(np.mean((arr - shift) ** 2))
    return MultiscaleProfile(n=n, q=q, msq=msq, block_counts=counts,
                             sample_mean=shift, sample_var=var)


def _correlation_sum(rho, s):
    # sum_{k=1}^{s-1} (s - k) rho(k), exactly rounded
    if s <= 1:
        return 0.0
    k = np.arange(1, s, dtype=np.float64)
    return math.fsum((s - k) * rho[1:s])


def exact_sq_averaging_error(stats: ExactStatistics, s: int) -> float:
    """Expected squared deviation of a length-``s`` sample mean from the true mean.

    ``sigma2 / s * (1 + 2 * sum_{k=1}^{s-1} (1 - k/s) * rho(k))``
    """
    s = int(s)
    if s < 1:
        raise InvalidInputError(f"s must be a positive integer, got {s}")
    if stats.k_max < s - 1:
        raise InvalidInputError(
            f"need rho(k) for k <= {s - 1}, statistics only reach k = {stats.k_max}")
    inner = s + 2.0 * _correlation_sum(stats.rho, s)
    return stats.sigma2 * inner / (float(s) * s)


def exact_sq_error_curve(stats: ExactStatistics, s_values) -> npt.NDArray[np.float64]:
    """Vector version of :func:`exact_sq_averaging_error` over several block lengths."""
    return np.array([exact_sq_averaging_error(stats, int(s)) for s in s_values])


def empirical_autocorrelation(x, k_max: int) -> ExactStatistics:
    """Sample mean, variance and autocorrelation up to lag ``k_max``.

    Uses the biased normalisation ``gamma(k) = 1/N * sum (x_i - xbar)(x_{i+k} - xbar)``,
    which keeps the estimate positive semidefinite.
    """
    arr = _samples(x)
    n = arr.size
    k_max = int(k_max)
    if k_max < 0 or k_max >= n:
        raise InvalidInputError(f"k_max must satisfy 0 <= k_max < N={n}, got {k_max}")
    mu = math.fsum(arr) / n
    d = arr - mu
    gamma = np.empty(k_max + 1)
    gamma[0] = np.dot(d, d)
    for k in range(1, k_max + 1):
        gamma[k] = np.dot(d[k:], d[:-k])
    gamma /= n
    if gamma[0] <= 0.0:
        raise DegenerateVarianceError("series has zero variance; autocorrelation undefined")
    rho = gamma / gamma[0]
    rho[0] = 1.0
    return ExactStatistics(mu=mu, sigma2=float(gamma[0]), rho=rho)


def iid_error(sigma: float, n: int) -> float:
    """Averaging error ``sigma / sqrt(N)`` of N independent samples."""
    return sigma * math.sqrt(1.0 / n)


def integral_timescale_error(sigma: float, tau_f: float, t_total: float) -> float:
    """Continuous-sampling error model ``sigma * sqrt(2 tau_f / T)``."""
    return sigma * math.sqrt(2.0 * tau_f / t_total)


def suggested_sampling_interval(tau_f: float, c: float = 10.0) -> float:
    """Sampling interval ``2 tau_f / c`` below which extra samples add little information."""
    return 2.0 * tau_f / c
