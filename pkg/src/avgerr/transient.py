"""Initial-transient detection by minimising the tail's squared-error proxy.

For each candidate split ``k`` in ``1..N//2`` the objective is::

    J(k) = sum_{i=k+1}^{N} (X_i - mean(X_{k+1..N}))**2 / (N - k - 1)**2

and the detected transient is the smallest minimiser. All tails are swept in a
single backward Welford pass, so the whole curve costs O(N).
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np
import numpy.typing as npt

from .errors import InvalidInputError
from .series import TimeSeries, as_series

__all__ = ["TransientResult", "detect_transient", "split_at_transient"]


@dataclass(frozen=True)
class TransientResult:
    """Outcome of :func:`detect_transient`.

    ``objective_curve[j]`` is the objective for ``k = j + 1``. ``k_hat`` is the
    number of leading samples to discard; ``stationary_start_index`` is the
    1-based index of the first retained sample.
    """

    k_hat: int
    objective_curve: npt.NDArray[np.float64]
    n: int
    degenerate: bool = False

    @property
    def stationary_start_index(self) -> int:
        return self.k_hat + 1

    @property
    def candidates(self) -> npt.NDArray[np.int64]:
        return np.arange(1, self.objective_curve.size + 1)


@numba.njit(cache=True)
def _tail_sum_squares(x, k_last):
    # ss[k] = sum_{i>=k} (x_i - mean(x[k:]))**2 for k = 0..k_last (0-based tails)
    n = x.shape[0]
    ss = np.zeros(k_last + 1)
    mean = 0.0
    m2 = 0.0
    count = 0
    for i in range(n - 1, -1, -1):
        count += 1
        delta = x[i] - mean
        mean += delta / count
        m2 += delta * (x[i] - mean)
        if i <= k_last:
            ss[i] = m2 if m2 > 0.0 else 0.0
    return ss


def detect_transient(x) -> TransientResult:
    """Locate the initial transient of ``x``.

    Raises
    ------
    InvalidInputError
        If the series has fewer than 4 samples.
    """
    series = as_series(x)
    arr = series.samples
    n = arr.size
    if n < 4:
        raise InvalidInputError(f"transient detection needs N >= 4 samples, got {n}")
    k_max = n // 2
    ss = _tail_sum_squares(arr, k_max)
    k = np.arange(1, k_max + 1)
    curve = ss[1:] / (n - k - 1.0) ** 2
    j = int(np.argmin(curve))
    return TransientResult(k_hat=j + 1, objective_curve=curve, n=n,
                           degenerate=bool(curve[j] == 0.0))


def split_at_transient(x, result: TransientResult) -> TimeSeries:
    """Drop the first ``k_hat`` samples, keeping sampling interval and label."""
    series = as_series(x)
    if len(series) != result.n:
        raise InvalidInputError(
            f"transient result was computed for N={result.n}, series has N={len(series)}")
    return series.tail(result.k_hat)

