"""Autoregressive processes: simulation, exact statistics and a Gaussian MLE fit.

The exact statistics serve as the truth model for AR experiments. The MLE fit
is the model-based baseline the multiscale estimator is compared against.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import numpy.typing as npt
from scipy import linalg, optimize, signal

from .errors import InvalidInputError, NumericalError
from .rng import make_rng
from .series import ExactStatistics, TimeSeries, as_series, exact_sq_averaging_error

__all__ = [
    "ArModel",
    "PAPER_AR6",
    "WHITE_NOISE",
    "PRESETS",
    "ar_recursion",
    "simulate_ar",
    "ar_autocovariance",
    "yule_walker_truth",
    "levinson_durbin",
    "pacf_to_coeffs",
    "ar_log_likelihood",
    "fit_ar_mle",
    "ar_error_estimate",
    "ar_long_run_variance",
]

log = logging.getLogger(__name__)

# |kappa| <= tanh(9) keeps every fitted model strictly stationary
_Z_BOUND = 9.0


@dataclass(frozen=True)
class ArModel:
    """AR(n) process ``x_i - mean = sum_k coeffs[k-1] (x_{i-k} - mean) + eps_i``.

    ``eps_i`` is Gaussian with variance ``noise_variance``. Fitted models also
    carry their log-likelihood and a convergence flag.
    """

    coeffs: tuple
    noise_variance: float
    mean: float = 0.0
    converged: bool = True
    log_likelihood: Optional[float] = None

    def __post_init__(self):
        coeffs = tuple(float(c) for c in np.atleast_1d(np.asarray(self.coeffs, dtype=float)))
        if not all(math.isfinite(c) for c in coeffs):
            raise InvalidInputError("AR coefficients must be finite")
        if not (self.noise_variance > 0 and math.isfinite(self.noise_variance)):
            raise InvalidInputError("noise_variance must be positive")
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "noise_variance", float(self.noise_variance))
        object.__setattr__(self, "mean", float(self.mean))

    @property
    def order(self) -> int:
        return len(self.coeffs)

    def poles(self) -> npt.NDArray[np.complex128]:
        """Roots of ``z^n - a_1 z^{n-1} - ... - a_n``."""
        return np.roots(np.r_[1.0, -np.asarray(self.coeffs)])

    @property
    def is_stationary(self) -> bool:
        poles = self.poles()
        return bool(poles.size == 0 or np.max(np.abs(poles)) < 1.0)

    def require_stationary(self):
        if not self.is_stationary:
            radius = float(np.max(np.abs(self.poles())))
            raise InvalidInputError(
                f"AR model is not stationary (largest pole modulus {radius:.6g} >= 1)")


PAPER_AR6 = ArModel(coeffs=(3.1378, -3.9789, 2.6788, -1.0401, 0.2139, -0.0133),
                    noise_variance=0.1)
WHITE_NOISE = ArModel(coeffs=(0.0,), noise_variance=1.0)
PRESETS = {"paper-ar6": PAPER_AR6, "white-noise": WHITE_NOISE}


def ar_recursion(coeffs, innovations, init, mean: float = 0.0) -> npt.NDArray[np.float64]:
    """Run the AR difference equation on a given innovation sequence.

    ``init`` holds the ``n`` values preceding the output, oldest first. No
    stationarity check is made here.
    """
    a = np.asarray(coeffs, dtype=np.float64)
    eps = np.asarray(innovations, dtype=np.float64)
    init = np.asarray(init, dtype=np.float64).ravel()
    if init.size != a.size:
        raise InvalidInputError(f"init must have {a.size} values, got {init.size}")
    den = np.r_[1.0, -a]
    zi = signal.lfiltic([1.0], den, y=(init - mean)[::-1])
    out, _ = signal.lfilter([1.0], den, eps, zi=zi)
    return out + mean


def simulate_ar(model: ArModel, n_samples: int, init: Optional[Sequence[float]] = None,
                seed=0, sampling_interval: float = 1.0) -> TimeSeries:
    """Simulate ``n_samples`` values of ``model`` after the initial values ``init``.

    ``init`` defaults to all zeros. Innovations are drawn from
    :func:`avgerr.rng.make_rng` so a given seed always reproduces the same series.
    """
    model.require_stationary()
    n_samples = int(n_samples)
    if n_samples < 1:
        raise InvalidInputError("n_samples must be positive")
    if init is None:
        init = np.zeros(model.order)
    rng = make_rng(seed)
    eps = rng.standard_normal(n_samples) * math.sqrt(model.noise_variance)
    x = ar_recursion(model.coeffs, eps, init, model.mean)
    return TimeSeries(x, sampling_interval, label=f"AR({model.order})")


def ar_autocovariance(coeffs, noise_variance: float, k_max: int) -> npt.NDArray[np.float64]:
    """Autocovariance ``gamma(0..k_max)`` from the Yule-Walker system.

    The first ``n + 1`` values solve the linear system obtained from the
    variance equation and the lag equations ``h = 1..n`` (using
    ``gamma(-k) = gamma(k)``); the rest follow from the lag recursion.
    """
    a = np.asarray(coeffs, dtype=np.float64)
    n = a.size
    mat = np.eye(n + 1)
    mat[0, 1:] -= a
    for h in range(1, n + 1):
        for j in range(1, n + 1):
            mat[h, abs(h - j)] -= a[j - 1]
    rhs = np.zeros(n + 1)
    rhs[0] = noise_variance
    try:
        head = linalg.solve(mat, rhs)
    except linalg.LinAlgError as exc:
        raise NumericalError(f"Yule-Walker system is singular: {exc}") from exc
    if not np.all(np.isfinite(head)) or head[0] <= 0:
        raise NumericalError("Yule-Walker system has no valid solution")
    k_max = int(k_max)
    if k_max <= n:
        return head[: k_max + 1].copy()
    den = np.r_[1.0, -a]
    zi = signal.lfiltic([1.0], den, y=head[n:0:-1])
    rest, _ = signal.lfilter([1.0], den, np.zeros(k_max - n), zi=zi)
    return np.r_[head, rest]


def yule_walker_truth(model: ArModel, k_max: int) -> ExactStatistics:
    """Exact mean, variance and autocorrelation (lags ``0..k_max``) of a stationary AR model."""
    model.require_stationary()
    if int(k_max) < 0:
        raise InvalidInputError("k_max must be nonnegative")
    gamma = ar_autocovariance(model.coeffs, model.noise_variance, k_max)
    rho = gamma / gamma[0]
    rho[0] = 1.0
    return ExactStatistics(mu=model.mean, sigma2=float(gamma[0]), rho=rho)


def ar_long_run_variance(model: ArModel) -> float:
    """Limit of ``s * eps_s^2``: ``noise_variance / (1 - sum(coeffs))**2``."""
    model.require_stationary()
    return model.noise_variance / (1.0 - math.fsum(model.coeffs)) ** 2


def ar_error_estimate(model: ArModel, s: int) -> float:
    """Expected squared averaging error over ``s`` samples implied by ``model``."""
    s = int(s)
    if s < 1:
        raise InvalidInputError("s must be a positive integer")
    return exact_sq_averaging_error(yule_walker_truth(model, s - 1), s)


def levinson_durbin(gamma, order: int):
    """Levinson-Durbin recursion on autocovariances ``gamma(0..order)``.

    Returns
    -------
    coeffs : ndarray
        AR coefficients of the order-``order`` predictor.
    pacf : ndarray
        Partial autocorrelations ``kappa_1..kappa_order``.
    noise_variance : float
        One-step prediction error variance.
    """
    gamma = np.asarray(gamma, dtype=np.float64)
    phi = np.zeros(0)
    pacf = np.zeros(order)
    v = gamma[0]
    for k in range(1, order + 1):
        kappa = (gamma[k] - np.dot(phi, gamma[k - 1:0:-1])) / v
        phi = np.r_[phi - kappa * phi[::-1], kappa]
        pacf[k - 1] = kappa
        v *= 1.0 - kappa * kappa
    return phi, pacf, v


def _step_up(pacf):
    # predictor coefficients of every order 1..p from partial autocorrelations
    phis = []
    phi = np.zeros(0)
    for kappa in pacf:
        phi = np.r_[phi - kappa * phi[::-1], kappa]
        phis.append(phi)
    return phis


def pacf_to_coeffs(pacf) -> npt.NDArray[np.float64]:
    """AR coefficients from partial autocorrelations (all ``|kappa| < 1`` gives a stationary model)."""
    pacf = np.asarray(pacf, dtype=np.float64)
    if pacf.size == 0:
        return pacf.copy()
    return _step_up(pacf)[-1]


def _coeffs_to_pacf(coeffs):
    # step-down recursion; |kappa| >= 1 signals a non-stationary model
    phi = np.asarray(coeffs, dtype=np.float64).copy()
    p = phi.size
    pacf = np.zeros(p)
    for k in range(p, 0, -1):
        kappa = phi[-1]
        pacf[k - 1] = kappa
        if abs(kappa) >= 1.0:
            raise InvalidInputError("coefficients are outside the stationarity region")
        phi = (phi[:-1] + kappa * phi[-2::-1]) / (1.0 - kappa * kappa)
    return pacf


def _innovations(x, pacf):
    # exact one-step innovations e_t and their variance ratios r_t = v_t / noise_variance
    p = pacf.size
    n = x.size
    r = np.ones(n)
    e = np.empty(n)
    if p == 0:
        return x.copy(), r
    phis = _step_up(pacf)
    r0 = 1.0 / np.prod(1.0 - pacf * pacf)
    e[0] = x[0]
    r[0] = r0
    for t in range(1, min(p, n)):
        phi_t = phis[t - 1]
        e[t] = x[t] - np.dot(phi_t, x[t - 1::-1][:t])
        r[t] = r[t - 1] * (1.0 - pacf[t - 1] ** 2)
    if n > p:
        full = signal.lfilter(np.r_[1.0, -phis[-1]], [1.0], x)
        e[p:] = full[p:]
    return e, r


def ar_log_likelihood(model: ArModel, x) -> float:
    """Exact Gaussian log-likelihood of ``x`` under a stationary ``model``."""
    arr = as_series(x).samples - model.mean
    pacf = _coeffs_to_pacf(model.coeffs) if model.order else np.zeros(0)
    return _log_likelihood(arr, pacf, model.noise_variance)


def _log_likelihood(d, pacf, noise_variance):
    e, r = _innovations(d, pacf)
    v = noise_variance * r
    return float(-0.5 * math.fsum(np.log(2.0 * np.pi * v) + e * e / v))


def _concentrated_nll(z, x):
    pacf = np.tanh(z)
    e, r = _innovations(x, pacf)
    n = x.size
    s = math.fsum(e * e / r)
    sigma2 = s / n
    if not sigma2 > 0:
        return np.inf
    return 0.5 * n * (math.log(2.0 * np.pi * sigma2) + 1.0) + 0.5 * math.fsum(np.log(r))


def fit_ar_mle(x, p: int, max_iter: int = 200) -> ArModel:
    """Gaussian maximum-likelihood AR(p) fit.

    The sample mean is removed, the Yule-Walker estimate (from the biased
    sample autocovariance) seeds the search, and the exact likelihood is
    maximised over partial autocorrelations ``kappa = tanh(z)`` so every iterate
    is stationary. The innovation variance is profiled out. If the optimiser
    fails to improve on the Yule-Walker start, that start is returned with
    ``converged=False``.
    """
    series = as_series(x)
    arr = series.samples
    n = arr.size
    p = int(p)
    if p < 1:
        raise InvalidInputError("AR order must be positive")
    if n <= 10 * p:
        raise InvalidInputError(f"need N > 10 p samples for an AR({p}) fit, got N={n}")
    mean = math.fsum(arr) / n
    d = arr - mean
    gamma = np.array([np.dot(d[k:], d[: n - k]) for k in range(p + 1)]) / n
    if gamma[0] <= 0:
        raise InvalidInputError("cannot fit an AR model to a constant series")
    _, pacf0, _ = levinson_durbin(gamma, p)
    pacf0 = np.clip(pacf0, -1 + 1e-12, 1 - 1e-12)
    z0 = np.clip(np.arctanh(pacf0), -_Z_BOUND, _Z_BOUND)
    nll0 = _concentrated_nll(z0, d)

    res = optimize.minimize(_concentrated_nll, z0, args=(d,), method="L-BFGS-B",
                            bounds=[(-_Z_BOUND, _Z_BOUND)] * p,
                            options={"maxiter": max_iter})
    converged = bool(res.success) and res.fun <= nll0
    z = res.x if res.fun <= nll0 else z0
    if not converged:
        log.warning("AR(%d) likelihood maximisation did not converge: %s", p, res.message)
    pacf = np.tanh(z)
    coeffs = pacf_to_coeffs(pacf)
    e, r = _innovations(d, pacf)
    sigma2 = math.fsum(e * e / r) / n
    return ArModel(coeffs=tuple(coeffs), noise_variance=sigma2, mean=mean,
                   converged=converged, log_likelihood=_log_likelihood(d, pacf, sigma2))
