"""Multiscale estimate of the expected squared averaging error.

The autocorrelation is modelled as a sum of decaying exponentials
``rho(k) = sum_i A_i tau_i**k`` with ``sum_i A_i = 1`` and ``0 <= tau_i < 1``.
Together with a model mean ``mu`` and standard deviation ``sigma`` this fixes
the expected squared block mean at every block length ``s``::

    E[y_s^2] = mu^2 + sigma^2 / s * (1 + 2 * sum_{k=1}^{s-1} (1 - k/s) rho(k))

The parameters are tuned so this curve matches the measured mean-squared block
means for ``s = 1..floor(sqrt(N))`` in the least-squares sense, with an exact
match imposed at the largest block length. The fitted model is then
evaluated at ``s = N``.

The constrained problem is solved by an augmented-Lagrangian loop (for the
equality at the largest block length) around L-BFGS-B, which handles the
bounds on the rates, sigma and mu. The amplitude-sum constraint is built into
the parametrisation. By default the amplitudes are also kept nonnegative:
with free signs, nearly cancelling pairs of slow modes fit the profile
equally well but extrapolate to wildly wrong (even negative) errors at
``s = N``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import numpy.typing as npt
from scipy import optimize

from .errors import FitError, InvalidInputError
from .rng import make_rng
from .series import MultiscaleProfile, as_series, multiscale_profile

__all__ = [
    "AcfModelParams",
    "FitConfig",
    "FitResult",
    "UqEstimate",
    "model_acf",
    "model_sq_error",
    "model_sq_error_curve",
    "model_asymptote",
    "residual_g",
    "objective_and_gradient",
    "profile_from_model",
    "fit_profile",
    "fit",
    "estimate",
]

log = logging.getLogger(__name__)

_DIRECT_SUM_LIMIT = 1 << 16
_CHUNK = 1 << 18


@dataclass(frozen=True)
class AcfModelParams:
    """Parameters of the multi-exponential autocorrelation model.

    Amplitudes may take either sign; only their sum is constrained.
    """

    amplitudes: npt.NDArray[np.float64]
    rates: npt.NDArray[np.float64]
    sigma_hat: float
    mu_hat: float

    def __post_init__(self):
        a = np.array(self.amplitudes, dtype=np.float64).ravel()
        t = np.array(self.rates, dtype=np.float64).ravel()
        if a.shape != t.shape or a.size == 0:
            raise InvalidInputError("amplitudes and rates must be nonempty and equal length")
        object.__setattr__(self, "amplitudes", a)
        object.__setattr__(self, "rates", t)
        object.__setattr__(self, "sigma_hat", float(self.sigma_hat))
        object.__setattr__(self, "mu_hat", float(self.mu_hat))

    @property
    def m(self) -> int:
        return self.amplitudes.size

    def feasibility_violation(self) -> Optional[str]:
        """Describe the first violated domain constraint, or None if feasible."""
        vals = np.r_[self.amplitudes, self.rates, self.sigma_hat, self.mu_hat]
        if not np.all(np.isfinite(vals)):
            return "non-finite parameter"
        if np.any(self.rates < 0) or np.any(self.rates >= 1):
            return "rates must lie in [0, 1)"
        if abs(math.fsum(self.amplitudes) - 1.0) > 1e-10:
            return "amplitudes must sum to 1"
        if self.sigma_hat < 0 or self.mu_hat < 0:
            return "sigma_hat and mu_hat must be nonnegative"
        return None

    @property
    def is_feasible(self) -> bool:
        return self.feasibility_violation() is None

    def to_vector(self) -> npt.NDArray[np.float64]:
        """Pack as ``[A_1..A_m, tau_1..tau_m, sigma, mu]``."""
        return np.r_[self.amplitudes, self.rates, self.sigma_hat, self.mu_hat]

    @classmethod
    def from_vector(cls, v) -> "AcfModelParams":
        v = np.asarray(v, dtype=np.float64)
        m = (v.size - 2) // 2
        return cls(v[:m], v[m:2 * m], v[2 * m], v[2 * m + 1])

    def to_dict(self) -> dict:
        return {"m": self.m, "amplitudes": self.amplitudes.tolist(),
                "rates": self.rates.tolist(), "sigma_hat": self.sigma_hat,
                "mu_hat": self.mu_hat}


@dataclass(frozen=True)
class FitConfig:
    """Settings for the constrained multiscale fit.

    ``tol_eq`` is relative: the equality residual at the largest block length
    must satisfy ``|g_q| <= tol_eq * max(1, msq_q)``.
    """

    m: int = 3
    n_starts: int = 8
    tol_eq: float = 1e-8
    tau_ceiling_delta: float = 1e-6
    max_outer_iters: int = 50
    max_inner_iters: int = 500
    seed: int = 0
    nonnegative_amplitudes: bool = True

    def __post_init__(self):
        if not 1 <= self.m <= 8:
            raise InvalidInputError(f"number of modes m must be in 1..8, got {self.m}")
        if self.n_starts < 1:
            raise InvalidInputError("n_starts must be positive")
        if not 0 < self.tau_ceiling_delta < 1:
            raise InvalidInputError("tau_ceiling_delta must lie in (0, 1)")
        if not self.tol_eq > 0:
            raise InvalidInputError("tol_eq must be positive")


@dataclass(frozen=True)
class FitResult:
    params: AcfModelParams
    objective_value: float
    equality_residual: float
    tol_eq: float
    n_starts_used: int
    converged: bool
    start_index: int
    acf_exceeds_one: bool


@dataclass(frozen=True)
class UqEstimate:
    """Result of :func:`estimate`.

    ``eps2_n`` is the estimated expected squared averaging error of the full
    sample mean and ``q_hat`` the model's limit of ``s * eps2_s``.
    """

    eps2_n: float
    q_hat: float
    params: Optional[AcfModelParams]
    objective_value: float
    equality_residual: float
    n_starts_used: int
    converged: bool
    n: int
    degenerate: bool = False
    acf_exceeds_one: bool = False
    profile: Optional[MultiscaleProfile] = field(default=None, repr=False)

    @property
    def eps_n(self) -> float:
        return math.sqrt(self.eps2_n)


# ---------------------------------------------------------------------------
# forward model


def _require_feasible(p: AcfModelParams):
    problem = p.feasibility_violation()
    if problem is not None:
        raise InvalidInputError(f"infeasible model parameters: {problem}")


def model_acf(k: int, p: AcfModelParams) -> float:
    """Model autocorrelation at lag ``k``: ``sum_i A_i tau_i**k``."""
    _require_feasible(p)
    if k < 0:
        raise InvalidInputError("lag must be nonnegative")
    return float(np.sum(p.amplitudes * p.rates ** int(k)))


def _fejer_profile(q: int, rates):
    """Inner sums for s = 1..q and each rate.

    Returns ``h[i, s-1] = sum_{k=1}^{s-1} (1 - k/s) tau_i**k`` and its derivative
    ``dh[i, s-1] = sum_{k=1}^{s-1} k (1 - k/s) tau_i**(k-1)``.
    """
    m = rates.size
    h = np.zeros((m, q))
    dh = np.zeros((m, q))
    if q < 2:
        return h, dh
    k = np.arange(1, q, dtype=np.float64)
    pw_km1 = np.power(rates[:, None], k[None, :] - 1.0)
    pw_k = pw_km1 * rates[:, None]
    c0 = np.cumsum(pw_k, axis=1)
    c1 = np.cumsum(k * pw_k, axis=1)
    d1 = np.cumsum(k * pw_km1, axis=1)
    d2 = np.cumsum(k * k * pw_km1, axis=1)
    s = np.arange(2, q + 1, dtype=np.float64)
    h[:, 1:] = c0 - c1 / s
    dh[:, 1:] = d1 - d2 / s
    return h, dh


def _fejer_direct(s: int, tau: float) -> float:
    total = 0.0
    for start in range(1, s, _CHUNK):
        k = np.arange(start, min(s, start + _CHUNK), dtype=np.float64)
        total += float(np.sum((1.0 - k / s) * np.power(tau, k)))
    return total


def _fejer_single(s: int, tau: float) -> float:
    """``sum_{k=1}^{s-1} (1 - k/s) tau**k`` for one (possibly very large) s."""
    if s < 2 or tau == 0.0:
        return 0.0
    u = 1.0 - tau
    if s <= _DIRECT_SUM_LIMIT or s * u < 1e-3:
        return _fejer_direct(s, tau)
    # tau/u * (1 - (1 - tau**s) / (s u)), with expm1/log1p to keep tau**s accurate
    one_minus_pow = -math.expm1(s * math.log1p(-u))
    return tau / u * (1.0 - one_minus_pow / (s * u))


def model_sq_error(p: AcfModelParams, s: int) -> float:
    """Model expected squared averaging error over a block of ``s`` samples."""
    _require_feasible(p)
    s = int(s)
    if s < 1:
        raise InvalidInputError("s must be a positive integer")
    corr = math.fsum(a * _fejer_single(s, t) for a, t in zip(p.amplitudes, p.rates))
    return p.sigma_hat ** 2 / s * (1.0 + 2.0 * corr)


def model_sq_error_curve(p: AcfModelParams, s_values) -> npt.NDArray[np.float64]:
    return np.array([model_sq_error(p, int(s)) for s in s_values])


def model_asymptote(p: AcfModelParams) -> float:
    """Limit of ``s * model_sq_error(p, s)``: ``sigma^2 (1 + 2 sum_i A_i tau_i / (1 - tau_i))``."""
    _require_feasible(p)
    corr = math.fsum(p.amplitudes * p.rates / (1.0 - p.rates))
    return p.sigma_hat ** 2 * (1.0 + 2.0 * corr)


def residual_g(p: AcfModelParams, s: int, msq_s: float) -> float:
    """Mismatch ``mu^2 + model_sq_error(p, s) - msq_s`` at block length ``s``."""
    return p.mu_hat ** 2 + model_sq_error(p, s) - float(msq_s)


def _residuals_and_jacobian(vec, msq, want_jac=True):
    # vec = [A (m), tau (m), sigma, mu]; returns g (q,) and dg/dvec (q, 2m+2)
    q = msq.size
    m = (vec.size - 2) // 2
    amps, rates = vec[:m], vec[m:2 * m]
    sigma, mu = vec[2 * m], vec[2 * m + 1]
    h, dh = _fejer_profile(q, rates)
    s = np.arange(1, q + 1, dtype=np.float64)
    base = (1.0 + 2.0 * amps @ h) / s
    g = mu * mu + sigma * sigma * base - msq
    if not want_jac:
        return g, None
    jac = np.empty((q, 2 * m + 2))
    jac[:, :m] = (sigma * sigma * 2.0 / s)[:, None] * h.T
    jac[:, m:2 * m] = (sigma * sigma * 2.0 / s)[:, None] * (amps[:, None] * dh).T
    jac[:, 2 * m] = 2.0 * sigma * base
    jac[:, 2 * m + 1] = 2.0 * mu
    return g, jac


def objective_and_gradient(p: AcfModelParams, profile: MultiscaleProfile):
    """Sum of squared residuals over all block lengths and its gradient.

    The gradient is with respect to ``p.to_vector()``, i.e.
    ``[A_1..A_m, tau_1..tau_m, sigma, mu]``, treating every entry as free.
    """
    _require_feasible(p)
    g, jac = _residuals_and_jacobian(p.to_vector(), profile.msq)
    return float(np.sum(g * g)), 2.0 * (jac.T @ g)


def profile_from_model(p: AcfModelParams, n: int) -> MultiscaleProfile:
    """Noise-free profile ``msq_s = mu^2 + model_sq_error(p, s)`` for a length-``n`` series."""
    _require_feasible(p)
    q = math.isqrt(int(n))
    msq = np.array([p.mu_hat ** 2 + model_sq_error(p, s) for s in range(1, q + 1)])
    return MultiscaleProfile(n=int(n), q=q, msq=msq,
                             block_counts=int(n) // np.arange(1, q + 1))


# ---------------------------------------------------------------------------
# constrained fit


class _Problem:
    """The fit in scaled units with the amplitude-sum constraint built in.

    sigma' = sigma / sqrt(scale) and mu' = mu / sqrt(scale). The solver works on
    sigma'^2 and mu'^2, in which every residual is linear; with mu' itself the
    gradient vanishes at mu' = 0 and the fit tends to stick there. With
    free-sign amplitudes the reduced vector is z = [A_1..A_{m-1}, tau,
    sigma'^2, mu'^2] and A_m = 1 - sum A_i. With nonnegative amplitudes it is
    z = [w_1..w_m, tau, sigma'^2, mu'^2] with w >= 0 and A = w / sum(w).
    """

    def __init__(self, msq, m, delta, nonnegative):
        self.m = m
        self.nonnegative = nonnegative
        self.scale = float(msq[0]) if msq[0] > 0 else max(float(np.max(msq)), 1.0)
        self.msq = msq / self.scale
        self.q = msq.size
        self.n_amp = m if nonnegative else m - 1
        amp_bounds = [(0.0, None)] * m if nonnegative else [(None, None)] * (m - 1)
        self.bounds = (amp_bounds + [(0.0, 1.0 - delta)] * m
                       + [(0.0, None), (0.0, None)])
        self.i_sigma = self.n_amp + m
        self.i_mu = self.i_sigma + 1

    def amplitudes(self, z):
        if self.nonnegative:
            w = z[: self.m]
            return w / max(math.fsum(w), 1e-300)
        return np.r_[z[: self.m - 1], 1.0 - math.fsum(z[: self.m - 1])]

    def full(self, z):
        """Model vector [A, tau, sigma', mu'] from the reduced vector."""
        tail = z[self.n_amp:]
        return np.r_[self.amplitudes(z), tail[:-2], math.sqrt(tail[-2]), math.sqrt(tail[-1])]

    def reduce_grad(self, z, grad_full):
        m = self.m
        g_amp = grad_full[:m]
        if self.nonnegative:
            amps = self.amplitudes(z)
            w_sum = max(math.fsum(z[:m]), 1e-300)
            g_red = (g_amp - np.dot(g_amp, amps)) / w_sum
        else:
            g_red = g_amp[: m - 1] - g_amp[m - 1]
        return np.r_[g_red, grad_full[m:]]

    def start(self, amps, rates, sigma, mu):
        head = amps if self.nonnegative else amps[: self.m - 1]
        return np.r_[head, rates, sigma * sigma, mu * mu]

    def normalise(self, z):
        if self.nonnegative:
            z = z.copy()
            z[: self.m] = self.amplitudes(z)
        return z

    def evaluate(self, z):
        """Residuals and their Jacobian with respect to [A, tau, sigma'^2, mu'^2]."""
        vec = self.full(z)
        g, jac = _residuals_and_jacobian(vec, self.msq)
        m = self.m
        s = np.arange(1, self.q + 1, dtype=np.float64)
        if vec[2 * m] > 0:
            jac[:, 2 * m] /= 2.0 * vec[2 * m]
        else:
            h, _ = _fejer_profile(self.q, vec[m:2 * m])
            jac[:, 2 * m] = (1.0 + 2.0 * vec[:m] @ h) / s
        jac[:, 2 * m + 1] = 1.0
        return g, jac

    def lagrangian(self, z, lam, rho):
        g, jac = self.evaluate(z)
        c = g[-1]
        val = float(np.sum(g * g)) + lam * c + 0.5 * rho * c * c
        grad_full = 2.0 * (jac.T @ g) + (lam + rho * c) * jac[-1]
        return val, self.reduce_grad(z, grad_full)

    def to_params(self, z):
        vec = self.full(z)
        m = self.m
        root = math.sqrt(self.scale)
        return AcfModelParams(vec[:m], vec[m:2 * m], vec[2 * m] * root, vec[2 * m + 1] * root)

    def restore_equality(self, z):
        """Adjust sigma'^2 (or failing that mu'^2) so the last residual is exactly zero.

        The residual is linear in both, so the correction is a single division.
        Only small corrections are applied; larger ones are left to the caller's
        tolerance check.
        """
        m = self.m
        vec = self.full(z)
        h, _ = _fejer_profile(self.q, vec[m:2 * m])
        base_q = (1.0 + 2.0 * vec[:m] @ h[:, -1]) / self.q
        target = self.msq[-1]
        var, mean_sq = z[self.i_sigma], z[self.i_mu]
        z = z.copy()
        if base_q > 0:
            new_var = (target - mean_sq) / base_q
            if new_var >= 0 and abs(new_var - var) <= 1e-3 * max(var, 1e-300):
                z[self.i_sigma] = new_var
                return z
        new_mean_sq = target - var * base_q
        if new_mean_sq >= 0 and abs(new_mean_sq - mean_sq) <= 1e-3 * target:
            z[self.i_mu] = new_mean_sq
        return z


def _initial_points(problem, config, sample_mean, sample_var, rng):
    m = problem.m
    root = math.sqrt(problem.scale)
    if sample_var is not None:
        sigma0 = math.sqrt(max(sample_var, 0.0)) / root
        mu0 = abs(sample_mean) / root
    else:
        mu0 = math.sqrt(problem.msq[-1]) * 0.5
        sigma0 = math.sqrt(max(problem.msq[0] - mu0 * mu0, 1e-12))
    lo, hi = math.log(0.01), math.log(1.0 - config.tau_ceiling_delta)
    for _ in range(config.n_starts):
        rates = np.sort(np.exp(rng.uniform(lo, hi, size=m)))
        yield problem.start(np.full(m, 1.0 / m), rates, sigma0, mu0)


def _solve_from(problem, z0, config, tol_scaled):
    lam, rho = 0.0, 10.0
    z = np.asarray(z0, dtype=np.float64)
    c_prev = math.inf
    for _ in range(config.max_outer_iters):
        res = optimize.minimize(problem.lagrangian, z, args=(lam, rho), jac=True,
                                method="L-BFGS-B", bounds=problem.bounds,
                                options={"maxiter": config.max_inner_iters,
                                         "ftol": 1e-13, "gtol": 1e-10})
        z = problem.normalise(res.x)
        c = float(problem.evaluate(z)[0][-1])
        if abs(c) <= tol_scaled:
            break
        lam += rho * c
        if abs(c) > 0.25 * abs(c_prev):
            rho = min(rho * 10.0, 1e12)
        c_prev = c
    return problem.restore_equality(z)


def fit_profile(profile: MultiscaleProfile, config: FitConfig = FitConfig()) -> FitResult:
    """Fit the autocorrelation model to a multiscale profile.

    Runs ``config.n_starts`` starts and returns the feasible local minimum with
    the lowest objective; ties go to the earliest start.

    Raises
    ------
    InvalidInputError
        If the profile has fewer than ``m + 2`` block lengths.
    FitError
        If no start reaches the equality tolerance; ``best_iterate`` holds the
        start with the smallest equality residual.
    """
    m = config.m
    if profile.q < m + 2:
        raise InvalidInputError(
            f"profile has q={profile.q} block lengths; m={m} modes need at least {m + 2}")
    problem = _Problem(profile.msq, m, config.tau_ceiling_delta,
                       config.nonnegative_amplitudes)
    tol_raw = config.tol_eq * max(1.0, float(profile.msq[-1]))
    tol_scaled = tol_raw / problem.scale
    rng = make_rng(config.seed)

    best = None
    best_infeasible = None
    starts = _initial_points(problem, config, profile.sample_mean, profile.sample_var, rng)
    for index, z0 in enumerate(starts):
        z = _solve_from(problem, z0, config, tol_scaled)
        params = problem.to_params(z)
        g, _ = _residuals_and_jacobian(params.to_vector(), profile.msq, want_jac=False)
        f_val = float(np.sum(g * g))
        resid = abs(float(g[-1]))
        record = (f_val, resid, index, params)
        if resid <= tol_raw and np.isfinite(f_val):
            if best is None or f_val < best[0]:
                best = record
        elif best_infeasible is None or resid < best_infeasible[1]:
            best_infeasible = record

    if best is None:
        raise FitError(
            f"no start satisfied the equality constraint within {tol_raw:.3g}",
            best_iterate=None if best_infeasible is None else best_infeasible[3])
    f_val, resid, index, params = best
    k = np.arange(1, profile.q + 1)
    rho_model = (params.amplitudes[:, None] * params.rates[:, None] ** k[None, :]).sum(axis=0)
    return FitResult(params=params, objective_value=f_val, equality_residual=resid,
                     tol_eq=tol_raw, n_starts_used=config.n_starts, converged=True,
                     start_index=index,
                     acf_exceeds_one=bool(np.any(np.abs(rho_model) > 1.0 + 1e-12)))


def fit(profile: MultiscaleProfile, m: Optional[int] = None,
        config: FitConfig = FitConfig()) -> AcfModelParams:
    """Fitted model parameters for ``profile`` (see :func:`fit_profile`)."""
    if m is not None and m != config.m:
        config = FitConfig(**{**config.__dict__, "m": int(m)})
    return fit_profile(profile, config).params


def estimate(x, m: Optional[int] = None, config: FitConfig = FitConfig()) -> UqEstimate:
    """Estimate the expected squared averaging error of the mean of ``x``.

    ``x`` should already be free of its initial transient.
    """
    series = as_series(x)
    n = len(series)
    if m is not None and m != config.m:
        config = FitConfig(**{**config.__dict__, "m": int(m)})
    if n < 16:
        raise InvalidInputError(f"estimate needs N >= 16 samples, got {n}")
    profile = multiscale_profile(series)
    if np.ptp(series.samples) == 0.0:
        return UqEstimate(eps2_n=0.0, q_hat=0.0, params=None, objective_value=0.0,
                          equality_residual=0.0, n_starts_used=0, converged=True, n=n,
                          degenerate=True, profile=profile)
    result = fit_profile(profile, config)
    p = result.params
    return UqEstimate(eps2_n=model_sq_error(p, n), q_hat=model_asymptote(p), params=p,
                      objective_value=result.objective_value,
                      equality_residual=result.equality_residual,
                      n_starts_used=result.n_starts_used, converged=result.converged,
                      n=n, acf_exceeds_one=result.acf_exceeds_one, profile=profile)
