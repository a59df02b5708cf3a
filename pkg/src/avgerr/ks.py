"""Kuramoto-Sivashinsky energy time series.

Solves ``u_t + u_xxxx + u_xx + u u_x = 0`` on a periodic domain ``[0, L)`` with a
Fourier pseudospectral discretisation (2/3-rule dealiasing, nonlinear term in
divergence form ``-(1/2) d/dx u^2``) and the ARS(3,4,3) implicit-explicit
Runge-Kutta scheme of Ascher, Ruuth & Spiteri (Appl. Numer. Math. 25, 1997):
three implicit stages with an L-stable, stiffly accurate SDIRK tableau for the
linear term, four explicit stages for the nonlinear term, third order overall.

Grid convention: ``x_j = j L / N_x`` and wavenumbers ``k_n = 2 pi n / L``.
The state holds the half spectrum returned by ``numpy.fft.rfft``; the
conjugate-symmetric other half is implied, so ``u`` stays real.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

from .errors import BlowUpError, InvalidInputError
from .rng import make_rng
from .series import TimeSeries

__all__ = ["KsConfig", "KsState", "KsSolver", "ARS343", "ks_initial_field", "ks_step",
           "ks_energy", "ks_run", "ks_grid"]

_GAMMA = 0.435866521508459
_B1 = -1.5 * _GAMMA ** 2 + 4.0 * _GAMMA - 0.25
_B2 = 1.5 * _GAMMA ** 2 - 5.0 * _GAMMA + 1.25

# Explicit tableau (4 stages) and implicit tableau (first stage explicit).
ARS343 = {
    "explicit": np.array([
        [0.0, 0.0, 0.0, 0.0],
        [_GAMMA, 0.0, 0.0, 0.0],
        [0.3212788860, 0.3966543747, 0.0, 0.0],
        [-0.105858296, 0.5529291479, 0.5529291479, 0.0],
    ]),
    "implicit": np.array([
        [0.0, 0.0, 0.0, 0.0],
        [0.0, _GAMMA, 0.0, 0.0],
        [0.0, (1.0 - _GAMMA) / 2.0, _GAMMA, 0.0],
        [0.0, _B1, _B2, _GAMMA],
    ]),
    "weights": np.array([0.0, _B1, _B2, _GAMMA]),
}


@dataclass(frozen=True)
class KsConfig:
    """Domain, discretisation and run length of a KS simulation."""

    domain_length: float = 200.0
    n_modes: int = 512
    dt: float = 0.2
    n_steps: int = 20000
    seed: int = 0
    sample_stride: int = 1

    def __post_init__(self):
        n = int(self.n_modes)
        if n < 16 or n & (n - 1):
            raise InvalidInputError(f"n_modes must be a power of two >= 16, got {n}")
        if not self.dt > 0:
            raise InvalidInputError("dt must be positive")
        if not self.domain_length > 0:
            raise InvalidInputError("domain_length must be positive")
        if self.n_steps < 0:
            raise InvalidInputError("n_steps must be nonnegative")
        if self.sample_stride < 1:
            raise InvalidInputError("sample_stride must be positive")


@dataclass(frozen=True)
class KsState:
    """Half spectrum of ``u`` (length ``N_x // 2 + 1``) at time ``time``."""

    coeffs: npt.NDArray[np.complex128]
    time: float = 0.0

    def physical(self, n_modes: int) -> npt.NDArray[np.float64]:
        return np.fft.irfft(self.coeffs, n=n_modes)

    def full_spectrum(self, n_modes: int) -> npt.NDArray[np.complex128]:
        """Length-``N_x`` spectrum, with the negative wavenumbers filled in by conjugation."""
        full = np.empty(n_modes, dtype=np.complex128)
        half = n_modes // 2
        full[: half + 1] = self.coeffs
        full[half + 1:] = np.conj(self.coeffs[1:half][::-1])
        return full


def ks_grid(cfg: KsConfig) -> npt.NDArray[np.float64]:
    return np.arange(cfg.n_modes) * (cfg.domain_length / cfg.n_modes)


class KsSolver:
    """Precomputed operators for stepping one configuration."""

    def __init__(self, domain_length: float, n_modes: int, dt: float):
        self.n_modes = n_modes
        self.dt = dt
        n = np.arange(n_modes // 2 + 1)
        k = 2.0 * np.pi * n / domain_length
        self.linear = k ** 2 - k ** 4
        self.deriv = 0.5j * k
        self.mask = (n <= n_modes // 3).astype(np.float64)
        self.tab_e = ARS343["explicit"]
        self.tab_i = ARS343["implicit"]
        self.weights = ARS343["weights"]
        self.inverse = 1.0 / (1.0 - dt * _GAMMA * self.linear)

    def nonlinear(self, coeffs):
        """Dealiased ``-(1/2) d/dx (u^2)`` in spectral space."""
        u = np.fft.irfft(coeffs * self.mask, n=self.n_modes)
        return -self.deriv * self.mask * np.fft.rfft(u * u)

    def step(self, coeffs):
        dt = self.dt
        ae, ai, b = self.tab_e, self.tab_i, self.weights
        stages = [coeffs]
        nl = [self.nonlinear(coeffs)]
        lin = [None]
        for i in range(1, 4):
            rhs = coeffs.copy()
            for j in range(i):
                if ae[i, j]:
                    rhs += dt * ae[i, j] * nl[j]
                if j >= 1 and ai[i, j]:
                    rhs += dt * ai[i, j] * lin[j]
            y = rhs * self.inverse
            stages.append(y)
            lin.append(self.linear * y)
            nl.append(self.nonlinear(y))
        new = coeffs.copy()
        for j in range(1, 4):
            new += dt * b[j] * (nl[j] + lin[j])
        return new * self.mask


@functools.lru_cache(maxsize=8)
def _solver(domain_length: float, n_modes: int, dt: float) -> KsSolver:
    return KsSolver(domain_length, n_modes, dt)


def ks_initial_field(cfg: KsConfig) -> KsState:
    """``u(x, 0) = sin(0.5 pi x) + sin(0.85 pi x) + 0.2 v`` with ``v`` i.i.d. N(0, 1) per grid point."""
    x = ks_grid(cfg)
    v = make_rng(cfg.seed).standard_normal(cfg.n_modes)
    u = np.sin(0.5 * np.pi * x) + np.sin(0.85 * np.pi * x) + 0.2 * v
    return KsState(np.fft.rfft(u), 0.0)


def ks_step(state: KsState, cfg: KsConfig, step_index: int = 0) -> KsState:
    """Advance one time step; raises :class:`BlowUpError` if the state stops being finite."""
    solver = _solver(cfg.domain_length, cfg.n_modes, cfg.dt)
    with np.errstate(over="ignore", invalid="ignore"):
        new = solver.step(state.coeffs)
    if not np.isfinite(np.max(np.abs(new))):
        raise BlowUpError(f"KS solution became non-finite at step {step_index}", step=step_index)
    return KsState(new, state.time + cfg.dt)


def ks_energy(state: KsState, cfg: KsConfig) -> float:
    """Spatial mean of ``u^2`` via Parseval's identity on the half spectrum."""
    c = state.coeffs
    n = cfg.n_modes
    power = np.abs(c) ** 2
    total = power[0] + power[-1] + 2.0 * math.fsum(power[1:-1])
    return float(total / (n * n))


def ks_run(cfg: KsConfig) -> TimeSeries:
    """Simulate ``cfg.n_steps`` steps and record the energy every ``sample_stride`` steps.

    The first sample is the energy of the initial field, so the series has
    ``n_steps // sample_stride + 1`` entries. The initial transient is kept.
    """
    solver = _solver(cfg.domain_length, cfg.n_modes, cfg.dt)
    coeffs = ks_initial_field(cfg).coeffs
    n_out = cfg.n_steps // cfg.sample_stride + 1
    energy = np.empty(n_out)
    energy[0] = ks_energy(KsState(coeffs), cfg)
    out = 1
    for step in range(1, cfg.n_steps + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            coeffs = solver.step(coeffs)
        if not np.isfinite(coeffs).all():
            raise BlowUpError(f"KS solution became non-finite at step {step}", step=step)
        if step % cfg.sample_stride == 0:
            energy[out] = ks_energy(KsState(coeffs), cfg)
            out += 1
    if not np.all(np.isfinite(energy)):
        raise BlowUpError("KS energy series contains non-finite values")
    return TimeSeries(energy, cfg.dt * cfg.sample_stride, label="KS energy")
