"""Stochastic Landau-Lifshitz-Gilbert macrospin for a zero-barrier sMTJ.

The free layer has no anisotropy and no applied field, so the only field
is the thermal one.  Fields are carried in tesla and the thermal field
has per-component standard deviation ``sqrt(2 alpha kT / (gamma Ms V dt))``.
Integration is Heun (Stratonovich) with renormalisation after every step.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np
from scipy import constants

from . import _kernels
from .errors import ConfigurationError, InsufficientDataError, StateError
from .seeding import generator

GAMMA_E = 1.76085963023e11  # rad s^-1 T^-1
NORM_TOLERANCE = 1e-9
_CHUNK = 1 << 18


@dataclass(frozen=True)
class SllgParams:
    gamma: float = GAMMA_E
    damping: float = 0.01
    ms: float = 1.1e6
    diameter: float = 22e-9
    thickness: float = 2e-9
    temperature: float = 300.0
    dt: float = 1e-12
    h_eff_ext: tuple = (0.0, 0.0, 0.0)
    energy_barrier: float = 0.0

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigurationError("dt must be positive")
        if not self.damping > 0:
            raise ConfigurationError("damping must be positive")
        if self.temperature < 0:
            raise ConfigurationError("temperature must be non-negative")
        if not (self.ms > 0 and self.volume > 0):
            raise ConfigurationError("Ms and free-layer volume must be positive")
        if len(self.h_eff_ext) != 3:
            raise ConfigurationError("h_eff_ext must be a 3-vector")
        if self.energy_barrier != 0:
            # uniaxial anisotropy is not modelled
            raise ConfigurationError("only zero-barrier magnets are supported")

    @property
    def volume(self) -> float:
        return np.pi * (self.diameter / 2) ** 2 * self.thickness

    @property
    def reduced_gamma(self) -> float:
        return self.gamma / (1 + self.damping**2)

    @property
    def thermal_sigma(self) -> float:
        """Thermal field standard deviation per component, tesla."""
        return float(np.sqrt(2 * self.damping * constants.k * self.temperature
                             / (self.gamma * self.ms * self.volume * self.dt)))

    @property
    def diffusion(self) -> float:
        """Rotational diffusion constant of the free layer, 1/s."""
        return (self.damping * self.gamma * constants.k * self.temperature
                / ((1 + self.damping**2) * self.ms * self.volume))

    @property
    def mz_correlation_time(self) -> float:
        """e-folding time of <m_z(0) m_z(t)> for free rotational diffusion, seconds."""
        d = self.diffusion
        return np.inf if d == 0 else 1.0 / (2.0 * d)


@dataclass(frozen=True)
class SmtjState:
    m: tuple
    g0: float = 1e-6
    polarization: float = 0.7

    def __post_init__(self):
        m = tuple(float(c) for c in self.m)
        object.__setattr__(self, "m", m)
        if len(m) != 3:
            raise StateError("magnetisation must be a 3-vector")
        if abs(np.sqrt(m[0]**2 + m[1]**2 + m[2]**2) - 1.0) > NORM_TOLERANCE:
            raise StateError(f"magnetisation {m} is not a unit vector")
        if not 0 < self.polarization < 1:
            raise ConfigurationError("polarization must lie in (0, 1)")
        if not self.g0 > 0:
            raise ConfigurationError("g0 must be positive")

    @property
    def conductance(self) -> float:
        return conductance_of(self)


def conductance_of(state: SmtjState) -> float:
    """G = g0 (1 + P^2 m_z); parallel alignment is m_z = +1."""
    return state.g0 * (1 + state.polarization**2 * state.m[2])


def conductance_bounds(g0: float, polarization: float) -> tuple[float, float]:
    p2 = polarization**2
    return g0 * (1 - p2), g0 * (1 + p2)


def implied_tmr(polarization: float) -> float:
    """(R_AP - R_P) / R_P of the conductance model, i.e. 2P^2 / (1 - P^2)."""
    g_ap, g_p = conductance_bounds(1.0, polarization)
    return (g_p - g_ap) / g_ap


def _rhs(m, h, gp, alpha):
    mxh = np.cross(m, h)
    return -gp * (mxh + alpha * np.cross(m, mxh))


def sllg_step(state: SmtjState, params: SllgParams, noise) -> SmtjState:
    """One Heun step driven by three standard-normal variates."""
    m = np.asarray(state.m)
    noise = np.asarray(noise, dtype=float)
    if noise.shape != (3,):
        raise ConfigurationError("noise must hold three variates")
    h = np.asarray(params.h_eff_ext, dtype=float) + params.thermal_sigma * noise
    gp, alpha, dt = params.reduced_gamma, params.damping, params.dt
    f1 = _rhs(m, h, gp, alpha)
    f2 = _rhs(m + dt * f1, h, gp, alpha)
    inc = 0.5 * dt * (f1 + f2)
    if not inc.any():
        return state
    m = m + inc
    m = m / np.sqrt(m @ m)
    return SmtjState(tuple(m), state.g0, state.polarization)


def random_direction(rng: np.random.Generator) -> np.ndarray:
    """A point drawn uniformly on the unit sphere."""
    v = rng.standard_normal(3)
    return v / np.sqrt(v @ v)


class SllgStream:
    """Stateful integrator feeding an analog cell one record per tick.

    The driving Gaussian stream is consumed in fixed-size blocks, so the
    records depend only on the generator and the total number of ticks.
    """

    def __init__(self, params: SllgParams, state: SmtjState, rng: np.random.Generator,
                 steps_per_tick: int = 1):
        if steps_per_tick < 1:
            raise ConfigurationError("steps_per_tick must be >= 1")
        self.params = params
        self.state = state
        self.rng = rng
        self.steps_per_tick = int(steps_per_tick)
        self._m = np.array(state.m)
        self._hext = np.asarray(params.h_eff_ext, dtype=float)

    def advance(self, ticks: int) -> np.ndarray:
        """Magnetisation records, shape ``(ticks, 3)``."""
        p = self.params
        out = np.empty((ticks, 3))
        per_chunk = max(1, _CHUNK // self.steps_per_tick)
        done = 0
        while done < ticks:
            n = min(per_chunk, ticks - done)
            noise = self.rng.standard_normal((n * self.steps_per_tick, 3))
            rec, self._m = _kernels.heun_run(self._m, noise, p.reduced_gamma, p.damping,
                                             self._hext, p.thermal_sigma, p.dt,
                                             self.steps_per_tick)
            out[done:done + n] = rec
            done += n
        self.state = SmtjState(tuple(self._m), self.state.g0, self.state.polarization)
        return out

    def conductances(self, ticks: int) -> np.ndarray:
        mz = self.advance(ticks)[:, 2]
        return self.state.g0 * (1 + self.state.polarization**2 * mz)


@dataclass
class Trace:
    t: np.ndarray
    m: np.ndarray
    g: np.ndarray
    params: SllgParams = field(repr=False, default=None)

    def __len__(self):
        return len(self.t)

    @property
    def mz(self) -> np.ndarray:
        return self.m[:, 2]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t_s", "mx", "my", "mz", "G_S"])
            for t, (mx, my, mz), g in zip(self.t, self.m, self.g):
                w.writerow([f"{t:.9g}", f"{mx:.9g}", f"{my:.9g}", f"{mz:.9g}", f"{g:.9g}"])


def simulate_trace(params: SllgParams, init: SmtjState, steps: int, seed: int,
                   record_every: int = 1) -> Trace:
    """Trace of ``steps`` records spaced ``record_every * dt`` apart; record 0 is ``init``."""
    if steps < 1:
        raise ConfigurationError("steps must be >= 1")
    stream = SllgStream(params, init, generator(seed, "sllg"), record_every)
    m = np.empty((steps, 3))
    m[0] = init.m
    if steps > 1:
        m[1:] = stream.advance(steps - 1)
    t = np.arange(steps) * (record_every * params.dt)
    g = init.g0 * (1 + init.polarization**2 * m[:, 2])
    return Trace(t, m, g, params)


def autocorrelation_time(x: np.ndarray, max_lag: Optional[int] = None) -> int:
    """First lag at which the normalised autocorrelation drops below 1/e (>= 1)."""
    x = np.asarray(x, dtype=float)
    x = x - x.mean()
    var = x @ x
    if var == 0:
        return 1
    n = len(x)
    size = 1 << int(np.ceil(np.log2(2 * n)))
    spec = np.fft.rfft(x, size)
    acf = np.fft.irfft(spec * np.conj(spec), size)[:n] / var
    if max_lag is not None:
        acf = acf[:max_lag + 1]
    below = np.flatnonzero(acf < np.exp(-1))
    if len(below) == 0:
        raise InsufficientDataError("trace never decorrelates; lengthen it or thin harder")
    return max(1, int(below[0]))


class StationarityReport(NamedTuple):
    ks_uniform_mz: float
    autocorrelation_time: int
    n_effective: int


def stationarity_report(trace, burn_in: int = 0, min_length: int = 1000) -> StationarityReport:
    """KS distance of thinned m_z to U[-1, 1].

    ``trace`` is a :class:`Trace` or a plain m_z array.
    """
    from .stats import ks_statistic, uniform_cdf

    mz = trace.mz if isinstance(trace, Trace) else np.asarray(trace, dtype=float)
    if len(mz) < min_length:
        raise InsufficientDataError(f"need at least {min_length} records, got {len(mz)}")
    mz = mz[burn_in:]
    tau = autocorrelation_time(mz)
    thinned = mz[::tau]
    return StationarityReport(ks_statistic(thinned, uniform_cdf(-1.0, 1.0)), tau, len(thinned))
