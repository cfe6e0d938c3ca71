"""Statistics used to judge samples and curves against references."""
from __future__ import annotations

import warnings
from typing import Callable, NamedTuple

import numpy as np
from scipy import optimize
from scipy import stats as sps

from .errors import ArgumentError, FitError, InsufficientDataError


def uniform_cdf(lo: float, hi: float) -> Callable:
    def cdf(x):
        return np.clip((np.asarray(x, dtype=float) - lo) / (hi - lo), 0.0, 1.0)
    return cdf


def triangular_cdf(lo: float, hi: float) -> Callable:
    """CDF of the symmetric triangular law on [lo, hi] (sum of two uniforms)."""
    def cdf(x):
        u = np.clip((np.asarray(x, dtype=float) - lo) / (hi - lo), 0.0, 1.0)
        return np.where(u < 0.5, 2 * u * u, 1 - 2 * (1 - u) ** 2)
    return cdf


def ks_statistic(samples, cdf: Callable) -> float:
    """Sup-norm distance between the empirical CDF of ``samples`` and ``cdf``."""
    samples = np.asarray(samples, dtype=float).ravel()
    if samples.size == 0:
        raise InsufficientDataError("KS statistic needs at least one sample")
    return float(sps.kstest(samples, cdf).statistic)


class DistributionStats(NamedTuple):
    mean: float
    variance: float
    min: float
    max: float
    skewness: float


def distribution_stats(samples) -> DistributionStats:
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 2:
        raise InsufficientDataError("need at least two samples")
    var = float(x.var(ddof=1))
    skew = 0.0 if var == 0 else float(sps.skew(x))
    return DistributionStats(float(x.mean()), var, float(x.min()), float(x.max()), skew)


def is_unimodal(samples, bins: int = 20, sigmas: float = 3.0) -> bool:
    """Histogram rises to a single mode then falls, allowing Poisson noise."""
    counts, _ = np.histogram(np.asarray(samples, dtype=float), bins=bins)
    mode = int(np.argmax(counts))
    slack = sigmas * np.sqrt(np.maximum(counts, 1))
    rising = all(counts[i + 1] >= counts[i] - slack[i] for i in range(mode))
    falling = all(counts[i + 1] <= counts[i] + slack[i] for i in range(mode, bins - 1))
    return rising and falling


def linear_fit(x, y) -> tuple[float, float, float]:
    """Least-squares line; returns (slope, intercept, R^2)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 if ss_tot == 0 else 1.0 - float(resid @ resid) / ss_tot
    return float(slope), float(intercept), r2


_FAMILIES = {
    "tanh": np.tanh,
    "logistic": lambda z: 1.0 / (1.0 + np.exp(-z)),
    "relu": lambda z: np.maximum(z, 0.0),
    "linear": lambda z: z,
}


class FitResult(NamedTuple):
    family: str
    a: float
    b: float
    c: float
    d: float
    rmse: float
    degenerate: bool

    def __call__(self, x):
        return self.a * _FAMILIES[self.family]((np.asarray(x, dtype=float) - self.c) / self.b) + self.d


def fit_reference(x, y, family: str) -> FitResult:
    """Fit ``y = a f((x - c) / b) + d`` for a named family.

    A fit whose amplitude collapses to zero is returned with
    ``degenerate=True`` instead of raising.
    """
    if family not in _FAMILIES:
        raise ArgumentError(f"unknown family {family!r}; expected one of {sorted(_FAMILIES)}")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 4:
        raise InsufficientDataError("fit needs at least four points")
    # work in a unit-scaled input so word-sized domains stay well conditioned
    x0, xs = x.mean(), (np.ptp(x) or 1.0)
    u = (x - x0) / xs
    yspan = np.ptp(y)
    if yspan == 0:
        return FitResult(family, 0.0, 1.0, 0.0, float(y[0]), 0.0, True)
    if family == "linear":
        slope, intercept = np.polyfit(u, y, 1)
        a, b, c, d = float(slope), 1.0, 0.0, float(intercept)
        pred = a * u + d
    else:
        f = _FAMILIES[family]
        def model(v, a, b, c, d):
            return a * f((v - c) / b) + d
        if family == "relu":
            p0 = (yspan, 1.0, u[np.argmax(y > y.min())] - 0.01, y.min())
        elif family == "tanh":
            p0 = (yspan / 2, 0.25, 0.0, y.mean())
        else:
            p0 = (yspan, 0.1, 0.0, y.min())
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", optimize.OptimizeWarning)
                (a, b, c, d), _ = optimize.curve_fit(model, u, y, p0=p0, maxfev=20000)
        except RuntimeError as exc:
            raise FitError(f"{family} fit did not converge: {exc}",
                           residual=float(np.sqrt(np.mean((y - model(u, *p0)) ** 2)))) from exc
        pred = model(u, a, b, c, d)
    rmse = float(np.sqrt(np.mean((y - pred) ** 2)))
    # back to the caller's input units
    b_out, c_out = b * xs, c * xs + x0
    degenerate = bool(abs(a) < 1e-9 * max(yspan, 1.0))
    return FitResult(family, float(a), float(b_out), float(c_out), float(d), rmse, degenerate)
