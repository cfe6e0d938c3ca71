"""p-neurons: a stochastic unit composed with an activation unit.

Digital neurons compare words; analog neurons compare a node voltage
against a divider cell through a behavioural amplifier.  Either way the
time-averaged output is the CDF of the (optionally beta-scaled)
stochastic signal evaluated at the input.
"""
from __future__ import annotations

import csv
import dataclasses
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .activation import (
    BIPOLAR,
    ENCODINGS,
    TWOS_COMPLEMENT,
    UNIPOLAR,
    AnalogAmpParams,
    DigitalEncoding,
    amp_run,
    compare,
    default_amp,
    ideal_amp,
    relu_gate,
    to_signed,
    to_word,
)
from .entropy import ADAPTER_DISTRIBUTION, WORD_MAX, OneM1RCell, SharedBroker, TwoMCell
from .errors import ArgumentError, ConfigurationError, DegenerateCurveError, DomainError

KINDS = ("p_tanh", "p_sigmoid", "p_relu", "p_linear")
UNSIGNED_DOMAIN = (0, WORD_MAX)
SIGNED_DOMAIN = (-(1 << 31), (1 << 31) - 1)
CDF_KINDS = ("uniform", "triangular", "empirical")


def _check_kind(kind: str) -> str:
    if kind not in KINDS:
        raise ConfigurationError(f"unknown activation kind {kind!r}; expected one of {KINDS}")
    return kind


@dataclass(frozen=True)
class Cdf:
    """Strict-comparison CDF ``P(r < x)`` of a stochastic signal.

    ``beta`` and ``mu`` describe the scaled signal ``mu + beta (r - mu)``.
    """

    kind: str
    lo: float = 0.0
    hi: float = 1.0
    samples: Optional[np.ndarray] = field(default=None, compare=False, repr=False)
    beta: float = 1.0
    mu: float = 0.0

    def __post_init__(self):
        if self.kind not in CDF_KINDS:
            raise ArgumentError(f"unknown CDF descriptor {self.kind!r}; expected one of {CDF_KINDS}")
        if self.kind == "empirical":
            if self.samples is None or len(self.samples) == 0:
                raise ArgumentError("empirical CDF needs samples")
            object.__setattr__(self, "samples", np.sort(np.asarray(self.samples, dtype=float)))
        elif not self.hi > self.lo:
            raise ArgumentError("CDF support must have hi > lo")

    @classmethod
    def empirical(cls, samples) -> "Cdf":
        return cls("empirical", samples=samples)

    def scaled(self, beta: float, mu: float) -> "Cdf":
        if not beta > 0:
            raise ArgumentError("beta must be positive")
        # compose with any existing scaling about the same centre
        return dataclasses.replace(self, beta=self.beta * beta, mu=mu, samples=self.samples)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.beta != 1.0:
            x = self.mu + (x - self.mu) / self.beta
        if self.kind == "empirical":
            out = np.searchsorted(self.samples, x, side="left") / len(self.samples)
        else:
            u = np.clip((x - self.lo) / (self.hi - self.lo), 0.0, 1.0)
            out = u if self.kind == "uniform" else np.where(u < 0.5, 2 * u * u, 1 - 2 * (1 - u) ** 2)
        return float(out) if np.ndim(out) == 0 else out


def analytic_transfer(kind: str, rng_cdf: Cdf, x):
    """Expected time-averaged output of a comparator neuron."""
    _check_kind(kind)
    if not isinstance(rng_cdf, Cdf):
        raise ArgumentError("rng_cdf must be a Cdf descriptor")
    f = np.asarray(rng_cdf(x), dtype=float)
    if kind == "p_sigmoid":
        out = f
    elif kind in ("p_tanh", "p_linear"):
        out = 2 * f - 1
    else:
        out = np.where(np.asarray(x, dtype=float) >= 0, f, 0.0)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------


@dataclass
class DigitalPNeuron:
    """Comparator p-neuron.

    ``unit`` may be omitted when the neuron is fed by a :class:`SharedBroker`;
    ``distribution`` then names the adapter's law for the oracle.
    """

    kind: str
    unit: Optional[object] = None
    beta: float = 1.0
    distribution: Optional[str] = None
    encoding: Optional[DigitalEncoding] = None

    def __post_init__(self):
        _check_kind(self.kind)
        if not self.beta > 0:
            raise ArgumentError("beta must be positive")
        if self.encoding is None:
            self.encoding = ENCODINGS[self.kind]
        if self.distribution is None:
            if self.unit is None:
                raise ConfigurationError("a neuron without a unit must declare its distribution")
            self.distribution = self.unit.distribution

    impl = "digital"

    @property
    def polarity(self) -> str:
        return self.encoding.output_polarity

    @property
    def domain(self) -> tuple[int, int]:
        return SIGNED_DOMAIN if self.encoding.signedness == TWOS_COMPLEMENT else UNSIGNED_DOMAIN

    @property
    def midpoint(self) -> float:
        """Centre of the stochastic signal's range, the pivot for beta."""
        if self.kind == "p_relu":
            return float(1 << 30)
        return 0.0 if self.encoding.signedness == TWOS_COMPLEMENT else float(1 << 31)

    @property
    def source(self):
        return self.unit

    def signal_cdf(self) -> Cdf:
        """Law of the word fed to the comparator, before beta scaling."""
        if self.kind == "p_relu":
            # masking the sign bit folds either law onto a uniform
            return Cdf("uniform", 0.0, float(1 << 31))
        if self.encoding.signedness == TWOS_COMPLEMENT:
            if self.distribution != "uniform":
                raise ArgumentError("no closed form for a signed view of a triangular word")
            return Cdf("uniform", float(SIGNED_DOMAIN[0]), float(1 << 31))
        return Cdf(self.distribution, 0.0, float(1 << 32))

    def oracle(self, x):
        return analytic_transfer(self.kind, self.signal_cdf().scaled(self.beta, self.midpoint), x)

    def check_input(self, x):
        lo, hi = self.domain
        arr = np.asarray(x)
        if np.any(arr < lo) or np.any(arr > hi):
            raise DomainError(f"input outside the {self.encoding.signedness} domain [{lo}, {hi}]")

    def respond(self, x, words) -> np.ndarray:
        """Instantaneous outputs for input ``x`` against each stochastic word."""
        words = np.asarray(words, dtype=np.int64)
        if self.kind == "p_relu":
            r = words & 0x7FFFFFFF
            if self.beta == 1.0:
                return relu_gate(np.full(len(r), to_word(int(x)), dtype=np.int64), r)
            fired = (int(x) >= 0) & (int(x) > self.midpoint + self.beta * (r - self.midpoint))
            return fired.astype(np.int64)
        if self.beta == 1.0:
            return compare(np.full(len(words), to_word(int(x)), dtype=np.int64), words, self.encoding)
        r = to_signed(words) if self.encoding.signedness == TWOS_COMPLEMENT else words
        fired = int(x) > self.midpoint + self.beta * (r - self.midpoint)
        return 2 * fired.astype(np.int64) - 1 if self.polarity == BIPOLAR else fired.astype(np.int64)

    def step(self, x) -> int:
        self.check_input(x)
        if self.unit is None:
            raise ConfigurationError("this neuron is fed by a broker; tick the broker instead")
        return int(self.respond(x, self.unit.draws(1))[0])


@dataclass
class AnalogPNeuron:
    """Divider cell into a differential amplifier.

    Output is normalised by the upper rail, so bipolar rails give [-1, 1]
    and unipolar rails give [0, 1].
    """

    kind: str
    cell: Union[TwoMCell, OneM1RCell]
    amp: Optional[AnalogAmpParams] = None
    beta: float = 1.0

    impl = "analog"

    def __post_init__(self):
        _check_kind(self.kind)
        if self.kind == "p_linear":
            raise ConfigurationError("p_linear has no analog realisation here")
        if not self.beta > 0:
            raise ArgumentError("beta must be positive")
        if self.amp is None:
            self.amp = default_amp(*default_rails(self.kind, self.cell.v_dd))

    @classmethod
    def ideal(cls, kind: str, cell, beta: float = 1.0) -> "AnalogPNeuron":
        return cls(kind, cell, ideal_amp(*default_rails(kind, cell.v_dd)), beta)

    @property
    def polarity(self) -> str:
        return BIPOLAR if self.amp.rail_low < 0 else UNIPOLAR

    @property
    def domain(self) -> tuple[float, float]:
        return 0.0, float(self.cell.v_dd)

    @property
    def midpoint(self) -> float:
        return float(self.cell.midpoint)

    @property
    def source(self):
        return self.cell

    def check_input(self, x):
        lo, hi = self.domain
        arr = np.asarray(x)
        if np.any(arr < lo) or np.any(arr > hi):
            raise DomainError(f"input outside [{lo}, {hi}] V")

    def respond(self, x, volts, amp: Optional[AnalogAmpParams] = None) -> np.ndarray:
        """Normalised outputs for input ``x``; runs (and advances) ``amp``."""
        amp = self.amp if amp is None else amp
        v = np.asarray(volts, dtype=float)
        if self.beta != 1.0:
            v = self.midpoint + self.beta * (v - self.midpoint)
        return amp_run(float(x) - v, amp) / amp.rail_high

    def fresh_amp(self) -> AnalogAmpParams:
        return dataclasses.replace(self.amp, state_v_out=self.amp.center)

    def step(self, x) -> float:
        self.check_input(x)
        return float(self.respond(x, self.cell.samples(1))[0])


def default_rails(kind: str, v_dd: float) -> tuple[float, float]:
    return (-v_dd / 2, v_dd / 2) if kind == "p_tanh" else (0.0, v_dd)


PNeuron = Union[DigitalPNeuron, AnalogPNeuron]


def step(neuron: PNeuron, x):
    return neuron.step(x)


def tune_beta(neuron: PNeuron, beta: float) -> PNeuron:
    if not beta > 0:
        raise ArgumentError("beta must be positive")
    return dataclasses.replace(neuron, beta=float(beta))


# ---------------------------------------------------------------------------


@dataclass
class TransferCurve:
    inputs: np.ndarray
    means: np.ndarray
    counts: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def polarity(self) -> str:
        return self.meta.get("polarity", BIPOLAR)

    @property
    def points(self) -> list[tuple]:
        return list(zip(self.inputs.tolist(), self.means.tolist(), self.counts.tolist()))

    def normalized(self) -> np.ndarray:
        return (self.means + 1) / 2 if self.polarity == BIPOLAR else self.means.copy()

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["input", "mean", "n"])
            for x, y, n in zip(self.inputs, self.means, self.counts):
                w.writerow([f"{x:.9g}" if isinstance(x, float) else str(x), f"{y:.9g}", str(int(n))])

    def write_meta(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.meta, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _as_inputs(neuron, sweep):
    if len(sweep) == 0:
        raise ArgumentError("sweep must contain at least one input")
    neuron.check_input(sweep)
    if neuron.impl == "digital":
        return [int(x) for x in sweep]
    return [float(x) for x in sweep]


def _curve_meta(neuron, seed, samples_per_point, extra=None) -> dict:
    meta = {
        "seed": int(seed),
        "samples_per_point": int(samples_per_point),
        "kind": neuron.kind,
        "impl": neuron.impl,
        "beta": float(neuron.beta),
        "polarity": neuron.polarity,
    }
    if neuron.impl == "digital":
        meta["encoding"] = neuron.encoding.signedness
        meta["distribution"] = neuron.distribution
    else:
        meta["cell"] = type(neuron.cell).__name__
        meta["source"] = neuron.cell.source
        meta["v_dd"] = float(neuron.cell.v_dd)
    meta.update(extra or {})
    return meta


def transfer_curve(neuron: PNeuron, sweep: Sequence, samples_per_point: int, seed: int,
                   workers: int = 1, common_random_numbers: bool = False) -> TransferCurve:
    """Time-averaged response over ``sweep``.

    Point ``k`` draws from a fresh copy of the neuron's stochastic unit
    seeded by ``(seed, k)``, so the result does not depend on ``workers``.
    With ``common_random_numbers`` every point reuses stream 0.
    """
    if samples_per_point < 1:
        raise ArgumentError("samples_per_point must be >= 1")
    if neuron.source is None:
        raise ConfigurationError("neuron has no stochastic unit of its own")
    inputs = _as_inputs(neuron, sweep)
    n = int(samples_per_point)
    shared = neuron.source.reseeded(seed, 0).samples(n) if common_random_numbers and \
        neuron.impl == "analog" else None
    if common_random_numbers and neuron.impl == "digital":
        shared = neuron.source.reseeded(seed, 0).draws(n)

    def point(k):
        if shared is not None:
            signal = shared
        else:
            src = neuron.source.reseeded(seed, k)
            signal = src.draws(n) if neuron.impl == "digital" else src.samples(n)
        if neuron.impl == "digital":
            ys = neuron.respond(inputs[k], signal)
        else:
            ys = neuron.respond(inputs[k], signal, neuron.fresh_amp())
        return float(np.mean(ys))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            means = list(pool.map(point, range(len(inputs))))
    else:
        means = [point(k) for k in range(len(inputs))]
    kind = np.int64 if neuron.impl == "digital" else float
    return TransferCurve(np.array(inputs, dtype=kind), np.array(means), np.full(len(inputs), n),
                         _curve_meta(neuron, seed, n, {"common_random_numbers": bool(common_random_numbers)}))


def shared_transfer_curves(broker: SharedBroker, neurons: dict, sweeps: dict,
                           samples_per_point: int, seed: int) -> dict:
    """Curves for several broker subscribers fed from the same ticks.

    ``neurons`` and ``sweeps`` map subscriber id to a neuron and its
    input sweep; all sweeps must have the same length.  Point ``k`` uses
    the broker reseeded with ``(seed, k)``.
    """
    ids = [sid for sid, _ in broker.subscribers]
    if set(ids) != set(neurons) or set(ids) != set(sweeps):
        raise ArgumentError("neurons and sweeps must cover exactly the broker's subscribers")
    lengths = {len(s) for s in sweeps.values()}
    if len(lengths) != 1:
        raise ArgumentError("all sweeps must have the same length")
    inputs = {sid: _as_inputs(neurons[sid], sweeps[sid]) for sid in ids}
    means = {sid: [] for sid in ids}
    npts = lengths.pop()
    for k in range(npts):
        draws = broker.reseeded(seed, k).ticks(samples_per_point)
        for sid in ids:
            means[sid].append(float(np.mean(neurons[sid].respond(inputs[sid][k], draws[sid]))))
    out = {}
    for sid in ids:
        nrn = neurons[sid]
        out[sid] = TransferCurve(np.array(inputs[sid], dtype=np.int64), np.array(means[sid]),
                                 np.full(npts, samples_per_point),
                                 _curve_meta(nrn, seed, samples_per_point,
                                             {"adapter": broker.adapter_of(sid), "shared": True}))
    return out


def broker_neuron(kind: str, broker: SharedBroker, sub_id, beta: float = 1.0) -> DigitalPNeuron:
    """A neuron whose draws come from ``sub_id`` on ``broker``."""
    return DigitalPNeuron(kind, None, beta, ADAPTER_DISTRIBUTION[broker.adapter_of(sub_id)])


def linf(curve: TransferCurve, reference) -> float:
    return float(np.max(np.abs(curve.means - np.asarray(reference, dtype=float))))


def word_sweep(kind: str, points: int) -> np.ndarray:
    """Evenly spaced inputs across a kind's full word domain."""
    lo, hi = SIGNED_DOMAIN if ENCODINGS[_check_kind(kind)].signedness == TWOS_COMPLEMENT else UNSIGNED_DOMAIN
    return np.round(np.linspace(lo, hi, points)).astype(np.int64)


def probabilistic_range(curve: TransferCurve, lo: float = 0.05, hi: float = 0.95) -> float:
    """Width of the input interval where the normalised mean lies in (lo, hi)."""
    if not 0 <= lo < hi <= 1:
        raise ArgumentError("thresholds must satisfy 0 <= lo < hi <= 1")
    x = np.asarray(curve.inputs, dtype=float)
    y = curve.normalized()
    above = np.flatnonzero(y > lo)
    below = np.flatnonzero(y < hi)
    if len(above) == 0 or above[0] == 0 or len(below) == 0 or below[-1] == len(y) - 1:
        raise DegenerateCurveError(f"curve does not cross both thresholds {lo} and {hi}")
    i, j = above[0], below[-1]
    x_lo = x[i - 1] + (lo - y[i - 1]) / (y[i] - y[i - 1]) * (x[i] - x[i - 1])
    x_hi = x[j] + (hi - y[j]) / (y[j + 1] - y[j]) * (x[j + 1] - x[j])
    return max(float(x_hi - x_lo), 0.0)


def probabilistic_range_theory(tmr: float) -> float:
    """Range-to-supply ratio of the 2M cell: TMR / (2 + TMR)."""
    if tmr < 0:
        raise ArgumentError("TMR must be non-negative")
    return tmr / (2 + tmr)


@dataclass(frozen=True)
class VoltageWordMap:
    """Linear map between a voltage window and the full unsigned word range."""

    v_min: float
    v_max: float

    def __post_init__(self):
        if not self.v_max > self.v_min:
            raise ArgumentError("v_max must exceed v_min")

    def to_word(self, v):
        w = np.rint((np.asarray(v, dtype=float) - self.v_min) / (self.v_max - self.v_min) * WORD_MAX)
        w = np.clip(w, 0, WORD_MAX).astype(np.int64)
        return int(w) if w.ndim == 0 else w

    def to_volts(self, w):
        v = self.v_min + np.asarray(w, dtype=float) / WORD_MAX * (self.v_max - self.v_min)
        return float(v) if v.ndim == 0 else v
