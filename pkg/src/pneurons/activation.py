"""Instantaneous activation units.

Digital units compare the input word with the stochastic word; the
analog unit is a behavioural amplifier with finite gain, rails and slew.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import ConfigurationError

UNSIGNED = "unsigned_fixed_point"
TWOS_COMPLEMENT = "twos_complement"
BIPOLAR = "bipolar"
UNIPOLAR = "unipolar"

SIGN_BIT = 1 << 31


@dataclass(frozen=True)
class DigitalEncoding:
    signedness: str = UNSIGNED
    output_polarity: str = BIPOLAR

    def __post_init__(self):
        if self.signedness not in (UNSIGNED, TWOS_COMPLEMENT):
            raise ConfigurationError(f"unknown signedness {self.signedness!r}")
        if self.output_polarity not in (BIPOLAR, UNIPOLAR):
            raise ConfigurationError(f"unknown output polarity {self.output_polarity!r}")

    @property
    def low(self) -> int:
        return -1 if self.output_polarity == BIPOLAR else 0


ENCODINGS = {
    "p_tanh": DigitalEncoding(UNSIGNED, BIPOLAR),
    "p_sigmoid": DigitalEncoding(UNSIGNED, UNIPOLAR),
    "p_relu": DigitalEncoding(TWOS_COMPLEMENT, UNIPOLAR),
    "p_linear": DigitalEncoding(TWOS_COMPLEMENT, BIPOLAR),
}


def to_signed(word):
    """Reinterpret 32-bit patterns as two's-complement integers."""
    if isinstance(word, np.ndarray):
        w = word.astype(np.int64) & 0xFFFFFFFF
        return np.where(w & SIGN_BIT, w - (1 << 32), w)
    w = int(word) & 0xFFFFFFFF
    return w - (1 << 32) if w & SIGN_BIT else w


def to_word(value):
    """Inverse of :func:`to_signed`: the 32-bit pattern of an integer."""
    if isinstance(value, np.ndarray):
        return value.astype(np.int64) & 0xFFFFFFFF
    return int(value) & 0xFFFFFFFF


def decode(word, signedness: str):
    return to_signed(word) if signedness == TWOS_COMPLEMENT else word


def polarize(fired, polarity: str):
    """Map comparator bits (bool or 0/1) to the output alphabet."""
    if isinstance(fired, np.ndarray):
        bits = fired.astype(np.int64)
        return 2 * bits - 1 if polarity == BIPOLAR else bits
    bit = int(bool(fired))
    return 2 * bit - 1 if polarity == BIPOLAR else bit


def compare(i_in, r, enc: DigitalEncoding):
    """Strict ``i_in > r`` under ``enc``; ties give the low output."""
    return polarize(decode(i_in, enc.signedness) > decode(r, enc.signedness), enc.output_polarity)


def relu_gate(i_in, r):
    """MSB-gated rectifier: a negative input forces 0, otherwise unipolar compare."""
    enc = ENCODINGS["p_relu"]
    if isinstance(i_in, np.ndarray) or isinstance(r, np.ndarray):
        negative = (np.asarray(i_in, dtype=np.int64) & SIGN_BIT) != 0
        return np.where(negative, 0, compare(np.asarray(i_in), np.asarray(r), enc))
    if int(i_in) & SIGN_BIT:
        return 0
    return compare(i_in, r, enc)


@dataclass
class AnalogAmpParams:
    gain: float = 1e3
    slew_rate: float = np.inf
    rail_low: float = -0.4
    rail_high: float = 0.4
    dt: float = 1e-9
    state_v_out: float = 0.0

    def __post_init__(self):
        if not self.rail_low < self.rail_high:
            raise ConfigurationError("rail_low must be below rail_high")
        if not self.dt > 0:
            raise ConfigurationError("dt must be positive")
        if not (self.gain > 0 and self.slew_rate > 0):
            raise ConfigurationError("gain and slew rate must be positive")
        self.state_v_out = float(np.clip(self.state_v_out, self.rail_low, self.rail_high))

    @property
    def center(self) -> float:
        return 0.5 * (self.rail_low + self.rail_high)

    @property
    def max_step(self) -> float:
        return self.slew_rate * self.dt

    def target(self, v_diff):
        """Rail-clamped amplified input, referred to the mid-rail level."""
        v_diff = np.asarray(v_diff, dtype=float)
        if np.isinf(self.gain):
            raw = self.center + np.sign(v_diff) * np.inf
            raw = np.where(v_diff == 0, self.center, raw)
        else:
            raw = self.center + self.gain * v_diff
        out = np.clip(raw, self.rail_low, self.rail_high)
        return float(out) if out.ndim == 0 else out


def amp_step(v_diff: float, params: AnalogAmpParams) -> float:
    """Advance the output one tick toward its target, limited by the slew rate."""
    target = params.target(v_diff)
    step = np.clip(target - params.state_v_out, -params.max_step, params.max_step)
    params.state_v_out = float(np.clip(params.state_v_out + step, params.rail_low, params.rail_high))
    return params.state_v_out


def amp_run(v_diffs, params: AnalogAmpParams) -> np.ndarray:
    """:func:`amp_step` over a whole sequence; leaves ``params`` at the final state."""
    targets = np.atleast_1d(params.target(v_diffs)).astype(float)
    if len(targets) == 0:
        return targets
    if np.isinf(params.max_step):
        out = targets
    else:
        # float rounding in the slew steps can land just outside a rail
        out = np.clip(_kernels.slew_run(targets, params.state_v_out, params.max_step),
                      params.rail_low, params.rail_high)
    params.state_v_out = float(out[-1])
    return out


def ideal_amp(rail_low: float, rail_high: float) -> AnalogAmpParams:
    """Infinite gain and slew: a clamped comparator."""
    return AnalogAmpParams(np.inf, np.inf, rail_low, rail_high, state_v_out=0.5 * (rail_low + rail_high))


def default_amp(rail_low: float, rail_high: float, dt: float = 1e-9,
                slew_fraction: float = 0.55) -> AnalogAmpParams:
    """Gain 1e3 with a slew limit of ``slew_fraction`` of the rail span per tick."""
    span = rail_high - rail_low
    return AnalogAmpParams(1e3, slew_fraction * span / dt, rail_low, rail_high, dt,
                           state_v_out=0.5 * (rail_low + rail_high))
