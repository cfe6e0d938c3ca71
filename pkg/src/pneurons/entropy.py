"""Stochastic units: LFSR-based digital sources, resistive-divider cells
driven by sMTJ conductance, and a broker that shares one source.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels
from .errors import ConfigurationError, DeviceModelError, RegistrationError, SeedError
from .seeding import generator, nonzero_words
from .sllg import SllgParams, SllgStream, SmtjState, conductance_bounds, random_direction
from .stats import DistributionStats, distribution_stats  # noqa: F401  (re-export)

MAXIMAL_TAPS_32 = (32, 22, 2, 1)
WORD_BITS = 32
WORD_MAX = (1 << WORD_BITS) - 1
WORD_MID = 1 << (WORD_BITS - 1)


class Lfsr:
    """Fibonacci LFSR shifting toward the MSB.

    Tap ``p`` reads bit ``p - 1``; the XOR of the tapped bits enters at
    bit 0.  :meth:`step` is one shift.  :meth:`draw` clocks
    ``shifts_per_draw`` shifts (a full word by default) so consecutive
    draws share no bits.
    """

    def __init__(self, seed: int, taps=MAXIMAL_TAPS_32, width: int = WORD_BITS,
                 shifts_per_draw: Optional[int] = None):
        taps = tuple(int(t) for t in taps)
        if not taps or max(taps) != width or min(taps) < 1 or len(set(taps)) != len(taps):
            raise ConfigurationError(f"taps {taps} do not describe a width-{width} register")
        self.width = width
        self.taps = taps
        self.mask = (1 << width) - 1
        seed = int(seed)
        if seed == 0:
            raise SeedError("LFSR seed must be nonzero (the all-zero state is absorbing)")
        if not 0 < seed <= self.mask:
            raise SeedError(f"seed {seed:#x} does not fit in {width} bits")
        self.state = seed
        self.seed = seed
        self.shifts_per_draw = int(shifts_per_draw or width)
        if self.shifts_per_draw < 1:
            raise ConfigurationError("shifts_per_draw must be >= 1")
        self._feedback = sum(1 << (t - 1) for t in taps)
        self._tables = None

    def step(self) -> int:
        fb = (self.state & self._feedback).bit_count() & 1
        self.state = ((self.state << 1) | fb) & self.mask
        return self.state

    def draw(self) -> int:
        for _ in range(self.shifts_per_draw):
            self.step()
        return self.state

    def _leap_tables(self) -> np.ndarray:
        # shifting is linear over GF(2): tabulate the image of each byte
        if self._tables is None:
            images = []
            for bit in range(self.width):
                probe = Lfsr(1 << bit, self.taps, self.width, self.shifts_per_draw)
                images.append(probe.draw())
            nbytes = (self.width + 7) // 8
            tables = np.zeros((nbytes, 256), dtype=np.int64)
            for b in range(nbytes):
                for v in range(1, 256):
                    low = (v & -v).bit_length() - 1
                    src = 8 * b + low
                    img = images[src] if src < self.width else 0
                    tables[b, v] = tables[b, v & (v - 1)] ^ img
            self._tables = tables
        return self._tables

    def draws(self, n: int) -> np.ndarray:
        """``n`` successive draws as int64; identical to calling :meth:`draw` n times."""
        if n <= 0:
            return np.empty(0, dtype=np.int64)
        out = _kernels.lfsr_leap_fill(self.state, self._leap_tables(), int(n))
        self.state = int(out[-1])
        return out

    def copy(self) -> "Lfsr":
        twin = Lfsr(self.state, self.taps, self.width, self.shifts_per_draw)
        twin.seed = self.seed
        twin._tables = self._tables
        return twin


def lfsr32_step(lfsr: Lfsr) -> int:
    return lfsr.step()


def read_golden(path) -> tuple[int, list[int]]:
    """Golden-vector file: hex words one per line, the first being the seed."""
    with open(path) as fh:
        words = [int(line.strip(), 16) for line in fh if line.strip()]
    return words[0], words[1:]


def write_golden(path, seed: int, draws) -> None:
    with open(path, "w") as fh:
        fh.write(f"{seed:08X}\n")
        for w in draws:
            fh.write(f"{int(w):08X}\n")


def check_golden(path, taps=MAXIMAL_TAPS_32) -> tuple[bool, list[tuple[int, int, int]]]:
    """Step an LFSR from the file's seed; returns (ok, mismatches as (index, want, got))."""
    seed, want = read_golden(path)
    lfsr = Lfsr(seed, taps)
    got = [lfsr.step() for _ in want]
    bad = [(i, w, g) for i, (w, g) in enumerate(zip(want, got)) if w != g]
    return not bad, bad


# ---------------------------------------------------------------------------
# digital units


class _DigitalUnit:
    distribution = ""
    midpoint = WORD_MID

    def draw(self) -> int:
        return int(self.draws(1)[0])


class IrwinHallUnit(_DigitalUnit):
    """Two LFSRs summed at 33 bits and halved: a triangular 32-bit word."""

    distribution = "triangular"

    def __init__(self, lfsr_a: Lfsr, lfsr_b: Lfsr):
        if lfsr_a.width != WORD_BITS or lfsr_b.width != WORD_BITS:
            raise ConfigurationError("Irwin-Hall unit needs two 32-bit LFSRs")
        if lfsr_a.seed == lfsr_b.seed:
            raise SeedError("the two LFSRs must be seeded differently")
        self.lfsr_a = lfsr_a
        self.lfsr_b = lfsr_b

    @classmethod
    def from_seed(cls, seed: int, index=0, taps=MAXIMAL_TAPS_32, shifts_per_draw=None):
        sa, sb = nonzero_words(seed, "irwin_hall", index, count=2)
        return cls(Lfsr(sa, taps, shifts_per_draw=shifts_per_draw),
                   Lfsr(sb, taps, shifts_per_draw=shifts_per_draw))

    def reseeded(self, seed: int, index=0) -> "IrwinHallUnit":
        return self.from_seed(seed, index, self.lfsr_a.taps, self.lfsr_a.shifts_per_draw)

    def draws(self, n: int) -> np.ndarray:
        return (self.lfsr_a.draws(n) + self.lfsr_b.draws(n)) >> 1


def irwin_hall_sum(a, b):
    """Top 32 bits of the 33-bit sum ``a + b``."""
    return (a + b) >> 1


def irwin_hall_draw(unit: IrwinHallUnit) -> int:
    return unit.draw()


class UniformUnit(_DigitalUnit):
    """One LFSR; every draw is a uniformly distributed nonzero word."""

    distribution = "uniform"

    def __init__(self, lfsr: Lfsr):
        if lfsr.width != WORD_BITS:
            raise ConfigurationError("uniform unit needs a 32-bit LFSR")
        self.lfsr = lfsr

    @classmethod
    def from_seed(cls, seed: int, index=0, taps=MAXIMAL_TAPS_32, shifts_per_draw=None):
        (s,) = nonzero_words(seed, "uniform", index, count=1)
        return cls(Lfsr(s, taps, shifts_per_draw=shifts_per_draw))

    def reseeded(self, seed: int, index=0) -> "UniformUnit":
        return self.from_seed(seed, index, self.lfsr.taps, self.lfsr.shifts_per_draw)

    def draws(self, n: int) -> np.ndarray:
        return self.lfsr.draws(n)


ADAPTERS = ("irwin_hall_sum", "single_word")
ADAPTER_DISTRIBUTION = {"irwin_hall_sum": "triangular", "single_word": "uniform"}


class SharedBroker:
    """One two-LFSR source whose per-tick words are fanned out to subscribers.

    ``irwin_hall_sum`` subscribers receive ``(a + b) >> 1`` and
    ``single_word`` subscribers receive ``a``, where ``a, b`` are the
    words drawn on that tick.
    """

    def __init__(self, lfsr_a: Lfsr, lfsr_b: Lfsr, record: bool = False):
        if lfsr_a.seed == lfsr_b.seed:
            raise SeedError("the two source LFSRs must be seeded differently")
        self.lfsr_a = lfsr_a
        self.lfsr_b = lfsr_b
        self.subscribers: list[tuple[object, str]] = []
        self.tick_count = 0
        self.record = record
        self.log: list[list[tuple[object, int]]] = []

    @classmethod
    def from_seed(cls, seed: int, index=0, taps=MAXIMAL_TAPS_32, record=False,
                  shifts_per_draw=None) -> "SharedBroker":
        sa, sb = nonzero_words(seed, "broker", index, count=2)
        return cls(Lfsr(sa, taps, shifts_per_draw=shifts_per_draw),
                   Lfsr(sb, taps, shifts_per_draw=shifts_per_draw), record=record)

    def reseeded(self, seed: int, index=0) -> "SharedBroker":
        twin = self.from_seed(seed, index, self.lfsr_a.taps, self.record,
                              self.lfsr_a.shifts_per_draw)
        for sid, adapter in self.subscribers:
            twin.subscribe(sid, adapter)
        return twin

    def subscribe(self, sub_id, adapter: str) -> None:
        if adapter not in ADAPTERS:
            raise RegistrationError(f"unknown adapter {adapter!r}; expected one of {ADAPTERS}")
        if any(sid == sub_id for sid, _ in self.subscribers):
            raise RegistrationError(f"subscriber {sub_id!r} is already registered")
        self.subscribers.append((sub_id, adapter))

    def adapter_of(self, sub_id) -> str:
        for sid, adapter in self.subscribers:
            if sid == sub_id:
                return adapter
        raise RegistrationError(f"no subscriber {sub_id!r}")

    def tick(self) -> list[tuple[object, int]]:
        out = self.ticks(1)
        return [(sid, int(out[sid][0])) for sid, _ in self.subscribers]

    def ticks(self, n: int) -> dict:
        """``n`` ticks at once: subscriber id -> array of its draws."""
        if not self.subscribers:
            raise RegistrationError("broker has no subscribers")
        a = self.lfsr_a.draws(n)
        b = self.lfsr_b.draws(n)
        summed = None
        out = {}
        for sid, adapter in self.subscribers:
            if adapter == "single_word":
                out[sid] = a
            else:
                if summed is None:
                    summed = (a + b) >> 1
                out[sid] = summed
        self.tick_count += n
        if self.record:
            for t in range(n):
                self.log.append([(sid, int(out[sid][t])) for sid, _ in self.subscribers])
        return out


def broker_tick(broker: SharedBroker) -> list[tuple[object, int]]:
    return broker.tick()


# ---------------------------------------------------------------------------
# analog cells


def divider_2m(v_dd: float, g_top, g_bottom):
    """Midpoint voltage of two conductances in series, top device on the supply."""
    g_top = np.asarray(g_top, dtype=float)
    g_bottom = np.asarray(g_bottom, dtype=float)
    if np.any(g_top <= 0) or np.any(g_bottom <= 0):
        raise DeviceModelError("divider conductances must be positive")
    v = v_dd * g_top / (g_top + g_bottom)
    return float(v) if v.ndim == 0 else v


def divider_1m1r(v_ext: float, g_mtj, r1: float):
    """sMTJ on the supply, fixed resistor ``r1`` to ground."""
    if not r1 > 0:
        raise ConfigurationError("r1 must be positive")
    g_mtj = np.asarray(g_mtj, dtype=float)
    if np.any(g_mtj < 0):
        raise DeviceModelError("sMTJ conductance must be non-negative")
    v = v_ext * g_mtj / (g_mtj + 1.0 / r1)
    return float(v) if v.ndim == 0 else v


CELL_SLLG = SllgParams(dt=2e-9)
CELL_STEPS_PER_TICK = 8
SOURCES = ("sllg", "stationary")


class _Smtj:
    """One sMTJ of a cell: its conductance per tick from sLLG or from the stationary law."""

    def __init__(self, g0, polarization, source, sllg, steps_per_tick, rng):
        if source not in SOURCES:
            raise ConfigurationError(f"unknown conductance source {source!r}")
        self.g0 = g0
        self.polarization = polarization
        self.source = source
        self.rng = rng
        init = SmtjState(tuple(random_direction(rng)), g0, polarization)
        self.stream = SllgStream(sllg, init, rng, steps_per_tick) if source == "sllg" else None

    @property
    def state(self) -> SmtjState:
        return self.stream.state if self.stream else None

    def conductances(self, n: int) -> np.ndarray:
        if self.stream is not None:
            return self.stream.conductances(n)
        mz = self.rng.uniform(-1.0, 1.0, n)
        return self.g0 * (1 + self.polarization**2 * mz)


@dataclass
class TwoMCell:
    """Two identical sMTJs in series; emits the midpoint voltage."""

    v_dd: float = 0.8
    g0: float = 1e-6
    polarization: float = 0.7
    source: str = "sllg"
    sllg: SllgParams = CELL_SLLG
    steps_per_tick: int = CELL_STEPS_PER_TICK
    seed: int = 0
    index: object = 0
    _top: _Smtj = field(init=False, repr=False)
    _bottom: _Smtj = field(init=False, repr=False)

    def __post_init__(self):
        if not self.v_dd > 0:
            raise ConfigurationError("v_dd must be positive")
        self._top = _Smtj(self.g0, self.polarization, self.source, self.sllg,
                          self.steps_per_tick, generator(self.seed, "2m/top", self.index))
        self._bottom = _Smtj(self.g0, self.polarization, self.source, self.sllg,
                             self.steps_per_tick, generator(self.seed, "2m/bottom", self.index))

    @property
    def smtj_top(self):
        return self._top.state

    @property
    def smtj_bottom(self):
        return self._bottom.state

    @property
    def support(self) -> tuple[float, float]:
        g_ap, g_p = conductance_bounds(self.g0, self.polarization)
        return self.v_dd * g_ap / (g_ap + g_p), self.v_dd * g_p / (g_ap + g_p)

    @property
    def midpoint(self) -> float:
        return self.v_dd / 2

    def reseeded(self, seed: int, index=0) -> "TwoMCell":
        return TwoMCell(self.v_dd, self.g0, self.polarization, self.source, self.sllg,
                        self.steps_per_tick, seed, index)

    def samples(self, n: int) -> np.ndarray:
        return divider_2m(self.v_dd, self._top.conductances(n), self._bottom.conductances(n))

    def sample(self) -> float:
        return float(self.samples(1)[0])


def divider_2m_sample(cell: TwoMCell) -> float:
    return cell.sample()


@dataclass
class OneM1RCell:
    """One sMTJ on an extended supply over a fixed resistor.

    ``r1`` defaults to ``0.35 / g0``; the supply is ``v_dd * (1 + alpha_cell)``.
    """

    v_dd: float = 0.8
    g0: float = 1e-6
    polarization: float = 0.7
    r1: Optional[float] = None
    alpha_cell: float = 0.155
    source: str = "sllg"
    sllg: SllgParams = CELL_SLLG
    steps_per_tick: int = CELL_STEPS_PER_TICK
    seed: int = 0
    index: object = 0
    _smtj: _Smtj = field(init=False, repr=False)

    def __post_init__(self):
        if self.r1 is None:
            self.r1 = 0.35 / self.g0
        if not self.r1 > 0:
            raise ConfigurationError("r1 must be positive")
        if not self.v_dd > 0:
            raise ConfigurationError("v_dd must be positive")
        self._smtj = _Smtj(self.g0, self.polarization, self.source, self.sllg,
                           self.steps_per_tick, generator(self.seed, "1m1r", self.index))

    @property
    def smtj(self):
        return self._smtj.state

    @property
    def v_ext(self) -> float:
        return self.v_dd * (1 + self.alpha_cell)

    @property
    def support(self) -> tuple[float, float]:
        g_lo, g_hi = conductance_bounds(self.g0, self.polarization)
        return divider_1m1r(self.v_ext, g_lo, self.r1), divider_1m1r(self.v_ext, g_hi, self.r1)

    @property
    def midpoint(self) -> float:
        lo, hi = self.support
        return 0.5 * (lo + hi)

    def reseeded(self, seed: int, index=0) -> "OneM1RCell":
        return OneM1RCell(self.v_dd, self.g0, self.polarization, self.r1, self.alpha_cell,
                          self.source, self.sllg, self.steps_per_tick, seed, index)

    def samples(self, n: int) -> np.ndarray:
        return divider_1m1r(self.v_ext, self._smtj.conductances(n), self.r1)

    def sample(self) -> float:
        return float(self.samples(1)[0])


def divider_1m1r_sample(cell: OneM1RCell) -> float:
    return cell.sample()
