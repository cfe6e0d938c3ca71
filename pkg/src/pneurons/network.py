"""Fully connected Boltzmann machines of p-Sigmoid neurons.

Neurons update sequentially; each update draws one word from the shared
broker (one broker tick per update) and fires when the mapped synaptic
input exceeds it.  Exact enumeration provides the reference
distribution.
"""
from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from . import _kernels
from .entropy import WORD_MAX, WORD_MID, IrwinHallUnit, SharedBroker
from .errors import ArgumentError, CapacityError, ConfigurationError
from .seeding import generator

MAX_ENUMERATION = 20
_CHUNK = 1 << 16

P_AND_J = ((0.0, -1.0, 2.0), (-1.0, 0.0, 2.0), (2.0, 2.0, 0.0))
P_AND_H = (1.0, 1.0, -2.0)
P_AND_TRUTH = ((-1, -1, -1), (-1, 1, -1), (1, -1, -1), (1, 1, 1))


def _shared_broker(n: int, seed: int, index=0) -> SharedBroker:
    broker = SharedBroker.from_seed(seed, index)
    for i in range(n):
        broker.subscribe(i, "irwin_hall_sum")
    return broker


@dataclass
class BoltzmannNetwork:
    J: np.ndarray
    h: np.ndarray
    state: np.ndarray
    i0: float = 2.0
    update_order: Optional[np.ndarray] = None
    shared: Optional[SharedBroker] = None
    clamp: dict = field(default_factory=dict)
    random_scan: bool = False

    def __post_init__(self):
        self.J = np.array(self.J, dtype=float)
        self.h = np.array(self.h, dtype=float)
        self.state = np.array(self.state, dtype=np.int64)
        n = len(self.h)
        if self.J.shape != (n, n):
            raise ConfigurationError("J must be n x n with n = len(h)")
        if not np.array_equal(self.J, self.J.T) or np.any(np.diag(self.J) != 0):
            raise ConfigurationError("J must be symmetric with zero diagonal")
        if self.state.shape != (n,) or not np.all(np.abs(self.state) == 1):
            raise ConfigurationError("state must be a length-n vector of +/-1")
        if not self.i0 > 0:
            raise ConfigurationError("i0 must be positive")
        if self.update_order is None:
            self.update_order = np.arange(n)
        self.update_order = np.array(self.update_order, dtype=np.int64)
        if sorted(self.update_order.tolist()) != list(range(n)):
            raise ConfigurationError("update_order must be a permutation of 0..n-1")
        for i, v in self.clamp.items():
            if not 0 <= i < n or v not in (-1, 1):
                raise ConfigurationError(f"bad clamp {i}: {v}")
            self.state[i] = v

    @property
    def n(self) -> int:
        return len(self.h)

    @property
    def saturation(self) -> float:
        """max_i (sum_j |J_ij| + |h_i|), the largest synaptic magnitude at i0 = 1."""
        return float(np.max(np.abs(self.J).sum(axis=1) + np.abs(self.h)))

    @property
    def free(self) -> np.ndarray:
        return np.array([i for i in self.update_order if i not in self.clamp], dtype=np.int64)

    @property
    def word_scale(self) -> float:
        """Word units per unit synaptic input; with no couplings every input is 0."""
        s = self.saturation
        return (WORD_MAX + 1) / (2 * s) if s > 0 else 1.0

    def synaptic_input(self, i: int) -> float:
        return self.i0 * (float(self.J[i] @ self.state) + self.h[i])

    def input_word(self, synaptic) -> int:
        """Map a synaptic input onto the comparator word range, saturating."""
        return int(np.clip(WORD_MID + np.rint(synaptic * self.word_scale), 0, WORD_MAX))


def energy(J, h, m) -> float:
    """E(m) = -(sum_{i<j} J_ij m_i m_j + sum_i h_i m_i)."""
    m = np.asarray(m, dtype=float)
    J = np.asarray(J, dtype=float)
    return float(-(0.5 * m @ J @ m + np.asarray(h, dtype=float) @ m))


def build_p_and(i0: float = 2.0, seed: int = 0) -> BoltzmannNetwork:
    """Three-neuron AND gate (A, B, C = A AND B) on a shared broker."""
    if not i0 > 0:
        raise ConfigurationError("i0 must be positive")
    state = generator(seed, "network/init").choice([-1, 1], size=3)
    return BoltzmannNetwork(np.array(P_AND_J), np.array(P_AND_H), state, i0,
                            shared=_shared_broker(3, seed))


def state_index(state) -> int:
    """Bit pattern with neuron 0 as the most significant bit; +1 -> 1."""
    idx = 0
    for s in state:
        idx = 2 * idx + (1 if s > 0 else 0)
    return idx


def state_bits(index: int, n: int) -> str:
    return format(index, f"0{n}b")


def all_states(n: int) -> np.ndarray:
    """Every bipolar state, row k having state_index k."""
    return np.array(list(itertools.product((-1, 1), repeat=n)), dtype=np.int64)


def gibbs_sweep(net: BoltzmannNetwork) -> BoltzmannNetwork:
    """One sequential sweep; each free neuron consumes one broker tick."""
    if net.shared is None:
        raise ConfigurationError("network has no shared stochastic unit")
    for i in net.free:
        word = net.input_word(net.synaptic_input(i))
        r = dict(net.shared.tick())[int(i)]
        net.state[i] = 1 if word > r else -1
    return net


@dataclass
class StateHistogram:
    counts: np.ndarray
    sweeps: int
    burn_in: int

    @property
    def n(self) -> int:
        return int(np.log2(len(self.counts)))

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def probabilities(self) -> np.ndarray:
        return self.counts / self.total

    def to_csv(self, path, exact: Optional[np.ndarray] = None) -> None:
        p = self.probabilities
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["state_bits", "count", "empirical_p", "exact_p"])
            for k, c in enumerate(self.counts):
                ex = "" if exact is None else f"{exact[k]:.9g}"
                w.writerow([state_bits(k, self.n), int(c), f"{p[k]:.9g}", ex])


SAMPLERS = ("comparator", "logistic")
RNG_MODES = ("shared", "independent")


def _orders(net: BoltzmannNetwork, rng, count: int) -> np.ndarray:
    free = net.free
    if net.random_scan:
        return np.array([rng.permutation(free) for _ in range(count)], dtype=np.int64)
    return np.tile(free, (count, 1))


def run_histogram(net: BoltzmannNetwork, sweeps: int, burn_in: int, seed: int,
                  sampler: str = "comparator", rng_mode: str = "shared") -> StateHistogram:
    """Run ``sweeps`` sweeps from ``net.state``; record one state per post-burn-in sweep.

    ``sampler="logistic"`` replaces the comparator by an exact
    ``sigma(2 I)`` draw.  ``rng_mode="independent"`` gives every neuron
    its own Irwin-Hall unit instead of the shared broker.  The network's
    state is left at the final sweep.
    """
    if sampler not in SAMPLERS:
        raise ArgumentError(f"unknown sampler {sampler!r}")
    if rng_mode not in RNG_MODES:
        raise ArgumentError(f"unknown rng mode {rng_mode!r}")
    if not sweeps > burn_in >= 0:
        raise ArgumentError("need sweeps > burn_in >= 0")
    counts = np.zeros(2**net.n, dtype=np.int64)
    free = net.free
    nf = len(free)
    scan_rng = generator(seed, "network/scan")
    if sampler == "logistic":
        urng = generator(seed, "network/logistic")
    elif rng_mode == "shared":
        broker = _shared_broker(net.n, seed)
    else:
        units = {int(i): IrwinHallUnit.from_seed(seed, (int(i), 1)) for i in free}
    scale = net.word_scale
    state = net.state.copy()
    done = 0
    while done < sweeps:
        m = min(_CHUNK, sweeps - done)
        orders = _orders(net, scan_rng, m)
        record_from = max(0, burn_in - done)
        if sampler == "logistic":
            u = urng.random((m, nf))
            _kernels.gibbs_logistic(net.J, net.h, net.i0, orders, state, u, counts, record_from)
        else:
            if rng_mode == "shared":
                draws = broker.ticks(m * nf)[0].reshape(m, nf)
            else:
                draws = _independent_draws(orders, {i: units[i].draws(m) for i in units})
            _kernels.gibbs_comparator(net.J, net.h, net.i0, orders, state, draws,
                                      float(WORD_MID), scale, float(WORD_MAX), counts, record_from)
        done += m
    net.state = state
    return StateHistogram(counts, sweeps, burn_in)


def _independent_draws(orders: np.ndarray, per: dict) -> np.ndarray:
    draws = np.empty(orders.shape, dtype=np.int64)
    for i, stream in per.items():
        # neuron i updates exactly once per sweep
        rows, cols = np.nonzero(orders == i)
        draws[rows, cols] = stream
    return draws


def boltzmann_exact(J, h, i0: float) -> np.ndarray:
    """P(m) proportional to exp(-i0 E(m)), indexed by :func:`state_index`."""
    J = np.asarray(J, dtype=float)
    h = np.asarray(h, dtype=float)
    n = len(h)
    if n > MAX_ENUMERATION:
        raise CapacityError(f"exact enumeration is limited to {MAX_ENUMERATION} neurons")
    states = all_states(n).astype(float)
    energies = -(0.5 * np.einsum("ki,ij,kj->k", states, J, states) + states @ h)
    logw = -i0 * energies
    w = np.exp(logw - logw.max())
    return w / w.sum()


class DistributionComparison(NamedTuple):
    tv_distance: float
    kl_divergence: float


def compare_distributions(empirical, exact) -> DistributionComparison:
    """TV distance and KL(empirical || exact); zero counts are floored at 1/(2 total)."""
    if isinstance(empirical, StateHistogram):
        counts = empirical.counts.astype(float)
    else:
        counts = np.asarray(empirical, dtype=float)
    exact = np.asarray(exact, dtype=float)
    if counts.shape != exact.shape:
        raise ArgumentError("state-space sizes differ")
    total = counts.sum()
    if not total > 0:
        raise ArgumentError("empirical distribution is empty")
    p_hat = counts / total
    tv = 0.5 * float(np.abs(p_hat - exact).sum())
    smoothed = np.maximum(p_hat, 1.0 / (2 * total))
    smoothed /= smoothed.sum()
    q = np.maximum(exact, np.finfo(float).tiny)
    kl = float(np.sum(smoothed * np.log(smoothed / q)))
    return DistributionComparison(tv, kl)
