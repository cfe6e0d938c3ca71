"""Boltzmann networks, the p-AND preset and distribution comparison."""
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pneurons.errors import ArgumentError, CapacityError, ConfigurationError
from pneurons.network import (
    P_AND_H,
    P_AND_J,
    P_AND_TRUTH,
    BoltzmannNetwork,
    StateHistogram,
    _shared_broker,
    all_states,
    boltzmann_exact,
    build_p_and,
    compare_distributions,
    energy,
    gibbs_sweep,
    run_histogram,
    state_index,
)

import oracles

TRUTH_IDX = sorted(state_index(s) for s in P_AND_TRUTH)


class TestPAnd:
    def test_ground_energy(self):
        assert energy(P_AND_J, P_AND_H, (1, 1, 1)) == -3
        assert oracles.energy(P_AND_J, P_AND_H, (1, 1, 1)) == -3

    def test_exhaustive_energies(self):
        for m in all_states(3):
            e = energy(P_AND_J, P_AND_H, m)
            assert e == oracles.energy(P_AND_J, P_AND_H, m)
            if tuple(m) in P_AND_TRUTH:
                assert e == -3
            else:
                assert e >= 1

    def test_construction(self):
        net = build_p_and(2.0, seed=1)
        assert np.array_equal(net.J, net.J.T) and np.all(np.diag(net.J) == 0)
        assert net.n == 3 and net.saturation == 6
        assert set(np.abs(net.state).tolist()) == {1}

    def test_bad_i0(self):
        with pytest.raises(ConfigurationError):
            build_p_and(0.0)

    def test_validation(self):
        with pytest.raises(ConfigurationError):
            BoltzmannNetwork([[0, 1], [2, 0]], [0, 0], [1, 1])
        with pytest.raises(ConfigurationError):
            BoltzmannNetwork([[1, 0], [0, 0]], [0, 0], [1, 1])
        with pytest.raises(ConfigurationError):
            BoltzmannNetwork([[0, 0], [0, 0]], [0, 0], [1, 0])
        with pytest.raises(ConfigurationError):
            BoltzmannNetwork([[0, 0], [0, 0]], [0, 0], [1, 1], update_order=[0, 0])

    def test_input_word_map(self):
        net = build_p_and(2.0)
        assert net.input_word(0.0) == 2**31
        assert net.input_word(1e9) == 2**32 - 1 and net.input_word(-1e9) == 0
        assert net.input_word(6.0) == 2**32 - 1 and net.input_word(-6.0) == 0
        assert net.input_word(3.0) == 2**31 + 2**30


class TestExact:
    def test_uniform(self):
        np.testing.assert_allclose(boltzmann_exact(np.zeros((4, 4)), np.zeros(4), 1.3), 1 / 16)

    def test_matches_bruteforce(self):
        for i0 in (0.3, 1.0, 2.0):
            np.testing.assert_allclose(boltzmann_exact(P_AND_J, P_AND_H, i0),
                                       oracles.boltzmann_bruteforce(P_AND_J, P_AND_H, i0), rtol=1e-12)

    def test_ground_states_equal(self):
        p = boltzmann_exact(P_AND_J, P_AND_H, 2.0)
        assert len({p[k] for k in TRUTH_IDX}) == 1
        assert p.sum() == pytest.approx(1.0, abs=1e-12)

    @given(st.integers(2, 6), st.floats(0.1, 3), st.integers(0, 100))
    @settings(max_examples=20, deadline=None)
    def test_random_networks(self, n, i0, s):
        rng = np.random.default_rng(s)
        J = rng.normal(size=(n, n))
        J = np.triu(J, 1)
        J = J + J.T
        h = rng.normal(size=n)
        np.testing.assert_allclose(boltzmann_exact(J, h, i0), oracles.boltzmann_bruteforce(J, h, i0), rtol=1e-9)

    def test_capacity(self):
        with pytest.raises(CapacityError):
            boltzmann_exact(np.zeros((21, 21)), np.zeros(21), 1.0)


class TestCompare:
    def test_identical(self):
        assert compare_distributions([1, 1, 2], [0.25, 0.25, 0.5]).tv_distance == 0

    def test_disjoint(self):
        assert compare_distributions([5, 0], [0, 1]).tv_distance == 1

    def test_arithmetic(self):
        assert compare_distributions([1, 1], [0.75, 0.25]).tv_distance == pytest.approx(0.25)

    def test_kl_smoothing(self):
        c = compare_distributions([3, 1], [0.75, 0.25])
        assert c.kl_divergence == pytest.approx(0.0, abs=1e-15)
        # zero count is floored at 1/(2 total) then renormalised
        p = np.array([4, 1 / 2]) / 4.5
        want = float(np.sum(p * np.log(p / np.array([0.5, 0.5]))))
        assert compare_distributions([4, 0], [0.5, 0.5]).kl_divergence == pytest.approx(want)

    def test_errors(self):
        with pytest.raises(ArgumentError):
            compare_distributions([1, 2, 3], [0.5, 0.5])
        with pytest.raises(ArgumentError):
            compare_distributions([0, 0], [0.5, 0.5])

    def test_histogram_input(self):
        h = StateHistogram(np.array([2, 2]), 5, 1)
        assert h.total == 4 and h.n == 1
        assert compare_distributions(h, [0.5, 0.5]).tv_distance == 0


class TestGibbs:
    def test_kernel_matches_python_sweep(self):
        seed = 11
        net = build_p_and(2.0, seed=seed)
        init = net.state.copy()
        states = []
        for _ in range(300):
            gibbs_sweep(net)
            states.append(state_index(net.state))
        ref = np.bincount(states, minlength=8)
        other = build_p_and(2.0, seed=seed)
        other.state = init
        hist = run_histogram(other, 300, 0, seed)
        assert hist.counts.tolist() == ref.tolist()
        assert state_index(other.state) == states[-1]

    def test_one_count(self):
        hist = run_histogram(build_p_and(), 11, 10, seed=0)
        assert hist.total == 1

    def test_burn_in_validation(self):
        with pytest.raises(ArgumentError):
            run_histogram(build_p_and(), 10, 10, seed=0)
        with pytest.raises(ArgumentError):
            run_histogram(build_p_and(), 10, 0, seed=0, sampler="metropolis")

    def test_determinism(self):
        a = run_histogram(build_p_and(seed=2), 20_000, 100, seed=2)
        b = run_histogram(build_p_and(seed=2), 20_000, 100, seed=2)
        assert a.counts.tolist() == b.counts.tolist()

    def test_chunk_boundary_invariant(self):
        # longer than one internal block: the record-from offset must carry over
        hist = run_histogram(build_p_and(seed=3), 70_000, 66_000, seed=3)
        assert hist.total == 4000

    def test_zero_temperature_limit(self):
        hist = run_histogram(build_p_and(1e6, seed=4), 5000, 50, seed=4)
        assert hist.counts[TRUTH_IDX].sum() == hist.total

    def test_free_coins(self):
        net = BoltzmannNetwork(np.zeros((3, 3)), np.zeros(3), [1, 1, 1])
        hist = run_histogram(net, 200_000, 0, seed=5)
        assert compare_distributions(hist, np.full(8, 1 / 8)).tv_distance < 0.02

    def test_logistic_matches_boltzmann(self):
        # a single-site logistic update preserves the Boltzmann law exactly
        T = oracles.logistic_gibbs_transition(P_AND_J, P_AND_H, 2.0)
        np.testing.assert_allclose(oracles.stationary(T), boltzmann_exact(P_AND_J, P_AND_H, 2.0), atol=1e-12)
        # i0 = 1 mixes fast enough for a short run; i0 = 2 is covered by the acceptance suite
        hist = run_histogram(build_p_and(1.0, seed=6), 200_000, 1000, seed=6, sampler="logistic")
        assert compare_distributions(hist, boltzmann_exact(P_AND_J, P_AND_H, 1.0)).tv_distance < 0.02

    def test_comparator_matches_its_own_chain(self):
        # the comparator network samples the stationary law of its own sweep kernel
        p_up = oracles.comparator_fire_probability(2.0, 6.0)
        target = oracles.stationary(oracles.gibbs_transition(P_AND_J, P_AND_H, p_up))
        hist = run_histogram(build_p_and(seed=7), 300_000, 1000, seed=7)
        assert compare_distributions(hist, target).tv_distance < 0.01

    def test_independent_mode(self):
        a = run_histogram(build_p_and(seed=8), 100_000, 1000, seed=8, rng_mode="independent")
        b = run_histogram(build_p_and(seed=8), 100_000, 1000, seed=8, rng_mode="shared")
        exact = boltzmann_exact(P_AND_J, P_AND_H, 2.0)
        assert abs(compare_distributions(a, exact).tv_distance - compare_distributions(b, exact).tv_distance) < 0.02

    def test_clamp(self):
        # clamping C = +1 runs the gate in reverse; the free neurons follow P(A, B | C = +1)
        net = build_p_and(1.0, seed=9)
        net.clamp = {2: 1}
        net.state[2] = 1
        hist = run_histogram(net, 100_000, 100, seed=9, sampler="logistic")
        p = hist.probabilities
        assert p[[k for k in range(8) if not k & 1]].sum() == 0
        exact = boltzmann_exact(P_AND_J, P_AND_H, 1.0)
        exact[[k for k in range(8) if not k & 1]] = 0
        exact /= exact.sum()
        assert compare_distributions(hist, exact).tv_distance < 0.01
        comparator = build_p_and(2.0, seed=9)
        comparator.clamp = {2: 1}
        comparator.state[2] = 1
        assert run_histogram(comparator, 20_000, 100, seed=9).probabilities[0b111] > 0.85

    def test_random_scan(self):
        net = build_p_and(1.0, seed=10)
        net.random_scan = True
        hist = run_histogram(net, 100_000, 1000, seed=10, sampler="logistic")
        assert compare_distributions(hist, boltzmann_exact(P_AND_J, P_AND_H, 1.0)).tv_distance < 0.02

    def test_csv(self, tmp_path):
        hist = run_histogram(build_p_and(seed=1), 1000, 10, seed=1)
        hist.to_csv(tmp_path / "h.csv", boltzmann_exact(P_AND_J, P_AND_H, 2.0))
        lines = (tmp_path / "h.csv").read_text().splitlines()
        assert lines[0] == "state_bits,count,empirical_p,exact_p"
        assert [ln.split(",")[0] for ln in lines[1:]] == [format(k, "03b") for k in range(8)]

    def test_gibbs_needs_broker(self):
        net = BoltzmannNetwork(np.zeros((2, 2)), np.zeros(2), [1, -1])
        with pytest.raises(ConfigurationError):
            gibbs_sweep(net)
        net.shared = _shared_broker(2, 0)
        gibbs_sweep(net)
        assert net.shared.tick_count == 2


class TestComparatorGap:
    """Exact stationary law of the comparator sweep kernel against Boltzmann (no sampling)."""

    @staticmethod
    def _gap(i0):
        p_up = oracles.comparator_fire_probability(i0, 6.0)
        chain = oracles.stationary(oracles.gibbs_transition(P_AND_J, P_AND_H, p_up))
        return compare_distributions(chain * 1e12, boltzmann_exact(P_AND_J, P_AND_H, i0)).tv_distance

    def test_gap_at_acceptance_gain(self):
        assert self._gap(2.0) == pytest.approx(0.042, abs=0.001)
        assert self._gap(2.0) < 0.05

    @pytest.mark.xfail(strict=True, reason="the saturating word map (S = 6) flattens the triangular "
                                          "comparator's response at weak gain; the gap exceeds 0.05 below i0 = 2")
    @pytest.mark.parametrize("i0", [0.5, 1.0])
    def test_gap_below_acceptance_gain(self, i0):
        assert self._gap(i0) < 0.05
