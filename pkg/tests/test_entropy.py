"""Digital stochastic units, the shared broker and the analog divider cells."""
import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pneurons.entropy import (
    MAXIMAL_TAPS_32,
    IrwinHallUnit,
    Lfsr,
    OneM1RCell,
    SharedBroker,
    TwoMCell,
    UniformUnit,
    broker_tick,
    check_golden,
    distribution_stats,
    divider_1m1r,
    divider_2m,
    irwin_hall_draw,
    irwin_hall_sum,
    lfsr32_step,
    read_golden,
)
from pneurons.cli import default_golden_path
from pneurons.errors import ConfigurationError, DeviceModelError, InsufficientDataError, RegistrationError, SeedError
from pneurons.stats import is_unimodal, ks_statistic

import oracles

WORDS = st.integers(1, 2**32 - 1)
P = 0.7
G_P, G_AP = 1 + P**2, 1 - P**2


class TestLfsr:
    def test_zero_seed_rejected(self):
        with pytest.raises(SeedError):
            Lfsr(0)

    def test_oversized_seed_rejected(self):
        with pytest.raises(SeedError):
            Lfsr(1 << 32)

    def test_bad_taps_rejected(self):
        with pytest.raises(ConfigurationError):
            Lfsr(1, (31, 3))

    def test_reduced_width_period(self):
        n, states = oracles.lfsr_period(1, (8, 6, 5, 4), 8)
        assert n == 255 and len(states) == 255 and 0 not in states
        lfsr = Lfsr(1, (8, 6, 5, 4), width=8)
        seen = {lfsr.step() for _ in range(255)}
        assert len(seen) == 255
        assert lfsr.state == 1

    def test_32bit_maximal_period(self):
        # order of the step matrix is exactly 2^32 - 1
        order = 2**32 - 1
        m = oracles.lfsr_companion(MAXIMAL_TAPS_32, 32)
        identity = [1 << r for r in range(32)]
        assert oracles.gf2_matpow(m, order) == identity
        for p in (3, 5, 17, 257, 65537):
            assert oracles.gf2_matpow(m, order // p) != identity

    def test_companion_matches_step(self):
        m = oracles.lfsr_companion(MAXIMAL_TAPS_32, 32)
        lfsr = Lfsr(0xDEADBEEF)
        for _ in range(50):
            before = lfsr.state
            after = sum((bin(m[r] & before).count("1") & 1) << r for r in range(32))
            assert lfsr.step() == after

    @given(WORDS, st.integers(1, 80))
    @settings(max_examples=50, deadline=None)
    def test_step_matches_bit_oracle(self, seed, steps):
        lfsr = Lfsr(seed)
        got = [lfsr32_step(lfsr) for _ in range(steps)]
        assert got == oracles.lfsr_bits(seed, MAXIMAL_TAPS_32, 32, steps)

    @given(WORDS, st.integers(1, 64), st.integers(1, 300))
    @settings(max_examples=40, deadline=None)
    def test_draws_equal_repeated_draw(self, seed, shifts, n):
        a, b = Lfsr(seed, shifts_per_draw=shifts), Lfsr(seed, shifts_per_draw=shifts)
        bulk = a.draws(n)
        single = [b.draw() for _ in range(n)]
        assert bulk.tolist() == single
        assert a.state == b.state

    def test_draw_is_one_word_of_shifts(self):
        lfsr = Lfsr(5)
        assert lfsr.draw() == oracles.lfsr_bits(5, MAXIMAL_TAPS_32, 32, 32)[-1]

    @given(WORDS)
    @settings(max_examples=25, deadline=None)
    def test_determinism(self, seed):
        assert Lfsr(seed).draws(100).tolist() == Lfsr(seed).draws(100).tolist()

    def test_copy_is_independent(self):
        a = Lfsr(77)
        a.draws(3)
        b = a.copy()
        assert a.draws(10).tolist() == b.draws(10).tolist()


class TestGolden:
    def test_packaged_vectors_match_oracle(self):
        seed, words = read_golden(default_golden_path())
        assert seed == 1 and len(words) == 10
        assert words == oracles.lfsr_bits(1, MAXIMAL_TAPS_32, 32, 10)

    def test_check_golden_passes(self):
        ok, bad = check_golden(default_golden_path())
        assert ok and bad == []

    def test_check_golden_reports_mismatch(self, tmp_path):
        path = tmp_path / "g.txt"
        path.write_text("00000001\n00000003\n00000007\n")
        ok, bad = check_golden(path)
        assert not ok and bad == [(1, 7, 6)]


class TestIrwinHall:
    @pytest.mark.parametrize("a,b,want", [
        (0, 0, 0),
        (0xFFFFFFFF, 0xFFFFFFFF, 0xFFFFFFFF),
        (0, 0xFFFFFFFF, 0x7FFFFFFF),
    ])
    def test_examples(self, a, b, want):
        assert irwin_hall_sum(a, b) == want

    @given(st.integers(0, 2**32 - 1), st.integers(0, 2**32 - 1))
    def test_sum_never_wraps(self, a, b):
        r = irwin_hall_sum(a, b)
        assert r == (a + b) // 2 and 0 <= r <= 0xFFFFFFFF
        assert irwin_hall_sum(np.array([a]), np.array([b]))[0] == r

    def test_equal_seeds_rejected(self):
        with pytest.raises(SeedError):
            IrwinHallUnit(Lfsr(9), Lfsr(9))

    def test_draw_combines_both_lfsrs(self):
        unit = IrwinHallUnit(Lfsr(3), Lfsr(11))
        a, b = Lfsr(3).draw(), Lfsr(11).draw()
        assert irwin_hall_draw(unit) == (a + b) >> 1

    def test_small_width_exact_law_is_triangular(self):
        # the halved sum of two full-range uniforms is triangular up to O(2^-n)
        exact = oracles.irwin_hall_exact_cdf_small(8)
        x = np.arange(256)
        assert np.max(np.abs(exact - oracles.triangular_cdf_words(x, 8))) < 2 / 256

    def test_shape(self):
        x = IrwinHallUnit.from_seed(2024).draws(1_000_000)
        st_ = distribution_stats(x.astype(float))
        assert abs(st_.skewness) < 0.01
        assert abs(st_.mean - 0x7FFFFFFF) / 2**32 < 0.002
        assert is_unimodal(x)
        assert ks_statistic(x, lambda v: oracles.triangular_cdf_words(v)) < 0.005

    def test_from_seed_streams_differ(self):
        a = IrwinHallUnit.from_seed(1, 0).draws(5)
        b = IrwinHallUnit.from_seed(1, 1).draws(5)
        assert a.tolist() != b.tolist()

    def test_uniform_unit_shape(self):
        x = UniformUnit.from_seed(3).draws(200_000)
        assert ks_statistic(x, lambda v: np.clip(np.asarray(v) / 2**32, 0, 1)) < 0.01


class TestBroker:
    def _broker(self, order=("sig", "lin")):
        b = SharedBroker(Lfsr(0x1234), Lfsr(0xBEEF))
        adapters = {"sig": "irwin_hall_sum", "lin": "single_word"}
        for sid in order:
            b.subscribe(sid, adapters[sid])
        return b

    def test_two_adapters_one_advance(self):
        b = self._broker()
        (s1, w1), (s2, w2) = broker_tick(b)
        a, bb = Lfsr(0x1234).draw(), Lfsr(0xBEEF).draw()
        assert (s1, s2) == ("sig", "lin")
        assert w1 == (a + bb) >> 1 and w2 == a and w1 != w2
        assert b.tick_count == 1

    def test_zero_subscribers(self):
        with pytest.raises(RegistrationError):
            SharedBroker(Lfsr(1), Lfsr(2)).tick()

    def test_duplicate_subscriber(self):
        b = self._broker()
        with pytest.raises(RegistrationError):
            b.subscribe("sig", "single_word")

    def test_unknown_adapter(self):
        with pytest.raises(RegistrationError):
            SharedBroker(Lfsr(1), Lfsr(2)).subscribe("x", "gaussian")

    def test_determinism(self):
        b1 = SharedBroker.from_seed(5)
        b2 = SharedBroker.from_seed(5)
        for b in (b1, b2):
            b.subscribe(0, "irwin_hall_sum")
            b.subscribe(1, "single_word")
        assert [b1.tick() for _ in range(20)] == [b2.tick() for _ in range(20)]

    @given(st.permutations(["a", "b", "c", "d"]))
    @settings(max_examples=24, deadline=None)
    def test_permutation_preserves_multiset(self, order):
        adapters = {"a": "irwin_hall_sum", "b": "single_word", "c": "irwin_hall_sum", "d": "single_word"}
        ref = SharedBroker(Lfsr(0x1234), Lfsr(0xBEEF))
        perm = SharedBroker(Lfsr(0x1234), Lfsr(0xBEEF))
        for sid in "abcd":
            ref.subscribe(sid, adapters[sid])
        for sid in order:
            perm.subscribe(sid, adapters[sid])
        for _ in range(5):
            r, p = ref.tick(), perm.tick()
            assert sorted(w for _, w in r) == sorted(w for _, w in p)
            assert [s for s, _ in p] == list(order)

    def test_ticks_matches_tick(self):
        b1, b2 = self._broker(), self._broker()
        bulk = b1.ticks(50)
        single = [dict(b2.tick()) for _ in range(50)]
        assert bulk["sig"].tolist() == [t["sig"] for t in single]
        assert bulk["lin"].tolist() == [t["lin"] for t in single]

    def test_record_log(self):
        b = SharedBroker(Lfsr(7), Lfsr(8), record=True)
        b.subscribe("x", "single_word")
        b.ticks(3)
        assert len(b.log) == 3 and all(entry[0][0] == "x" for entry in b.log)

    def test_reseeded_keeps_subscribers(self):
        b = self._broker().reseeded(9, 2)
        assert [s for s, _ in b.subscribers] == ["sig", "lin"]


class TestDividers:
    def test_2m_symmetric(self):
        assert divider_2m(0.8, 1e-6, 1e-6) == pytest.approx(0.4)

    def test_2m_extreme(self):
        assert divider_2m(0.8, G_P * 1e-6, G_AP * 1e-6) == pytest.approx(0.596, abs=1e-12)
        assert divider_2m(0.8, G_AP * 1e-6, G_P * 1e-6) == pytest.approx(0.204, abs=1e-12)

    def test_2m_full_swing(self):
        width = divider_2m(0.8, G_P, G_AP) - divider_2m(0.8, G_AP, G_P)
        assert width == pytest.approx(0.392, abs=1e-12)
        assert width / 0.8 == pytest.approx(0.49, abs=1e-12)

    def test_2m_nonpositive(self):
        with pytest.raises(DeviceModelError):
            divider_2m(0.8, 0.0, 1e-6)
        with pytest.raises(DeviceModelError):
            divider_2m(0.8, 1e-6, -1.0)

    def test_1m1r_examples(self):
        g0 = 1e-6
        assert divider_1m1r(1.0, g0, 0.35 / g0) == pytest.approx(1 / (1 + 1 / 0.35), rel=1e-12)
        assert divider_1m1r(1.0, g0, 0.35 / g0) == pytest.approx(0.2593, abs=1e-4)
        assert divider_1m1r(0.9, 1e-30, 0.35 / g0) == pytest.approx(0.0, abs=1e-20)

    def test_1m1r_bad_resistor(self):
        with pytest.raises(ConfigurationError):
            divider_1m1r(0.8, 1e-6, 0.0)

    def test_1m1r_uniform_sweep_near_uniform(self):
        g = np.linspace(G_AP, G_P, 100_001) * 1e-6
        v = divider_1m1r(0.9, g, 0.35e6)
        cdf = lambda x: np.clip((np.asarray(x) - v.min()) / (v.max() - v.min()), 0, 1)
        assert ks_statistic(v, cdf) < 0.1

    @given(st.floats(0.05, 2.0), st.floats(-1, 1), st.floats(-1, 1))
    def test_2m_inside_support(self, v_dd, mz_top, mz_bot):
        v = divider_2m(v_dd, 1 + P**2 * mz_top, 1 + P**2 * mz_bot)
        assert v_dd * G_AP / 2 - 1e-12 <= v <= v_dd * G_P / 2 + 1e-12


class TestCells:
    def test_2m_support_and_mean(self):
        cell = TwoMCell(0.8, seed=11)
        v = cell.samples(200_000)
        lo, hi = cell.support
        assert lo == pytest.approx(0.204) and hi == pytest.approx(0.596)
        assert np.all((v >= lo - 1e-12) & (v <= hi + 1e-12))
        assert abs(v.mean() - 0.4) / 0.4 < 0.005

    def test_2m_variance_scales_quadratically(self):
        v8 = TwoMCell(0.8, source="stationary", seed=4).samples(400_000)
        v4 = TwoMCell(0.4, source="stationary", seed=5).samples(400_000)
        ratio = distribution_stats(v8).variance / distribution_stats(v4).variance
        assert ratio == pytest.approx(4.0, rel=0.02)

    def test_2m_variance_scales_exactly_with_common_stream(self):
        v8 = TwoMCell(0.8, seed=4).samples(10_000)
        v4 = TwoMCell(0.4, seed=4).samples(10_000)
        np.testing.assert_allclose(v8, 2 * v4, rtol=1e-12)

    def test_cell_determinism(self):
        a = TwoMCell(seed=3).samples(1000)
        b = TwoMCell(seed=3).samples(1000)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, TwoMCell(seed=4).samples(1000))

    def test_1m1r_support(self):
        cell = OneM1RCell(0.8, seed=2)
        v = cell.samples(50_000)
        lo, hi = cell.support
        assert cell.v_ext == pytest.approx(0.8 * 1.155)
        assert np.all((v >= lo - 1e-12) & (v <= hi + 1e-12))

    def test_unknown_source(self):
        with pytest.raises(ConfigurationError):
            TwoMCell(source="thermal")

    def test_distribution_stats_errors(self):
        with pytest.raises(InsufficientDataError):
            distribution_stats([])
        with pytest.raises(InsufficientDataError):
            distribution_stats([1.0])
        assert distribution_stats([2.0, 2.0, 2.0]).variance == 0
