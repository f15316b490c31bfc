"""FTTPS construction, switching functions, repetition, plan enumeration."""

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qns.sequences import (
    ExperimentPlan,
    PulseSequence,
    build_plan,
    cosine_fttps,
    free_evolution,
    repeat_sequence,
    sine_fttps,
    switching_function,
)

TAU_PI = 40e-9


class TestCosineFttps:
    def test_order_zero_is_free_evolution(self):
        seq = cosine_fttps(0, 3, TAU_PI)
        assert seq.pulse_slots == ()
        assert seq.kind == "free"

    def test_order_one_m3_slots(self):
        # Zeros of cos(2*pi*t/T) at T/4 and 3T/4: slots 4 and 12 of 16.
        seq = cosine_fttps(1, 3, TAU_PI)
        assert seq.pulse_slots == (4, 12)

    def test_order_three_m3_slots(self):
        # Zeros at T(2j+1)/12 for j=0..5: slots round(16*(2j+1)/12).
        seq = cosine_fttps(3, 3, TAU_PI)
        expected = tuple(int(np.floor(4 * (2 * j + 1) / 3 + 0.5))
                         for j in range(6))
        assert seq.pulse_slots == expected

    @given(k=st.integers(0, 63), m=st.integers(2, 7))
    def test_pulse_count_and_distinctness(self, k, m):
        if k > 2**m - 1:
            k = k % 2**m
        seq = cosine_fttps(k, m, TAU_PI)
        assert len(seq.pulse_slots) == 2 * k
        assert len(set(seq.pulse_slots)) == 2 * k
        assert all(0 <= s < 2 ** (m + 1) for s in seq.pulse_slots)

    def test_out_of_range_order_rejected(self):
        with pytest.raises(ValueError, match="outside"):
            cosine_fttps(8, 3, TAU_PI)


class TestSineFttps:
    def test_order_one_m3_slots_and_switching(self):
        seq = sine_fttps(1, 3, TAU_PI)
        assert seq.pulse_slots == (0, 8)
        y = switching_function(seq)
        T = seq.duration
        # pulse at t=0 flips the start: -1 on [0, T/2), +1 on [T/2, T)
        assert y.sample([0.25 * T]) == -1
        assert y.sample([0.75 * T]) == +1

    @given(k=st.integers(1, 63), m=st.integers(2, 7))
    def test_pulse_count_even_and_distinct(self, k, m):
        if k > 2**m - 1:
            k = 1 + k % (2**m - 1)
        seq = sine_fttps(k, m, TAU_PI)
        assert len(seq.pulse_slots) == 2 * k
        assert len(set(seq.pulse_slots)) == 2 * k

    def test_order_zero_rejected(self):
        with pytest.raises(ValueError, match="outside"):
            sine_fttps(0, 3, TAU_PI)


class TestSwitchingFunction:
    def test_free_evolution_constant(self):
        y = switching_function(free_evolution(3, TAU_PI))
        assert y.signs == (1,)
        assert y.integral() == pytest.approx(y.duration)

    def test_single_flip(self):
        seq = PulseSequence("cosine", 1, 3, TAU_PI, (8, 12))
        y = switching_function(seq)
        t = seq.duration
        assert list(y.sample([0.1 * t, 0.6 * t, 0.9 * t])) == [1, -1, 1]

    def test_balanced_sequence_integrates_to_zero(self):
        y = switching_function(cosine_fttps(1, 3, TAU_PI))
        assert y.integral() == pytest.approx(0.0, abs=1e-20)

    def test_product_with_free_is_identity(self):
        cos2 = switching_function(cosine_fttps(2, 4, TAU_PI))
        free = switching_function(free_evolution(4, TAU_PI))
        prod = cos2.product(free)
        mids = np.linspace(0, cos2.duration, 97, endpoint=False) + 1e-12
        np.testing.assert_array_equal(prod.sample(mids), cos2.sample(mids))

    def test_product_of_identical_sequences_is_one(self):
        y = switching_function(sine_fttps(3, 4, TAU_PI))
        prod = y.product(y)
        assert prod.signs == (1,)

    def test_slot_signs_flip_counting(self):
        seq = sine_fttps(1, 3, TAU_PI)
        signs = switching_function(seq).slot_signs(seq.n_slots)
        np.testing.assert_array_equal(signs[:8], -1)
        np.testing.assert_array_equal(signs[8:], +1)


class TestRepeatSequence:
    def test_single_repetition_is_identity(self):
        seq = cosine_fttps(2, 3, TAU_PI)
        assert repeat_sequence(seq, 1) is seq

    def test_four_repetitions_of_order_one(self):
        tiled = repeat_sequence(cosine_fttps(1, 3, TAU_PI), 4)
        assert len(tiled.pulse_slots) == 8
        assert tiled.duration == pytest.approx(4 * 16 * TAU_PI)
        assert tiled.pulse_slots == (4, 12, 20, 28, 36, 44, 52, 60)

    def test_tiled_switching_function_is_periodic(self):
        base = cosine_fttps(3, 4, TAU_PI)
        tiled = repeat_sequence(base, 3)
        y = switching_function(tiled)
        t = np.linspace(0, base.duration, 33, endpoint=False) + 1e-12
        ref = y.sample(t)
        for r in (1, 2):
            np.testing.assert_array_equal(y.sample(t + r * base.duration), ref)


class TestBuildPlan:
    def test_setting_count(self):
        for K in (1, 2, 5, 8):
            plan = build_plan(K, 6, TAU_PI)
            assert len(plan.settings) == 4 * K - 1

    def test_combo4_empty_at_k1(self):
        plan = build_plan(1, 6, TAU_PI)
        assert all(s.combo != 4 for s in plan.settings)

    def test_m6_grid_capacity(self):
        plan = build_plan(8, 6, TAU_PI)
        assert plan.n_slots == 128
        assert 2**plan.m == 64  # orders available on this grid

    def test_every_combo_order_unique(self):
        plan = build_plan(6, 6, TAU_PI)
        keys = [s.key for s in plan.settings]
        assert len(keys) == len(set(keys))
        for k in range(6):
            assert (1, k) in keys and (2, k) in keys and (3, k) in keys
        for k in range(1, 6):
            assert (4, k) in keys

    def test_preps_and_observables(self):
        plan = build_plan(3, 5, TAU_PI)
        s1 = plan.setting(1, 2)
        assert s1.prep == ("X", "Z")
        assert s1.observables == ("X1", "Y1")
        assert s1.seq1.kind == "cosine" and s1.seq2.kind == "free"
        s4 = plan.setting(4, 2)
        assert s4.prep == ("X", "X")
        assert s4.seq2.kind == "sine"
        assert set(s4.observables) == {"X1X2", "Y1Y2", "X1Y2", "Y1X2"}

    def test_statics_settings_are_the_free_rows(self):
        plan = build_plan(4, 5, TAU_PI)
        for combo in (1, 2, 3):
            s = plan.setting(combo, 0)
            assert s.seq1.pulse_slots == () and s.seq2.pulse_slots == ()
        # pair settings carry single-qubit marginals for the statics step
        assert "X1" in plan.setting(3, 0).observables
        assert "Y2" in plan.setting(3, 0).observables

    def test_equal_durations_within_setting(self):
        plan = build_plan(5, 6, TAU_PI, reps=4)
        for s in plan.settings:
            assert s.seq1.duration == pytest.approx(s.seq2.duration)
            assert s.seq1.repetitions == 4

    def test_k_out_of_range(self):
        with pytest.raises(ValueError, match="outside"):
            build_plan(2**6 + 1, 6, TAU_PI)
