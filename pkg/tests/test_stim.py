"""Arm grid and biphasic pulse-train synthesis."""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dbsbench.stim import (
    AMPLITUDES_UA_CM2,
    FREQUENCIES_HZ,
    NonDivisiblePhase,
    PeriodTooShort,
    StimParams,
    build_arm_space,
    generate_pulse_train,
    rms_current,
)


class TestArmSpace:
    def test_has_31_arms(self):
        assert len(build_arm_space()) == 31

    def test_off_arm_first(self):
        space = build_arm_space()
        assert space[0] == StimParams(0.0, 0.0)
        assert space[0].is_off

    def test_frequency_major_ordering(self):
        space = build_arm_space()
        expected = [(0.0, 0.0)] + [
            (f, a) for f in FREQUENCIES_HZ for a in AMPLITUDES_UA_CM2
        ]
        assert [(p.frequency, p.amplitude) for p in space.arms] == expected

    def test_index_roundtrip(self):
        space = build_arm_space()
        for i in range(len(space)):
            assert space.index_of(space[i]) == i

    def test_zero_amplitude_canonicalizes_to_off(self):
        assert StimParams(130.0, 0.0) == StimParams(0.0, 0.0)
        assert build_arm_space().index_of(StimParams(130.0, 0.0)) == 0


class TestPulseTrain:
    def test_off_arm_is_all_zero(self):
        train = generate_pulse_train(StimParams(0.0, 0.0), 1000.0)
        assert train.samples.size == 100_000
        assert not np.any(train.samples)

    def test_sample_count(self):
        train = generate_pulse_train(StimParams(130.0, 2500.0), 1000.0)
        assert train.samples.size == 100_000

    def test_pulse_shape_at_onset(self):
        # 15 samples of +A then 15 of -A from each onset at dt=0.01 ms
        a = 3000.0
        train = generate_pulse_train(StimParams(100.0, a), 1000.0)
        assert np.all(train.samples[0:15] == a)
        assert np.all(train.samples[15:30] == -a)
        assert np.all(train.samples[30:1000] == 0.0)
        onset = 1000  # 10 ms at 100 Hz
        assert np.all(train.samples[onset : onset + 15] == a)
        assert np.all(train.samples[onset + 15 : onset + 30] == -a)

    def test_exact_charge_balance_every_grid_arm(self):
        for params in build_arm_space().arms:
            train = generate_pulse_train(params, 1000.0)
            assert np.sum(train.samples) == 0.0

    def test_pulse_count_matches_frequency(self):
        train = generate_pulse_train(StimParams(130.0, 1000.0), 1000.0)
        # onsets at k/130 s: k = 0..129 fall within 1 s
        assert np.sum(train.samples == 1000.0) == 130 * 15

    def test_non_divisible_phase_rejected(self):
        with pytest.raises(NonDivisiblePhase):
            generate_pulse_train(StimParams(130.0, 1000.0), 1000.0, dt=0.04)

    def test_period_too_short_rejected(self):
        with pytest.raises(PeriodTooShort):
            generate_pulse_train(StimParams(4000.0, 1000.0), 10.0)

    def test_bad_duration_rejected(self):
        with pytest.raises(ValueError):
            generate_pulse_train(StimParams(130.0, 1000.0), 0.0)

    def test_samples_read_only(self):
        train = generate_pulse_train(StimParams(130.0, 1000.0), 100.0)
        with pytest.raises(ValueError):
            train.samples[0] = 1.0


class TestRmsCurrent:
    def test_closed_form_anchor_130_2500(self):
        train = generate_pulse_train(StimParams(130.0, 2500.0), 1000.0)
        assert rms_current(train) == pytest.approx(492.0, rel=0.01)

    def test_closed_form_anchor_155_1000(self):
        train = generate_pulse_train(StimParams(155.0, 1000.0), 1000.0)
        assert rms_current(train) == pytest.approx(216.0, rel=0.01)

    def test_closed_form_anchor_135_1690(self):
        train = generate_pulse_train(StimParams(135.0, 1690.0), 1000.0)
        assert rms_current(train) == pytest.approx(341.0, rel=0.01)

    def test_off_arm_rms_zero(self):
        train = generate_pulse_train(StimParams(0.0, 0.0), 1000.0)
        assert rms_current(train) == 0.0

    @settings(max_examples=25, deadline=None)
    @given(
        f=st.sampled_from(FREQUENCIES_HZ),
        a=st.sampled_from(AMPLITUDES_UA_CM2),
    )
    def test_matches_duty_cycle_formula(self, f, a):
        # RMS = A * sqrt(active fraction) = A * sqrt(2 * 0.15e-3 * f)
        train = generate_pulse_train(StimParams(f, a), 1000.0)
        assert rms_current(train) == pytest.approx(
            a * math.sqrt(0.0003 * f), rel=1e-3
        )
