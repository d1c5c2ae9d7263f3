"""Spectral estimators, error index, RMS helper."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dbsbench.neuro import SmcInput
from dbsbench.signal import (
    BETA_BAND_HZ,
    LengthMismatch,
    NoPulses,
    NotPowerOfTwo,
    SegmentTooLong,
    beta_power,
    error_index,
    fft_radix2,
    lfp_from_traces,
    psd,
    region_beta_power,
    rms_of_series,
)


def naive_dft(x):
    """O(n^2) reference transform."""
    n = len(x)
    k = np.arange(n)
    return (np.asarray(x) * np.exp(-2j * np.pi * np.outer(k, k) / n)).sum(axis=1)


class TestFft:
    def test_matches_naive_dft(self):
        rng = np.random.default_rng(7)
        for n in (1, 2, 4, 8, 64, 256):
            x = rng.standard_normal(n)
            spec = fft_radix2(x)
            np.testing.assert_allclose(
                spec.bins, naive_dft(x), rtol=1e-9, atol=1e-9
            )

    def test_impulse_is_flat(self):
        x = np.zeros(16)
        x[0] = 1.0
        np.testing.assert_allclose(fft_radix2(x).bins, np.ones(16), atol=1e-12)

    def test_single_tone_bin(self):
        n = 128
        x = np.cos(2 * np.pi * 5 * np.arange(n) / n)
        bins = fft_radix2(x).bins
        assert abs(bins[5]) == pytest.approx(n / 2, rel=1e-9)
        mags = np.abs(bins)
        mags[[5, n - 5]] = 0.0
        assert np.max(mags) < 1e-9

    def test_parseval(self):
        rng = np.random.default_rng(11)
        x = rng.standard_normal(512)
        bins = fft_radix2(x).bins
        assert np.sum(x**2) == pytest.approx(
            np.sum(np.abs(bins) ** 2) / 512, rel=1e-10
        )

    def test_rejects_non_power_of_two(self):
        with pytest.raises(NotPowerOfTwo):
            fft_radix2(np.zeros(100))

    @settings(max_examples=30, deadline=None)
    @given(
        st.lists(
            st.floats(min_value=-1e3, max_value=1e3, allow_nan=False),
            min_size=32,
            max_size=32,
        ),
        st.lists(
            st.floats(min_value=-1e3, max_value=1e3, allow_nan=False),
            min_size=32,
            max_size=32,
        ),
    )
    def test_linearity(self, a, b):
        lhs = fft_radix2(np.add(a, b)).bins
        rhs = fft_radix2(a).bins + fft_radix2(b).bins
        np.testing.assert_allclose(lhs, rhs, rtol=1e-9, atol=1e-6)


class TestPsd:
    def test_white_noise_level(self):
        rng = np.random.default_rng(3)
        fs = 1000.0
        x = rng.standard_normal(1 << 15)
        spec = psd(x, fs)
        # variance 1 spread over fs/2 of one-sided bandwidth -> 2/fs per Hz
        assert np.mean(spec.density[1:-1]) == pytest.approx(2 / fs, rel=0.05)

    def test_total_power_equals_variance(self):
        rng = np.random.default_rng(5)
        x = rng.standard_normal(1 << 12)
        x -= x.mean()
        spec = psd(x, fs=250.0)
        df = spec.freqs[1] - spec.freqs[0]
        assert np.sum(spec.density) * df == pytest.approx(
            np.mean(x**2), rel=1e-9
        )

    def test_hann_window_unbiased_on_noise(self):
        rng = np.random.default_rng(9)
        x = rng.standard_normal(1 << 15)
        plain = psd(x, 1000.0)
        windowed = psd(x, 1000.0, window="hann")
        assert np.mean(windowed.density[1:-1]) == pytest.approx(
            np.mean(plain.density[1:-1]), rel=0.05
        )

    def test_unknown_window_rejected(self):
        with pytest.raises(ValueError):
            psd(np.zeros(64), 1.0, window="hamming")


class TestBetaPower:
    fs = 1000.0

    def _tone(self, freq, seconds=8.0):
        t = np.arange(int(seconds * self.fs)) / self.fs
        return np.sin(2 * np.pi * freq * t)

    def test_in_band_tone_captured(self):
        x = self._tone(20.0)
        bp = beta_power(x, self.fs)
        assert bp.value == pytest.approx(0.5, rel=0.05)  # sine power

    def test_out_of_band_tone_rejected(self):
        x = self._tone(50.0)
        assert beta_power(x, self.fs).value < 0.005

    def test_band_edges_inclusive(self):
        # an edge tone keeps a solid share of its energy in band, far more
        # than a tone 2 Hz outside leaks in
        lo, hi = BETA_BAND_HZ
        for edge, outside in ((lo, lo - 2.0), (hi, hi + 2.0)):
            at_edge = beta_power(self._tone(edge), self.fs).value
            nearby = beta_power(self._tone(outside), self.fs).value
            assert at_edge > 0.05
            assert at_edge > 10 * nearby

    def test_dc_offset_ignored(self):
        x = self._tone(20.0)
        with_offset = beta_power(x - 62.0, self.fs).value
        assert with_offset == pytest.approx(beta_power(x, self.fs).value, rel=1e-6)

    def test_chunked_agrees_with_bulk_on_noise(self):
        rng = np.random.default_rng(13)
        x = rng.standard_normal(1 << 17)
        bulk = beta_power(x, self.fs, method="bulk").value
        chunked = beta_power(
            x, self.fs, method="chunked", segment_len=1 << 14
        ).value
        assert chunked == pytest.approx(bulk, rel=0.25)

    def test_chunked_memory_audit(self):
        audit = {}
        x = np.random.default_rng(1).standard_normal(1 << 16)
        seg = 1 << 14
        beta_power(x, self.fs, method="chunked", segment_len=seg, _audit=audit)
        scratch = sum(audit.values())
        assert scratch <= 2 * seg + seg  # 2L for FFT work, <=L accumulator

    def test_segment_longer_than_signal_rejected(self):
        with pytest.raises(SegmentTooLong):
            beta_power(np.zeros(100), self.fs, method="chunked", segment_len=128)

    def test_non_pow2_segment_rejected(self):
        with pytest.raises(NotPowerOfTwo):
            beta_power(np.zeros(4096), self.fs, method="chunked", segment_len=100)

    def test_unknown_method_rejected(self):
        with pytest.raises(ValueError):
            beta_power(np.zeros(64), self.fs, method="welch")

    @settings(max_examples=20, deadline=None)
    @given(offset=st.floats(min_value=-100, max_value=100, allow_nan=False))
    def test_shift_invariance(self, offset):
        rng = np.random.default_rng(21)
        x = rng.standard_normal(4096)
        base = beta_power(x, self.fs).value
        shifted = beta_power(x + offset, self.fs).value
        assert shifted == pytest.approx(base, rel=1e-9, abs=1e-12)


class TestRegionBetaPower:
    def test_lfp_is_pointwise_mean(self):
        traces = [np.arange(4.0), 3.0 - np.arange(4.0)]
        np.testing.assert_allclose(lfp_from_traces(traces), [1.5] * 4)

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            lfp_from_traces([np.zeros(4), np.zeros(5)])

    def test_per_neuron_path_is_mean_of_powers(self):
        rng = np.random.default_rng(2)
        traces = rng.standard_normal((3, 4096))
        per = region_beta_power(traces, 1000.0, path="per_neuron").value
        expected = np.mean([beta_power(t, 1000.0).value for t in traces])
        assert per == pytest.approx(expected, rel=1e-12)

    def test_antiphase_pair_cancels_in_lfp_only(self):
        t = np.arange(4096) / 1000.0
        tone = np.sin(2 * np.pi * 20 * t)
        traces = [tone, -tone]
        assert region_beta_power(traces, 1000.0, path="lfp").value < 1e-12
        assert region_beta_power(traces, 1000.0, path="per_neuron").value > 0.1

    def test_unknown_path(self):
        with pytest.raises(ValueError):
            region_beta_power([np.zeros(64)], 1000.0, path="csd")


def make_smc(onsets, duration=1000.0, dt=0.01):
    return SmcInput(
        pulse_onsets=np.asarray(onsets, dtype=float),
        series=np.zeros(int(duration / dt)),
        amplitude=3.5,
        width_ms=5.0,
        dt=dt,
    )


class TestErrorIndex:
    def test_perfect_relay(self):
        smc = make_smc([100.0, 200.0, 300.0])
        spikes = [[105.0, 210.0, 310.0]]
        ei = error_index(spikes, smc)
        assert ei.value == 0.0
        assert ei.missed == 0 and ei.spurious == 0

    def test_hand_counted_mixed_case(self):
        # pulse 100: two spikes (1 spurious); pulse 200: none (1 missed);
        # pulse 300: one spike; plus one spike outside all windows (spurious)
        smc = make_smc([100.0, 200.0, 300.0])
        spikes = [[104.0, 110.0, 305.0, 500.0]]
        ei = error_index(spikes, smc)
        assert ei.missed == 1
        assert ei.spurious == 2
        assert ei.value == pytest.approx(3 / 3)

    def test_window_truncated_at_next_pulse(self):
        # pulses 10 ms apart: spike at 118 is in pulse-2's window, not pulse-1's
        smc = make_smc([100.0, 110.0])
        ei = error_index([[118.0]], smc)
        assert ei.missed == 1  # pulse 1 got nothing
        assert ei.spurious == 0
        assert ei.value == pytest.approx(1 / 2)

    def test_all_missed(self):
        smc = make_smc([100.0, 200.0])
        ei = error_index([[], []], smc)
        assert ei.value == pytest.approx(1.0)
        assert ei.missed == 4

    def test_averages_over_neurons(self):
        smc = make_smc([100.0])
        ei = error_index([[105.0], []], smc)
        assert ei.value == pytest.approx(0.5)

    def test_no_pulses_rejected(self):
        with pytest.raises(NoPulses):
            error_index([[1.0]], make_smc([]))


class TestRmsOfSeries:
    def test_matches_definition(self):
        x = np.array([3.0, -4.0])
        assert rms_of_series(x, 0.01) == pytest.approx(np.sqrt(12.5))

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            rms_of_series([], 0.01)
