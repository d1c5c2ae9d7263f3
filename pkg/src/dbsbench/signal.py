"""Quality-of-control metrics: FFT, PSD, beta-band power, error index, RMS.

The FFT is a hand-rolled iterative in-place radix-2 decimation-in-time
transform with cached twiddle factors; `beta_power` offers a bulk mode
(zero-pad the whole round buffer) and a memory-bounded chunked mode that
averages non-overlapping segment periodograms.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

BETA_BAND_HZ = (13.0, 35.0)


class LengthMismatch(ValueError):
    pass


class NotPowerOfTwo(ValueError):
    pass


class SegmentTooLong(ValueError):
    pass


class NoPulses(ValueError):
    """Error index is undefined without any SMC pulses."""


def _is_pow2(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


def _next_pow2(n: int) -> int:
    return 1 << max(0, (n - 1).bit_length())


# twiddle / bit-reversal caches keyed by transform length
_TWIDDLE_CACHE: dict[int, np.ndarray] = {}
_BITREV_CACHE: dict[int, np.ndarray] = {}


def _twiddles(n: int) -> np.ndarray:
    """Half-circle twiddle factors exp(-2i*pi*k/n), k = 0..n/2-1."""
    tw = _TWIDDLE_CACHE.get(n)
    if tw is None:
        tw = np.exp(-2j * np.pi * np.arange(n // 2) / n)
        tw.setflags(write=False)
        _TWIDDLE_CACHE[n] = tw
    return tw


def _bitrev_permutation(n: int) -> np.ndarray:
    perm = _BITREV_CACHE.get(n)
    if perm is None:
        bits = n.bit_length() - 1
        perm = np.zeros(n, dtype=np.intp)
        for i in range(1, n):
            perm[i] = (perm[i >> 1] >> 1) | ((i & 1) << (bits - 1))
        perm.setflags(write=False)
        _BITREV_CACHE[n] = perm
    return perm


def _fft_inplace(buf: np.ndarray) -> None:
    """Iterative radix-2 DIT butterflies on a complex buffer (length 2^k)."""
    n = buf.size
    if n <= 1:
        return
    buf[:] = buf[_bitrev_permutation(n)]
    tw = _twiddles(n)
    half = 1
    while half < n:
        view = buf.reshape(-1, 2 * half)
        w = tw[:: n // (2 * half)]
        t = view[:, half:] * w
        view[:, half:] = view[:, :half] - t
        view[:, :half] += t
        half *= 2


@dataclass(frozen=True)
class Spectrum:
    """Complex DFT bins; bin k maps to frequency k * fs / n."""

    bins: np.ndarray
    fs: float
    n: int


def fft_radix2(samples, fs: float = 1.0) -> Spectrum:
    """Radix-2 Cooley-Tukey DIT transform of a real series."""
    x = np.asarray(samples, dtype=float)
    if not _is_pow2(x.size):
        raise NotPowerOfTwo(f"length {x.size} is not a power of two")
    buf = x.astype(complex)
    _fft_inplace(buf)
    return Spectrum(bins=buf, fs=fs, n=x.size)


@dataclass(frozen=True)
class PowerSpectrum:
    """One-sided power spectral density."""

    freqs: np.ndarray  # Hz
    density: np.ndarray  # power per Hz
    fs: float


def psd(samples, fs: float, window: str | None = None) -> PowerSpectrum:
    """One-sided periodogram.

    `window` is None (rectangular) or "hann"; windowed estimates are
    normalized by the window's mean-square gain so white-noise levels are
    unbiased.
    """
    x = np.asarray(samples, dtype=float)
    n = x.size
    if not _is_pow2(n):
        raise NotPowerOfTwo(f"length {n} is not a power of two")
    if window is None:
        scale = fs * n
        buf = x.astype(complex)
    elif window == "hann":
        w = np.hanning(n)
        scale = fs * float(np.sum(w**2))
        buf = (x * w).astype(complex)
    else:
        raise ValueError(f"unknown window {window!r}")
    _fft_inplace(buf)
    half = n // 2
    density = np.abs(buf[: half + 1]) ** 2 / scale
    density[1:half] *= 2.0  # fold negative frequencies
    freqs = np.arange(half + 1) * (fs / n)
    return PowerSpectrum(freqs=freqs, density=density, fs=fs)


@dataclass(frozen=True)
class BetaPower:
    value: float
    band: tuple[float, float] = BETA_BAND_HZ
    method: str = "bulk"


def _band_integral(spec: PowerSpectrum, band) -> float:
    lo, hi = band
    df = spec.freqs[1] - spec.freqs[0]
    mask = (spec.freqs >= lo) & (spec.freqs <= hi)
    return float(np.sum(spec.density[mask]) * df)


def _chunked_band_power(
    x: np.ndarray, fs: float, seg_len: int, band, audit: dict | None
) -> float:
    """Welch estimate with non-overlapping segments, memory bounded.

    Scratch is one complex segment buffer (plus the butterfly temporary of
    seg_len/2 complex values inside `_fft_inplace`) and one real accumulator
    of seg_len/2 + 1 bins.
    """
    n_seg = x.size // seg_len
    accum = np.zeros(seg_len // 2 + 1)
    buf = np.empty(seg_len, dtype=complex)
    if audit is not None:
        # element counts in complex-value equivalents (1 float = 0.5 complex)
        audit["segment_buffer_complex"] = seg_len
        audit["butterfly_temp_complex"] = seg_len // 2
        audit["accumulator_complex"] = (seg_len // 2 + 1) / 2
    for s in range(n_seg):
        buf.real = x[s * seg_len : (s + 1) * seg_len]
        buf.imag = 0.0
        _fft_inplace(buf)
        half = seg_len // 2
        p = np.abs(buf[: half + 1]) ** 2 / (fs * seg_len)
        p[1:half] *= 2.0
        accum += p
    accum /= n_seg
    df = fs / seg_len
    freqs = np.arange(seg_len // 2 + 1) * df
    lo, hi = band
    mask = (freqs >= lo) & (freqs <= hi)
    return float(np.sum(accum[mask]) * df)


def beta_power(
    samples,
    fs: float,
    method: str = "bulk",
    segment_len: int | None = None,
    band=BETA_BAND_HZ,
    _audit: dict | None = None,
) -> BetaPower:
    """Band power over [13, 35] Hz.

    Bulk mode zero-pads to the next power of two and integrates the full
    periodogram; chunked mode averages periodograms of ``segment_len``-long
    non-overlapping segments (segment_len must be a power of two). The mean
    is removed first: a DC offset (e.g. resting membrane potential) would
    otherwise leak into the band through the zero-padding discontinuity.
    """
    x = np.asarray(samples, dtype=float)
    if x.size:
        x = x - np.mean(x)
    if method == "bulk":
        n = _next_pow2(x.size)
        if n != x.size:
            x = np.concatenate([x, np.zeros(n - x.size)])
        value = _band_integral(psd(x, fs), band)
        return BetaPower(value=value, band=band, method="bulk")
    if method == "chunked":
        if segment_len is None:
            segment_len = 1 << 14
        if not _is_pow2(segment_len):
            raise NotPowerOfTwo(f"segment_len {segment_len}")
        if segment_len > x.size:
            raise SegmentTooLong(
                f"segment_len {segment_len} > signal length {x.size}"
            )
        value = _chunked_band_power(x, fs, segment_len, band, _audit)
        return BetaPower(value=value, band=band, method=f"chunked({segment_len})")
    raise ValueError(f"unknown method {method!r}")


def lfp_from_traces(traces) -> np.ndarray:
    """Pointwise mean membrane potential across neurons."""
    arrs = [np.asarray(t, dtype=float) for t in traces]
    if not arrs:
        raise LengthMismatch("need at least one trace")
    n = arrs[0].size
    if any(a.size != n for a in arrs):
        raise LengthMismatch("traces differ in length")
    return np.mean(np.stack(arrs), axis=0)


def region_beta_power(
    traces, fs: float, path: str = "lfp", **kwargs
) -> BetaPower:
    """Region-level beta power.

    path="lfp": beta power of the mean-potential signal (the realistic
    sensing path). path="per_neuron": mean of per-neuron beta powers.
    """
    if path == "lfp":
        return beta_power(lfp_from_traces(traces), fs, **kwargs)
    if path == "per_neuron":
        powers = [beta_power(t, fs, **kwargs) for t in traces]
        bp = powers[0]
        return BetaPower(
            value=float(np.mean([p.value for p in powers])),
            band=bp.band,
            method=bp.method,
        )
    raise ValueError(f"unknown path {path!r}")


@dataclass(frozen=True)
class ErrorIndex:
    value: float
    missed: int
    spurious: int
    total_pulses: int


def error_index(th_spikes, smc) -> ErrorIndex:
    """Fraction of erroneous thalamic responses to SMC pulses.

    Each SMC pulse opens a 25 ms response window (truncated at the next
    pulse onset). A window with no spike counts as missed; every spike
    beyond the first in a window, and every spike outside all windows,
    counts as spurious.
    """
    onsets = np.asarray(smc.pulse_onsets, dtype=float)
    if onsets.size == 0:
        raise NoPulses("no SMC pulses")
    window_ms = 25.0
    ends = np.minimum(onsets + window_ms, np.append(onsets[1:], np.inf))
    missed = 0
    spurious = 0
    for spikes in th_spikes:
        times = np.asarray(spikes, dtype=float)
        assigned = 0
        for onset, end in zip(onsets, ends):
            count = int(np.sum((times >= onset) & (times < end)))
            assigned += count
            if count == 0:
                missed += 1
            elif count > 1:
                spurious += count - 1
        spurious += times.size - assigned
    total = onsets.size * len(th_spikes)
    return ErrorIndex(
        value=(missed + spurious) / total,
        missed=missed,
        spurious=spurious,
        total_pulses=onsets.size,
    )


def rms_of_series(samples, dt: float) -> float:
    """RMS of a recorded current series; same contract as stim.rms_current."""
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise ValueError("empty series")
    return math.sqrt(float(np.mean(x**2)))
