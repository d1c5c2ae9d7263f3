"""Stimulation parameter grid and biphasic pulse train synthesis.

Amplitudes are current densities in uA/cm^2, frequencies in Hz, times in ms.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

FREQUENCIES_HZ = (55.0, 80.0, 105.0, 130.0, 155.0, 180.0)
AMPLITUDES_UA_CM2 = (1000.0, 2000.0, 3000.0, 4000.0, 5000.0)

#: Width of each pulse phase (anodic or cathodic), ms.
PHASE_WIDTH_MS = 0.15
DEFAULT_DT_MS = 0.01


class NonDivisiblePhase(ValueError):
    """The 0.15 ms phase width is not an integer multiple of dt."""


class PeriodTooShort(ValueError):
    """The pulse period is shorter than one full biphasic pulse (0.3 ms)."""


@dataclass(frozen=True)
class StimParams:
    """One candidate (frequency, amplitude) stimulation setting."""

    frequency: float  # Hz
    amplitude: float  # uA/cm^2

    def __post_init__(self):
        # amplitude 0 canonicalizes to the single off arm (0, 0)
        if self.amplitude == 0.0 and self.frequency != 0.0:
            object.__setattr__(self, "frequency", 0.0)

    @property
    def is_off(self) -> bool:
        return self.amplitude == 0.0


@dataclass(frozen=True)
class ArmSpace:
    """Ordered, indexable set of stimulation arms."""

    arms: tuple[StimParams, ...]
    _index: dict[StimParams, int] = field(repr=False, default_factory=dict)

    def __post_init__(self):
        object.__setattr__(
            self, "_index", {p: i for i, p in enumerate(self.arms)}
        )

    def __len__(self) -> int:
        return len(self.arms)

    def __getitem__(self, arm_id: int) -> StimParams:
        return self.arms[arm_id]

    def index_of(self, params: StimParams) -> int:
        return self._index[params]


def build_arm_space() -> ArmSpace:
    """The canonical 31-arm grid: off arm first, then frequency-major order."""
    arms = [StimParams(0.0, 0.0)]
    for f in FREQUENCIES_HZ:
        for a in AMPLITUDES_UA_CM2:
            arms.append(StimParams(f, a))
    return ArmSpace(tuple(arms))


@dataclass(frozen=True)
class PulseTrain:
    """A sampled stimulation current series."""

    samples: np.ndarray  # uA/cm^2 per timestep
    dt: float  # ms
    duration: float  # ms

    def __post_init__(self):
        self.samples.setflags(write=False)


def generate_pulse_train(
    params: StimParams, duration: float, dt: float = DEFAULT_DT_MS
) -> PulseTrain:
    """Synthesize a charge-balanced biphasic train for one round.

    Pulses start at t = k/frequency; each is PHASE_WIDTH_MS of +amplitude
    immediately followed by PHASE_WIDTH_MS of -amplitude.
    """
    if dt <= 0 or duration <= 0:
        raise ValueError("duration and dt must be positive")
    phase_n = PHASE_WIDTH_MS / dt
    if abs(phase_n - round(phase_n)) > 1e-9:
        raise NonDivisiblePhase(
            f"phase width {PHASE_WIDTH_MS} ms is not a multiple of dt={dt} ms"
        )
    phase_n = int(round(phase_n))
    n = int(round(duration / dt))
    samples = np.zeros(n)

    if not params.is_off:
        period_ms = 1000.0 / params.frequency
        if period_ms < 2 * PHASE_WIDTH_MS:
            raise PeriodTooShort(
                f"period {period_ms:.4f} ms < {2 * PHASE_WIDTH_MS} ms"
            )
        k = 0
        while True:
            start = int(round(k * period_ms / dt))
            if start >= n:
                break
            anodic_end = min(start + phase_n, n)
            cathodic_end = min(start + 2 * phase_n, n)
            samples[start:anodic_end] = params.amplitude
            samples[anodic_end:cathodic_end] = -params.amplitude
            k += 1

    return PulseTrain(samples=samples, dt=dt, duration=duration)


def rms_current(train: PulseTrain) -> float:
    """Root-mean-square current density over the whole train.

    For an ideal train this equals amplitude * sqrt(0.0003 s * frequency).
    """
    if train.samples.size == 0:
        raise ValueError("empty pulse train")
    return math.sqrt(float(np.mean(train.samples**2)))
