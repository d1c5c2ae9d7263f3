"""Basal ganglia-thalamic network: state containers, setup, and round runs.

Four regions (STN, GPe, GPi, TH) of conductance-based point neurons driven
by DBS current into STN and randomized sensorimotor pulses into TH. The
constant tables live in bgt_params.json next to this module.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from . import kernel as K
from ..stim import PulseTrain

REGIONS = ("stn", "gpe", "gpi", "th")
DEFAULT_DT_MS = 0.01


class Divergence(RuntimeError):
    """A membrane voltage left the kernel's guard band."""


def load_params() -> dict:
    """Parse the vendored parameter table."""
    text = (
        resources.files("dbsbench.neuro").joinpath("bgt_params.json").read_text()
    )
    return json.loads(text)


def pack_params(raw: dict, condition: str) -> np.ndarray:
    """Flatten the JSON table into the kernel's parameter vector."""
    if condition not in ("healthy", "pd"):
        raise ValueError(f"unknown condition {condition!r}")
    m = raw["membrane"]
    s = raw["synapse"]
    iapp = raw["applied_current"][condition]
    p = np.zeros(K.N_PARAMS)
    p[K.P_CM] = m["c_m"]
    for name, (i_th, i_stn, i_gp) in {
        "g_leak": (K.P_GL_TH, K.P_GL_STN, K.P_GL_GP),
        "e_leak": (K.P_EL_TH, K.P_EL_STN, K.P_EL_GP),
        "g_na": (K.P_GNA_TH, K.P_GNA_STN, K.P_GNA_GP),
        "e_na": (K.P_ENA_TH, K.P_ENA_STN, K.P_ENA_GP),
        "g_k": (K.P_GK_TH, K.P_GK_STN, K.P_GK_GP),
        "e_k": (K.P_EK_TH, K.P_EK_STN, K.P_EK_GP),
        "g_t": (K.P_GT_TH, K.P_GT_STN, K.P_GT_GP),
    }.items():
        p[i_th] = m[name]["th"]
        p[i_stn] = m[name]["stn"]
        p[i_gp] = m[name]["gp"]
    p[K.P_ET] = m["e_t"]
    p[K.P_GCA_STN] = m["g_ca"]["stn"]
    p[K.P_GCA_GP] = m["g_ca"]["gp"]
    p[K.P_ECA_STN] = m["e_ca"]["stn"]
    p[K.P_ECA_GP] = m["e_ca"]["gp"]
    p[K.P_GAHP_STN] = m["g_ahp"]["stn"]
    p[K.P_GAHP_GP] = m["g_ahp"]["gp"]
    p[K.P_K1_STN] = m["k1"]["stn"]
    p[K.P_K1_GP] = m["k1"]["gp"]
    p[K.P_KCA_STN] = m["k_ca"]["stn"]
    p[K.P_KCA_GP] = m["k_ca"]["gp"]
    p[K.P_GSYN_GESN] = s["g"]["gpe_to_stn"]
    p[K.P_GSYN_SNGE] = s["g"]["stn_to_gpe"]
    p[K.P_GSYN_GEGE] = s["g"]["gpe_to_gpe"]
    p[K.P_GSYN_SNGI] = s["g"]["stn_to_gpi"]
    p[K.P_GSYN_GEGI] = s["g"]["gpe_to_gpi"]
    p[K.P_GSYN_GITH] = s["g"]["gpi_to_th"]
    p[K.P_ESYN_GESN] = s["e"]["gpe_to_stn"]
    p[K.P_ESYN_SNGE] = s["e"]["stn_to_gpe"]
    p[K.P_ESYN_GEGE] = s["e"]["gpe_to_gpe"]
    p[K.P_ESYN_SNGI] = s["e"]["stn_to_gpi"]
    p[K.P_ESYN_GEGI] = s["e"]["gpe_to_gpi"]
    p[K.P_ESYN_GITH] = s["e"]["gpi_to_th"]
    p[K.P_TAU] = s["alpha_tau_ms"]
    p[K.P_GPEAK_STN] = s["g_peak_stn"]
    p[K.P_GPEAK_GPI] = s["g_peak_gpi"]
    p[K.P_A_GPE] = s["gpe_release_rate"]
    p[K.P_B_GPE] = s["gpe_decay_rate"]
    p[K.P_THE_GPE] = s["gpe_release_threshold"]
    p[K.P_IAPP_STN] = iapp["stn"]
    p[K.P_IAPP_GPE] = iapp["gpe"]
    p[K.P_IAPP_GPI] = iapp["gpi"]
    return p


@dataclass
class NetworkState:
    """Mutable carry-over state of one network instance (single writer)."""

    condition: str
    n: int
    vth: np.ndarray
    vsn: np.ndarray
    vge: np.ndarray
    vgi: np.ndarray
    prev_vsn: np.ndarray
    gates: np.ndarray  # (kernel.N_GATES, n)
    syn: np.ndarray  # (kernel.N_SYN, n)
    params: np.ndarray
    rng: np.random.Generator
    raw_params: dict = field(repr=False, default_factory=dict)

    def copy(self) -> "NetworkState":
        rng_copy = np.random.default_rng()
        rng_copy.bit_generator.state = self.rng.bit_generator.state
        return NetworkState(
            condition=self.condition,
            n=self.n,
            vth=self.vth.copy(),
            vsn=self.vsn.copy(),
            vge=self.vge.copy(),
            vgi=self.vgi.copy(),
            prev_vsn=self.prev_vsn.copy(),
            gates=self.gates.copy(),
            syn=self.syn.copy(),
            params=self.params.copy(),
            rng=rng_copy,
            raw_params=self.raw_params,
        )


@dataclass(frozen=True)
class SmcInput:
    """Sensorimotor-cortex pulse drive into the thalamus."""

    pulse_onsets: np.ndarray  # ms
    series: np.ndarray  # uA/cm^2 at dt resolution
    amplitude: float
    width_ms: float
    dt: float


@dataclass(frozen=True)
class RoundObservation:
    """Everything recorded during one closed-loop round."""

    gpi_traces: np.ndarray  # (n, steps) mV
    th_traces: np.ndarray
    i_dbs: np.ndarray
    smc: SmcInput
    spikes: dict  # region -> list of per-neuron spike-time arrays
    dt: float


def init_network(
    condition: str = "pd", n_per_region: int = 10, seed: int = 0
) -> NetworkState:
    """Fresh network near resting state with small seeded jitter."""
    if n_per_region < 1:
        raise ValueError("need at least one neuron per region")
    raw = load_params()
    params = pack_params(raw, condition)
    rng = np.random.default_rng(seed)
    n = n_per_region

    v0 = {r: -62.0 + 5.0 * rng.standard_normal(n) for r in REGIONS}
    gates = np.zeros((K.N_GATES, n))
    gates[K.G_H1] = [1.0 / (1.0 + np.exp((v + 41.0) / 4.0)) for v in v0["th"]]
    gates[K.G_R1] = [1.0 / (1.0 + np.exp((v + 84.0) / 4.0)) for v in v0["th"]]
    gates[K.G_N2] = [1.0 / (1.0 + np.exp(-(v + 32.0) / 8.0)) for v in v0["stn"]]
    gates[K.G_H2] = [1.0 / (1.0 + np.exp((v + 39.0) / 3.1)) for v in v0["stn"]]
    gates[K.G_R2] = [1.0 / (1.0 + np.exp((v + 67.0) / 2.0)) for v in v0["stn"]]
    gates[K.G_CA2] = 0.1
    gates[K.G_C2] = [1.0 / (1.0 + np.exp(-(v + 20.0) / 8.0)) for v in v0["stn"]]
    gates[K.G_N3] = [1.0 / (1.0 + np.exp(-(v + 50.0) / 14.0)) for v in v0["gpe"]]
    gates[K.G_H3] = [1.0 / (1.0 + np.exp((v + 58.0) / 12.0)) for v in v0["gpe"]]
    gates[K.G_R3] = [1.0 / (1.0 + np.exp((v + 70.0) / 2.0)) for v in v0["gpe"]]
    gates[K.G_CA3] = 0.1
    gates[K.G_N4] = [1.0 / (1.0 + np.exp(-(v + 50.0) / 14.0)) for v in v0["gpi"]]
    gates[K.G_H4] = [1.0 / (1.0 + np.exp((v + 58.0) / 12.0)) for v in v0["gpi"]]
    gates[K.G_R4] = [1.0 / (1.0 + np.exp((v + 70.0) / 2.0)) for v in v0["gpi"]]
    gates[K.G_CA4] = 0.1

    return NetworkState(
        condition=condition,
        n=n,
        vth=v0["th"],
        vsn=v0["stn"],
        vge=v0["gpe"],
        vgi=v0["gpi"],
        prev_vsn=v0["stn"].copy(),
        gates=gates,
        syn=np.zeros((K.N_SYN, n)),
        params=params,
        rng=rng,
        raw_params=raw,
    )


def generate_smc_input(
    duration: float,
    dt: float = DEFAULT_DT_MS,
    seed: int | None = None,
    rng: np.random.Generator | None = None,
    amplitude: float = 3.5,
    width_ms: float = 5.0,
    mean_rate_hz: float = 14.0,
    interval_cv: float = 0.2,
) -> SmcInput:
    """Gamma-distributed monophasic pulse train (mean 14 Hz, interval CV 0.2)."""
    if duration <= 0:
        raise ValueError("duration must be positive")
    if rng is None:
        rng = np.random.default_rng(seed)
    shape = 1.0 / interval_cv**2
    mean_interval_ms = 1000.0 / mean_rate_hz
    scale = mean_interval_ms / shape

    n = int(round(duration / dt))
    series = np.zeros(n)
    onsets = []
    t = rng.gamma(shape, scale)
    while t < duration:
        onsets.append(t)
        start = int(round(t / dt))
        end = min(start + int(round(width_ms / dt)), n)
        series[start:end] = amplitude
        t += rng.gamma(shape, scale)
    return SmcInput(
        pulse_onsets=np.asarray(onsets),
        series=series,
        amplitude=amplitude,
        width_ms=width_ms,
        dt=dt,
    )


_EMPTY_HIST = np.zeros((1, 0))


def step(
    state: NetworkState, i_dbs: float, i_smc: float, dt: float = DEFAULT_DT_MS
) -> NetworkState:
    """One explicit-Euler update with constant inputs; mutates `state`."""
    status = K.integrate(
        state.vth, state.vsn, state.vge, state.vgi, state.prev_vsn,
        state.gates, state.syn,
        np.array([float(i_dbs)]), np.array([float(i_smc)]), dt, state.params,
        _EMPTY_HIST, _EMPTY_HIST, _EMPTY_HIST, _EMPTY_HIST,
    )
    if status != 0:
        raise Divergence("membrane voltage left the guard band")
    return state


def detect_spikes(
    trace,
    dt: float,
    threshold: float = -35.0,
    refractory_ms: float = 2.0,
) -> np.ndarray:
    """Times (ms) of upward threshold crossings with refractory separation."""
    v = np.asarray(trace, dtype=float)
    if v.size == 0:
        raise ValueError("empty trace")
    crossings = np.flatnonzero((v[:-1] < threshold) & (v[1:] >= threshold)) + 1
    times = []
    last = -np.inf
    for idx in crossings:
        t = idx * dt
        if t - last >= refractory_ms:
            times.append(t)
            last = t
    return np.asarray(times)


def run_round(
    state: NetworkState,
    train: PulseTrain,
    duration: float = 1000.0,
    record: bool = True,
) -> tuple[NetworkState, RoundObservation | None]:
    """Integrate one round with fresh SMC input drawn from the state's rng.

    Mutates and returns the carry-over state. With record=False only the
    state is advanced (used for warm-in).
    """
    dt = train.dt
    n_steps = int(round(duration / dt))
    if train.samples.size < n_steps:
        raise ValueError("pulse train shorter than requested duration")
    smc = generate_smc_input(duration, dt, rng=state.rng)
    i_dbs = np.ascontiguousarray(train.samples[:n_steps])

    if record:
        hists = [np.empty((state.n, n_steps)) for _ in range(4)]
    else:
        hists = [_EMPTY_HIST] * 4
    status = K.integrate(
        state.vth, state.vsn, state.vge, state.vgi, state.prev_vsn,
        state.gates, state.syn,
        i_dbs, smc.series, dt, state.params,
        hists[3], hists[0], hists[1], hists[2],
    )
    if status != 0:
        raise Divergence(
            f"membrane voltage left the guard band at step {status - 1}"
        )
    if not record:
        return state, None

    vsn_hist, vge_hist, vgi_hist, vth_hist = hists[0], hists[1], hists[2], hists[3]
    spikes = {
        "stn": [detect_spikes(tr, dt) for tr in vsn_hist],
        "gpe": [detect_spikes(tr, dt) for tr in vge_hist],
        "gpi": [detect_spikes(tr, dt) for tr in vgi_hist],
        "th": [detect_spikes(tr, dt) for tr in vth_hist],
    }
    obs = RoundObservation(
        gpi_traces=vgi_hist,
        th_traces=vth_hist,
        i_dbs=i_dbs,
        smc=smc,
        spikes=spikes,
        dt=dt,
    )
    return state, obs
