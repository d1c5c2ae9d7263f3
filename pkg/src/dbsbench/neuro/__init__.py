"""Basal ganglia-thalamic network simulation."""
from .model import (
    Divergence,
    NetworkState,
    RoundObservation,
    SmcInput,
    detect_spikes,
    generate_smc_input,
    init_network,
    load_params,
    pack_params,
    run_round,
    step,
)

__all__ = [
    "Divergence",
    "NetworkState",
    "RoundObservation",
    "SmcInput",
    "detect_spikes",
    "generate_smc_input",
    "init_network",
    "load_params",
    "pack_params",
    "run_round",
    "step",
]
