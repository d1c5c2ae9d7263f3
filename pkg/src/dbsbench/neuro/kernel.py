"""Numba kernel for the basal ganglia-thalamic network integrator.

State layout (n = neurons per region):
  voltages    : four (n,) arrays vth, vsn, vge, vgi
  gates       : (15, n) array, rows indexed by the G_* constants
  syn         : (5, n) array, rows indexed by the S_* constants
  prev_vsn    : (n,) STN voltage one step back (for spike-triggered synapses)

Parameters are passed as a flat float64 vector indexed by the P_* constants;
`pack_params` in model.py builds it from the shipped JSON table. The
voltage-dependence (steady-state / time-constant) functions below are the
model's kinetics and live in code.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit

# --- parameter vector indices -------------------------------------------------
(
    P_CM,
    P_GL_TH, P_GL_STN, P_GL_GP,
    P_EL_TH, P_EL_STN, P_EL_GP,
    P_GNA_TH, P_GNA_STN, P_GNA_GP,
    P_ENA_TH, P_ENA_STN, P_ENA_GP,
    P_GK_TH, P_GK_STN, P_GK_GP,
    P_EK_TH, P_EK_STN, P_EK_GP,
    P_GT_TH, P_GT_STN, P_GT_GP,
    P_ET,
    P_GCA_STN, P_GCA_GP,
    P_ECA_STN, P_ECA_GP,
    P_GAHP_STN, P_GAHP_GP,
    P_K1_STN, P_K1_GP,
    P_KCA_STN, P_KCA_GP,
    P_GSYN_GESN, P_GSYN_SNGE, P_GSYN_GEGE,
    P_GSYN_SNGI, P_GSYN_GEGI, P_GSYN_GITH,
    P_ESYN_GESN, P_ESYN_SNGE, P_ESYN_GEGE,
    P_ESYN_SNGI, P_ESYN_GEGI, P_ESYN_GITH,
    P_TAU, P_GPEAK_STN, P_GPEAK_GPI,
    P_A_GPE, P_B_GPE, P_THE_GPE,
    P_IAPP_STN, P_IAPP_GPE, P_IAPP_GPI,
) = range(54)
N_PARAMS = 54

# --- gate array row indices ---------------------------------------------------
(
    G_H1, G_R1,
    G_N2, G_H2, G_R2, G_CA2, G_C2,
    G_N3, G_H3, G_R3, G_CA3,
    G_N4, G_H4, G_R4, G_CA4,
) = range(15)
N_GATES = 15

# --- synapse array row indices ------------------------------------------------
S_S2, S_Z2, S_S3, S_S4, S_Z4 = range(5)
N_SYN = 5

# Divergence guard. Grid amplitudes up to 5000 uA/cm^2 on a 1 uF/cm^2
# membrane swing the driven STN voltage by hundreds of mV per 150 us phase,
# so the band is far wider than any unstimulated trajectory needs.
V_GUARD_LOW = -2000.0
V_GUARD_HIGH = 2000.0


# --- gating kinetics ----------------------------------------------------------
@njit(cache=True, inline="always")
def th_minf(v):
    return 1.0 / (1.0 + math.exp(-(v + 37.0) / 7.0))


@njit(cache=True, inline="always")
def th_hinf(v):
    return 1.0 / (1.0 + math.exp((v + 41.0) / 4.0))


@njit(cache=True, inline="always")
def th_pinf(v):
    return 1.0 / (1.0 + math.exp(-(v + 60.0) / 6.2))


@njit(cache=True, inline="always")
def th_rinf(v):
    return 1.0 / (1.0 + math.exp((v + 84.0) / 4.0))


@njit(cache=True, inline="always")
def th_tauh(v):
    ah = 0.128 * math.exp(-(v + 46.0) / 18.0)
    bh = 4.0 / (1.0 + math.exp(-(v + 23.0) / 5.0))
    return 1.0 / (ah + bh)


@njit(cache=True, inline="always")
def th_taur(v):
    return 0.15 * (28.0 + math.exp(-(v + 25.0) / 10.5))


@njit(cache=True, inline="always")
def stn_minf(v):
    return 1.0 / (1.0 + math.exp(-(v + 30.0) / 15.0))


@njit(cache=True, inline="always")
def stn_hinf(v):
    return 1.0 / (1.0 + math.exp((v + 39.0) / 3.1))


@njit(cache=True, inline="always")
def stn_ninf(v):
    return 1.0 / (1.0 + math.exp(-(v + 32.0) / 8.0))


@njit(cache=True, inline="always")
def stn_ainf(v):
    return 1.0 / (1.0 + math.exp(-(v + 63.0) / 7.8))


@njit(cache=True, inline="always")
def stn_binf(r):
    return 1.0 / (1.0 + math.exp(-(r - 0.4) / 0.1)) - 1.0 / (
        1.0 + math.exp(4.0)
    )


@njit(cache=True, inline="always")
def stn_cinf(v):
    return 1.0 / (1.0 + math.exp(-(v + 20.0) / 8.0))


@njit(cache=True, inline="always")
def stn_rinf(v):
    return 1.0 / (1.0 + math.exp((v + 67.0) / 2.0))


@njit(cache=True, inline="always")
def stn_tauh(v):
    return 1.0 + 500.0 / (1.0 + math.exp(-(v + 57.0) / -3.0))


@njit(cache=True, inline="always")
def stn_taun(v):
    return 1.0 + 100.0 / (1.0 + math.exp(-(v + 80.0) / -26.0))


@njit(cache=True, inline="always")
def stn_taur(v):
    return 7.1 + 17.5 / (1.0 + math.exp(-(v - 68.0) / -2.2))


@njit(cache=True, inline="always")
def stn_tauc(v):
    return 1.0 + 10.0 / (1.0 + math.exp((v + 80.0) / 26.0))


@njit(cache=True, inline="always")
def gpe_minf(v):
    return 1.0 / (1.0 + math.exp(-(v + 37.0) / 10.0))


@njit(cache=True, inline="always")
def gpe_hinf(v):
    return 1.0 / (1.0 + math.exp((v + 58.0) / 12.0))


@njit(cache=True, inline="always")
def gpe_ninf(v):
    return 1.0 / (1.0 + math.exp(-(v + 50.0) / 14.0))


@njit(cache=True, inline="always")
def gpe_ainf(v):
    return 1.0 / (1.0 + math.exp(-(v + 57.0) / 2.0))


@njit(cache=True, inline="always")
def gpe_rinf(v):
    return 1.0 / (1.0 + math.exp((v + 70.0) / 2.0))


@njit(cache=True, inline="always")
def gpe_sinf(v):
    return 1.0 / (1.0 + math.exp(-(v + 35.0) / 2.0))


@njit(cache=True, inline="always")
def gpe_tauh(v):
    return 0.05 + 0.27 / (1.0 + math.exp(-(v + 40.0) / -12.0))


@njit(cache=True, inline="always")
def gpe_taun(v):
    return 0.05 + 0.27 / (1.0 + math.exp(-(v + 40.0) / -12.0))


@njit(cache=True, inline="always")
def sigmoid_release(v):
    # presynaptic GPe transmitter release as a function of voltage
    return 1.0 / (1.0 + math.exp(-(v + 57.0) / 2.0))


@njit(cache=True, inline="always")
def _clamp01(x):
    if x < 0.0:
        return 0.0
    if x > 1.0:
        return 1.0
    return x


@njit(cache=True)
def integrate(
    vth, vsn, vge, vgi, prev_vsn, gates, syn,
    i_dbs, i_smc, dt, p,
    vth_hist, vsn_hist, vge_hist, vgi_hist,
):
    """Explicit-Euler integration of n_steps = len(i_dbs) steps.

    Mutates all state arrays in place; writes per-step voltages into the
    *_hist arrays when they are sized (n, n_steps), otherwise skips
    recording. Returns 0 on success, or 1 + the step index at which a
    voltage left the guard band.
    """
    n = vth.shape[0]
    n_steps = i_dbs.shape[0]
    record = vth_hist.shape[1] == n_steps

    cm = p[P_CM]
    tau = p[P_TAU]

    s21 = np.empty(n)
    s31 = np.empty(n)
    s32 = np.empty(n)
    u2 = np.empty(n)
    u4 = np.empty(n)
    new_vth = np.empty(n)
    new_vsn = np.empty(n)
    new_vge = np.empty(n)
    new_vgi = np.empty(n)

    for t in range(n_steps):
        idbs = i_dbs[t]
        ismc = i_smc[t]

        # neighbor coupling: each cell receives from two ring neighbors
        for j in range(n):
            s21[j] = syn[S_S2, (j - 1) % n]
            s31[j] = syn[S_S3, (j + 1) % n]
            s32[j] = syn[S_S3, (j - 2) % n]

        for j in range(n):
            v1 = vth[j]
            v2 = vsn[j]
            v3 = vge[j]
            v4 = vgi[j]

            # --- thalamic cell ----------------------------------------------
            il1 = p[P_GL_TH] * (v1 - p[P_EL_TH])
            h1 = gates[G_H1, j]
            ina1 = p[P_GNA_TH] * th_minf(v1) ** 3 * h1 * (v1 - p[P_ENA_TH])
            ik1 = p[P_GK_TH] * (0.75 * (1.0 - h1)) ** 4 * (v1 - p[P_EK_TH])
            it1 = p[P_GT_TH] * th_pinf(v1) ** 2 * gates[G_R1, j] * (v1 - p[P_ET])
            igith = p[P_GSYN_GITH] * (v1 - p[P_ESYN_GITH]) * syn[S_S4, j]
            new_vth[j] = v1 + dt / cm * (-il1 - ik1 - ina1 - it1 - igith + ismc)

            gates[G_H1, j] = _clamp01(
                h1 + dt * (th_hinf(v1) - h1) / th_tauh(v1)
            )
            gates[G_R1, j] = _clamp01(
                gates[G_R1, j] + dt * (th_rinf(v1) - gates[G_R1, j]) / th_taur(v1)
            )

            # --- STN cell ---------------------------------------------------
            il2 = p[P_GL_STN] * (v2 - p[P_EL_STN])
            ik2 = p[P_GK_STN] * gates[G_N2, j] ** 4 * (v2 - p[P_EK_STN])
            ina2 = p[P_GNA_STN] * stn_minf(v2) ** 3 * gates[G_H2, j] * (
                v2 - p[P_ENA_STN]
            )
            it2 = p[P_GT_STN] * stn_ainf(v2) ** 3 * stn_binf(
                gates[G_R2, j]
            ) ** 2 * (v2 - p[P_ECA_STN])
            ica2 = p[P_GCA_STN] * gates[G_C2, j] ** 2 * (v2 - p[P_ECA_STN])
            iahp2 = p[P_GAHP_STN] * (v2 - p[P_EK_STN]) * (
                gates[G_CA2, j] / (gates[G_CA2, j] + p[P_K1_STN])
            )
            igesn = p[P_GSYN_GESN] * (v2 - p[P_ESYN_GESN]) * (
                syn[S_S3, j] + s31[j]
            )
            new_vsn[j] = v2 + dt / cm * (
                -il2 - ik2 - ina2 - it2 - ica2 - iahp2
                - igesn + p[P_IAPP_STN] + idbs
            )

            gates[G_N2, j] = _clamp01(
                gates[G_N2, j]
                + dt * 0.75 * (stn_ninf(v2) - gates[G_N2, j]) / stn_taun(v2)
            )
            gates[G_H2, j] = _clamp01(
                gates[G_H2, j]
                + dt * 0.75 * (stn_hinf(v2) - gates[G_H2, j]) / stn_tauh(v2)
            )
            gates[G_R2, j] = _clamp01(
                gates[G_R2, j]
                + dt * 0.2 * (stn_rinf(v2) - gates[G_R2, j]) / stn_taur(v2)
            )
            ca2 = gates[G_CA2, j] + dt * 3.75e-5 * (
                -ica2 - it2 - p[P_KCA_STN] * gates[G_CA2, j]
            )
            gates[G_CA2, j] = ca2 if ca2 > 0.0 else 0.0
            gates[G_C2, j] = _clamp01(
                gates[G_C2, j]
                + dt * 0.08 * (stn_cinf(v2) - gates[G_C2, j]) / stn_tauc(v2)
            )

            # --- GPe cell ---------------------------------------------------
            il3 = p[P_GL_GP] * (v3 - p[P_EL_GP])
            ik3 = p[P_GK_GP] * gates[G_N3, j] ** 4 * (v3 - p[P_EK_GP])
            ina3 = p[P_GNA_GP] * gpe_minf(v3) ** 3 * gates[G_H3, j] * (
                v3 - p[P_ENA_GP]
            )
            it3 = p[P_GT_GP] * gpe_ainf(v3) ** 3 * gates[G_R3, j] * (
                v3 - p[P_ECA_GP]
            )
            ica3 = p[P_GCA_GP] * gpe_sinf(v3) ** 2 * (v3 - p[P_ECA_GP])
            iahp3 = p[P_GAHP_GP] * (v3 - p[P_EK_GP]) * (
                gates[G_CA3, j] / (gates[G_CA3, j] + p[P_K1_GP])
            )
            isnge = p[P_GSYN_SNGE] * (v3 - p[P_ESYN_SNGE]) * (
                syn[S_S2, j] + s21[j]
            )
            igege = p[P_GSYN_GEGE] * (v3 - p[P_ESYN_GEGE]) * (s31[j] + s32[j])
            new_vge[j] = v3 + dt / cm * (
                -il3 - ik3 - ina3 - it3 - ica3 - iahp3
                - isnge - igege + p[P_IAPP_GPE]
            )

            gates[G_N3, j] = _clamp01(
                gates[G_N3, j]
                + dt * 0.1 * (gpe_ninf(v3) - gates[G_N3, j]) / gpe_taun(v3)
            )
            gates[G_H3, j] = _clamp01(
                gates[G_H3, j]
                + dt * 0.05 * (gpe_hinf(v3) - gates[G_H3, j]) / gpe_tauh(v3)
            )
            gates[G_R3, j] = _clamp01(
                gates[G_R3, j] + dt * (gpe_rinf(v3) - gates[G_R3, j]) / 30.0
            )
            ca3 = gates[G_CA3, j] + dt * 1e-4 * (
                -ica3 - it3 - p[P_KCA_GP] * gates[G_CA3, j]
            )
            gates[G_CA3, j] = ca3 if ca3 > 0.0 else 0.0
            syn[S_S3, j] = syn[S_S3, j] + dt * (
                p[P_A_GPE]
                * (1.0 - syn[S_S3, j])
                * sigmoid_release(v3 - p[P_THE_GPE])
                - p[P_B_GPE] * syn[S_S3, j]
            )

            # --- GPi cell ---------------------------------------------------
            il4 = p[P_GL_GP] * (v4 - p[P_EL_GP])
            ik4 = p[P_GK_GP] * gates[G_N4, j] ** 4 * (v4 - p[P_EK_GP])
            ina4 = p[P_GNA_GP] * gpe_minf(v4) ** 3 * gates[G_H4, j] * (
                v4 - p[P_ENA_GP]
            )
            it4 = p[P_GT_GP] * gpe_ainf(v4) ** 3 * gates[G_R4, j] * (
                v4 - p[P_ECA_GP]
            )
            ica4 = p[P_GCA_GP] * gpe_sinf(v4) ** 2 * (v4 - p[P_ECA_GP])
            iahp4 = p[P_GAHP_GP] * (v4 - p[P_EK_GP]) * (
                gates[G_CA4, j] / (gates[G_CA4, j] + p[P_K1_GP])
            )
            isngi = p[P_GSYN_SNGI] * (v4 - p[P_ESYN_SNGI]) * (
                syn[S_S2, j] + s21[j]
            )
            igegi = p[P_GSYN_GEGI] * (v4 - p[P_ESYN_GEGI]) * (s31[j] + s32[j])
            new_vgi[j] = v4 + dt / cm * (
                -il4 - ik4 - ina4 - it4 - ica4 - iahp4
                - isngi - igegi + p[P_IAPP_GPI]
            )

            gates[G_N4, j] = _clamp01(
                gates[G_N4, j]
                + dt * 0.1 * (gpe_ninf(v4) - gates[G_N4, j]) / gpe_taun(v4)
            )
            gates[G_H4, j] = _clamp01(
                gates[G_H4, j]
                + dt * 0.05 * (gpe_hinf(v4) - gates[G_H4, j]) / gpe_tauh(v4)
            )
            gates[G_R4, j] = _clamp01(
                gates[G_R4, j] + dt * (gpe_rinf(v4) - gates[G_R4, j]) / 30.0
            )
            ca4 = gates[G_CA4, j] + dt * 1e-4 * (
                -ica4 - it4 - p[P_KCA_GP] * gates[G_CA4, j]
            )
            gates[G_CA4, j] = ca4 if ca4 > 0.0 else 0.0

        # spike-triggered second-order (alpha) synapses
        for j in range(n):
            if prev_vsn[j] < -10.0 and vsn[j] > -10.0:
                u2[j] = p[P_GPEAK_STN] / (tau * math.exp(-1.0)) / dt
            else:
                u2[j] = 0.0
            if vgi[j] < -10.0 and new_vgi[j] > -10.0:
                u4[j] = p[P_GPEAK_GPI] / (tau * math.exp(-1.0)) / dt
            else:
                u4[j] = 0.0

        for j in range(n):
            z2 = syn[S_Z2, j]
            syn[S_S2, j] = syn[S_S2, j] + dt * z2
            syn[S_Z2, j] = z2 + dt * (
                u2[j] - 2.0 / tau * z2 - syn[S_S2, j] / tau**2
            )
            z4 = syn[S_Z4, j]
            syn[S_S4, j] = syn[S_S4, j] + dt * z4
            syn[S_Z4, j] = z4 + dt * (
                u4[j] - 2.0 / tau * z4 - syn[S_S4, j] / tau**2
            )

        for j in range(n):
            prev_vsn[j] = vsn[j]
            vth[j] = new_vth[j]
            vsn[j] = new_vsn[j]
            vge[j] = new_vge[j]
            vgi[j] = new_vgi[j]
            if record:
                vth_hist[j, t] = new_vth[j]
                vsn_hist[j, t] = new_vsn[j]
                vge_hist[j, t] = new_vge[j]
                vgi_hist[j, t] = new_vgi[j]
            if not (
                V_GUARD_LOW < new_vth[j] < V_GUARD_HIGH
                and V_GUARD_LOW < new_vsn[j] < V_GUARD_HIGH
                and V_GUARD_LOW < new_vge[j] < V_GUARD_HIGH
                and V_GUARD_LOW < new_vgi[j] < V_GUARD_HIGH
            ):
                return t + 1
    return 0
