"""Closed-loop environments and the reward function.

Two interchangeable environments implement ``play(arm_id) -> RoundResult``:
the full biophysical network (BgtEnv) and a calibrated stochastic surrogate
(SurrogateEnv) for fast policy benchmarking.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import neuro
from .signal import BetaPower, region_beta_power, rms_of_series
from .stim import ArmSpace, build_arm_space, generate_pulse_train

#: Largest RMS the arm grid can produce: 5000 uA/cm^2 at 180 Hz.
MAX_GRID_RMS = 5000.0 * math.sqrt(0.0003 * 180.0)


class UnknownArm(KeyError):
    pass


class InsufficientData(ValueError):
    pass


@dataclass
class RewardConfig:
    """Reward coefficients and normalization references."""

    alpha: float = -0.7  # weight of normalized beta power (r1)
    beta: float = 0.1  # weight of off-stimulation fraction (r2)
    gamma: float = -0.2  # weight of normalized RMS current (r3)
    p_beta_norm_ref: float = 1.0
    i_rms_norm_ref: float = MAX_GRID_RMS


@dataclass(frozen=True)
class RewardBreakdown:
    r1: float  # normalized beta power, clamped to [0, 1]
    r2: float  # fraction of timesteps with zero stimulation
    r3: float  # normalized RMS current, clamped to [0, 1]
    total: float


@dataclass(frozen=True)
class RoundResult:
    arm: int
    reward: RewardBreakdown
    p_beta: BetaPower
    observation: neuro.RoundObservation | None = None


def compute_reward(
    p_beta, i_dbs, dt: float, cfg: RewardConfig
) -> RewardBreakdown:
    """Instantaneous per-round reward: alpha*r1 + beta*r2 + gamma*r3."""
    if cfg.p_beta_norm_ref <= 0 or cfg.i_rms_norm_ref <= 0:
        raise ValueError("normalization references must be positive")
    pb = p_beta.value if isinstance(p_beta, BetaPower) else float(p_beta)
    i = np.asarray(i_dbs, dtype=float)
    r1 = min(max(pb / cfg.p_beta_norm_ref, 0.0), 1.0)
    r2 = float(np.mean(i == 0.0))
    r3 = min(max(rms_of_series(i, dt) / cfg.i_rms_norm_ref, 0.0), 1.0)
    total = cfg.alpha * r1 + cfg.beta * r2 + cfg.gamma * r3
    return RewardBreakdown(r1=r1, r2=r2, r3=r3, total=total)


@dataclass
class SurrogateSpec:
    """Per-arm reward and biomarker distributions for the surrogate env."""

    arms: ArmSpace
    reward_mean: np.ndarray
    reward_std: np.ndarray
    pbeta_mean: np.ndarray
    pbeta_std: np.ndarray
    provenance: tuple[str, ...] = ()

    def __post_init__(self):
        k = len(self.arms)
        for name in ("reward_mean", "reward_std", "pbeta_mean", "pbeta_std"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (k,):
                raise ValueError(f"{name} must have one entry per arm")
            setattr(self, name, arr)
        best = np.max(self.reward_mean)
        if np.sum(self.reward_mean == best) != 1:
            raise ValueError("spec must have a unique best arm")

    @property
    def optimal_arm(self) -> int:
        return int(np.argmax(self.reward_mean))

    def save(self, path) -> None:
        lines = [f"# {p}" for p in self.provenance]
        lines.append("arm_id,frequency_hz,amplitude_ua_cm2,reward_mean,reward_std,pbeta_mean,pbeta_std")
        for i, arm in enumerate(self.arms.arms):
            lines.append(
                f"{i},{arm.frequency:.17g},{arm.amplitude:.17g},"
                f"{self.reward_mean[i]:.17g},{self.reward_std[i]:.17g},"
                f"{self.pbeta_mean[i]:.17g},{self.pbeta_std[i]:.17g}"
            )
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path) -> "SurrogateSpec":
        provenance = []
        rows = []
        header_seen = False
        for line in Path(path).read_text().splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                provenance.append(line.lstrip("# "))
                continue
            if not header_seen:
                header_seen = True  # column header row
                continue
            rows.append([float(v) for v in line.split(",")])
        space = build_arm_space()
        if len(rows) != len(space):
            raise ValueError(
                f"spec has {len(rows)} arms, expected {len(space)}"
            )
        rows.sort(key=lambda r: r[0])
        data = np.asarray(rows)
        for i, arm in enumerate(space.arms):
            if data[i, 1] != arm.frequency or data[i, 2] != arm.amplitude:
                raise ValueError(f"arm {i} parameters do not match the grid")
        return cls(
            arms=space,
            reward_mean=data[:, 3],
            reward_std=data[:, 4],
            pbeta_mean=data[:, 5],
            pbeta_std=data[:, 6],
            provenance=tuple(provenance),
        )


def default_surrogate_spec() -> SurrogateSpec:
    """The calibrated spec shipped with the package."""
    from importlib import resources

    with resources.as_file(
        resources.files("dbsbench.data").joinpath("default_surrogate.csv")
    ) as path:
        return SurrogateSpec.load(path)


class SurrogateEnv:
    """Draws per-round reward and biomarker from calibrated distributions."""

    def __init__(self, spec: SurrogateSpec, seed=0):
        self.spec = spec
        self.arms = spec.arms
        self.rng = np.random.default_rng(seed)

    def play(self, arm: int) -> RoundResult:
        if not 0 <= arm < len(self.arms):
            raise UnknownArm(arm)
        reward = float(
            self.rng.normal(self.spec.reward_mean[arm], self.spec.reward_std[arm])
        )
        pbeta = float(
            self.rng.normal(self.spec.pbeta_mean[arm], self.spec.pbeta_std[arm])
        )
        pbeta = max(pbeta, 0.0)
        return RoundResult(
            arm=arm,
            reward=RewardBreakdown(r1=math.nan, r2=math.nan, r3=math.nan, total=reward),
            p_beta=BetaPower(value=pbeta, method="surrogate"),
        )

    def arm_means(self) -> np.ndarray:
        return self.spec.reward_mean.copy()


class BgtEnv:
    """One simulated patient: plays arms on the biophysical network.

    On the first play the network is warmed in and a short unstimulated
    baseline fixes the beta-power normalization reference for r1.

    The default biomarker path averages per-neuron beta powers; at desk
    scale (10 neurons/region) the mean-potential LFP path cancels the
    asynchronous pathological bursting, so the per-neuron path is the one
    that separates the disease conditions. Both remain available.
    """

    def __init__(
        self,
        condition: str = "pd",
        n_per_region: int = 10,
        seed: int = 0,
        round_ms: float = 1000.0,
        dt_ms: float = 0.01,
        warm_in_ms: float = 2000.0,
        baseline_rounds: int = 5,
        biomarker_path: str = "per_neuron",
        reward_cfg: RewardConfig | None = None,
        keep_observations: bool = False,
    ):
        self.arms = build_arm_space()
        self.condition = condition
        self.round_ms = round_ms
        self.dt_ms = dt_ms
        self.fs = 1000.0 / dt_ms
        self.warm_in_ms = warm_in_ms
        self.baseline_rounds = baseline_rounds
        self.biomarker_path = biomarker_path
        self.keep_observations = keep_observations
        self.reward_cfg = reward_cfg or RewardConfig()
        self.state = neuro.init_network(condition, n_per_region, seed)
        self._trains = {}
        self._ready = False

    def _train_for(self, arm: int):
        train = self._trains.get(arm)
        if train is None:
            train = generate_pulse_train(
                self.arms[arm], self.round_ms, self.dt_ms
            )
            self._trains[arm] = train
        return train

    def _measure_round(self, arm: int):
        self.state, obs = neuro.run_round(
            self.state, self._train_for(arm), self.round_ms
        )
        pbeta = region_beta_power(
            obs.gpi_traces, self.fs, path=self.biomarker_path
        )
        return obs, pbeta

    def ensure_ready(self) -> None:
        """Warm in and, unless overridden, calibrate the r1 reference."""
        if self._ready:
            return
        warm_rounds = int(round(self.warm_in_ms / self.round_ms))
        for _ in range(warm_rounds):
            self.state, _ = neuro.run_round(
                self.state, self._train_for(0), self.round_ms, record=False
            )
        if self.baseline_rounds > 0:
            baseline = []
            for _ in range(self.baseline_rounds):
                _, pbeta = self._measure_round(0)
                baseline.append(pbeta.value)
            self.reward_cfg.p_beta_norm_ref = float(np.mean(baseline))
        self._ready = True

    def play(self, arm: int) -> RoundResult:
        if not 0 <= arm < len(self.arms):
            raise UnknownArm(arm)
        self.ensure_ready()
        obs, pbeta = self._measure_round(arm)
        reward = compute_reward(pbeta, obs.i_dbs, self.dt_ms, self.reward_cfg)
        return RoundResult(
            arm=arm,
            reward=reward,
            p_beta=pbeta,
            observation=obs if self.keep_observations else None,
        )


def calibrate_surrogate(
    results, arms: ArmSpace | None = None, provenance: tuple[str, ...] = ()
) -> SurrogateSpec:
    """Per-arm sample statistics from BGT round results.

    Requires at least 3 rounds for every arm in the space.
    """
    if arms is None:
        arms = build_arm_space()
    by_arm: dict[int, list[RoundResult]] = {i: [] for i in range(len(arms))}
    for res in results:
        if res.arm not in by_arm:
            raise UnknownArm(res.arm)
        by_arm[res.arm].append(res)
    short = [i for i, rs in by_arm.items() if len(rs) < 3]
    if short:
        raise InsufficientData(f"arms with fewer than 3 rounds: {short}")
    k = len(arms)
    reward_mean = np.empty(k)
    reward_std = np.empty(k)
    pbeta_mean = np.empty(k)
    pbeta_std = np.empty(k)
    for i, rs in by_arm.items():
        rewards = np.array([r.reward.total for r in rs])
        pbetas = np.array([r.p_beta.value for r in rs])
        reward_mean[i] = rewards.mean()
        reward_std[i] = rewards.std(ddof=1)
        pbeta_mean[i] = pbetas.mean()
        pbeta_std[i] = pbetas.std(ddof=1)
    return SurrogateSpec(
        arms=arms,
        reward_mean=reward_mean,
        reward_std=reward_std,
        pbeta_mean=pbeta_mean,
        pbeta_std=pbeta_std,
        provenance=provenance,
    )
