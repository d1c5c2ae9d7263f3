"""Experiment harness: closed-loop runs, regret, grid search, intervention
scenarios, and CSV/SVG export.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .env import BgtEnv, SurrogateEnv, SurrogateSpec, default_surrogate_spec
from .policy import T3PPolicy, make_policy
from .stim import build_arm_space

N_ARMS = 31


class ConfigError(ValueError):
    pass


class UnknownArm(KeyError):
    pass


@dataclass
class ExperimentConfig:
    environment: str = "surrogate"  # "surrogate" | "bgt"
    surrogate_spec_path: str | None = None  # None -> packaged default
    condition: str = "pd"  # bgt only
    n_per_region: int = 10  # bgt only
    policy: str = "t3p"
    policy_params: dict = field(default_factory=dict)
    rounds: int = 75
    seeds: tuple[int, ...] = tuple(range(10))
    round_length_ms: float = 1000.0
    dt_ms: float = 0.01
    sampling_rate_hz: float = 100_000.0
    optimal_arm: tuple[float, float] = (155.0, 1000.0)  # (frequency, amplitude)
    interventions: tuple[tuple[int, int], ...] = ()  # (round, arm_id)
    out_dir: str | None = None

    _FIELDS = (
        "environment", "surrogate_spec_path", "condition", "n_per_region",
        "policy", "policy_params", "rounds", "seeds", "round_length_ms",
        "dt_ms", "sampling_rate_hz", "optimal_arm", "interventions", "out_dir",
    )

    def __post_init__(self):
        self.seeds = tuple(int(s) for s in self.seeds)
        self.interventions = tuple(
            (int(r), int(a)) for r, a in self.interventions
        )
        self.optimal_arm = tuple(float(v) for v in self.optimal_arm)
        if self.environment not in ("surrogate", "bgt"):
            raise ConfigError(f"unknown environment {self.environment!r}")
        if self.rounds < 1:
            raise ConfigError("rounds must be >= 1")
        if not self.seeds:
            raise ConfigError("seeds must be non-empty")
        if abs(self.sampling_rate_hz * self.dt_ms - 1000.0) > 1e-6:
            raise ConfigError("sampling_rate_hz inconsistent with dt_ms")
        for rnd, arm in self.interventions:
            if rnd >= self.rounds:
                raise ConfigError(
                    f"intervention round {rnd} is not before rounds={self.rounds}"
                )
            if not 0 <= arm < N_ARMS:
                raise ConfigError(f"intervention arm {arm} out of range")

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        unknown = set(data) - set(cls._FIELDS)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["seeds"] = list(self.seeds)
        d["interventions"] = [list(i) for i in self.interventions]
        d["optimal_arm"] = list(self.optimal_arm)
        return d

    def fingerprint(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()

    def optimal_arm_id(self) -> int:
        space = build_arm_space()
        f, a = self.optimal_arm
        for i, arm in enumerate(space.arms):
            if arm.frequency == f and arm.amplitude == a:
                return i
        raise UnknownArm(self.optimal_arm)


@dataclass(frozen=True)
class RoundRecord:
    seed: int
    round: int  # 1-based
    arm: int
    frequency: float
    amplitude: float
    eps: float  # nan for policies without an exploration rate
    phase: str
    r1: float
    r2: float
    r3: float
    reward: float
    p_beta: float


@dataclass
class RunLog:
    records: list[RoundRecord]
    config_fingerprint: str
    version: str = __version__

    def rewards_by_seed(self, seeds) -> np.ndarray:
        """(n_seeds, rounds) matrix of instantaneous rewards."""
        order = {s: i for i, s in enumerate(seeds)}
        rounds = max(r.round for r in self.records)
        out = np.full((len(seeds), rounds), np.nan)
        for r in self.records:
            out[order[r.seed], r.round - 1] = r.reward
        return out


def make_environment(cfg: ExperimentConfig, seed: int):
    if cfg.environment == "surrogate":
        spec = (
            SurrogateSpec.load(cfg.surrogate_spec_path)
            if cfg.surrogate_spec_path
            else default_surrogate_spec()
        )
        return SurrogateEnv(spec, seed=[0, seed])
    return BgtEnv(
        condition=cfg.condition,
        n_per_region=cfg.n_per_region,
        seed=seed,
        round_ms=cfg.round_length_ms,
        dt_ms=cfg.dt_ms,
    )


def run_experiment(cfg: ExperimentConfig) -> RunLog:
    """One policy over all seeds; scripted interventions applied before the
    selection of their event round."""
    space = build_arm_space()
    records = []
    for seed in cfg.seeds:
        env = make_environment(cfg, seed)
        policy = make_policy(
            cfg.policy, N_ARMS,
            rng=np.random.default_rng([1, seed]),
            **cfg.policy_params,
        )
        events = {rnd: arm for rnd, arm in cfg.interventions}
        for rnd in range(1, cfg.rounds + 1):
            if rnd in events and isinstance(policy, T3PPolicy):
                policy.intervene_prune(events[rnd])
            arm = policy.select()
            result = env.play(arm)
            policy.update(arm, result.reward.total, p_beta=result.p_beta.value)
            eps = policy.eps if isinstance(policy, T3PPolicy) else math.nan
            phase = policy.phase if isinstance(policy, T3PPolicy) else ""
            params = space[arm]
            records.append(
                RoundRecord(
                    seed=seed,
                    round=rnd,
                    arm=arm,
                    frequency=params.frequency,
                    amplitude=params.amplitude,
                    eps=eps,
                    phase=phase,
                    r1=result.reward.r1,
                    r2=result.reward.r2,
                    r3=result.reward.r3,
                    reward=result.reward.total,
                    p_beta=result.p_beta.value,
                )
            )
    return RunLog(records=records, config_fingerprint=cfg.fingerprint())


@dataclass
class RegretSeries:
    rounds: np.ndarray  # 1..T
    instantaneous_mean: np.ndarray
    instantaneous_std: np.ndarray
    cumulative_mean: np.ndarray
    cumulative_std: np.ndarray
    per_seed_cumulative: np.ndarray  # (n_seeds, T)


def compute_regret(
    log: RunLog, optimal_arm: int, env_means: np.ndarray
) -> RegretSeries:
    """Mean-reward shortfall of the played arm versus the reference arm."""
    env_means = np.asarray(env_means, dtype=float)
    seeds = sorted({r.seed for r in log.records})
    rounds = max(r.round for r in log.records)
    if not 0 <= optimal_arm < env_means.size:
        raise UnknownArm(optimal_arm)
    inst = np.zeros((len(seeds), rounds))
    order = {s: i for i, s in enumerate(seeds)}
    for r in log.records:
        if not 0 <= r.arm < env_means.size:
            raise UnknownArm(r.arm)
        inst[order[r.seed], r.round - 1] = (
            env_means[optimal_arm] - env_means[r.arm]
        )
    cum = np.cumsum(inst, axis=1)
    return RegretSeries(
        rounds=np.arange(1, rounds + 1),
        instantaneous_mean=inst.mean(axis=0),
        instantaneous_std=inst.std(axis=0),
        cumulative_mean=cum.mean(axis=0),
        cumulative_std=cum.std(axis=0),
        per_seed_cumulative=cum,
    )


def grid_search(
    eps_values,
    k_values,
    runs_per_cell: int,
    cfg: ExperimentConfig,
    seed_offset: int = 0,
) -> list[dict]:
    """Mean cumulative reward of the T3P controller per (eps, K) cell."""
    if not len(eps_values) or not len(k_values):
        raise ConfigError("empty grid")
    if runs_per_cell < 1:
        raise ConfigError("runs_per_cell must be >= 1")
    cells = []
    for eps in eps_values:
        for k in k_values:
            params = dict(cfg.policy_params)
            params.update(eps_start=float(eps), top_k=int(k))
            cell_cfg = ExperimentConfig(
                **{
                    **cfg.to_dict(),
                    "policy": "t3p",
                    "policy_params": params,
                    "seeds": tuple(
                        seed_offset + i for i in range(runs_per_cell)
                    ),
                }
            )
            log = run_experiment(cell_cfg)
            rewards = log.rewards_by_seed(cell_cfg.seeds)
            cells.append(
                {
                    "eps": float(eps),
                    "k": int(k),
                    "mean_cumulative_reward": float(rewards.sum(axis=1).mean()),
                }
            )
    return cells


@dataclass
class InterventionReport:
    target_arm: int  # expected post-intervention best arm
    greedy_by_seed: dict  # seed -> list of played arms per round
    first_stable_round: dict  # seed -> round or None
    stable_window: int = 10


def intervention_run(
    cfg: ExperimentConfig, env_means: np.ndarray, stable_window: int = 10
) -> tuple[RunLog, InterventionReport]:
    """Run with scripted pruning and report reconvergence per seed."""
    if not cfg.interventions:
        raise ConfigError("config has no intervention events")
    log = run_experiment(cfg)
    pruned = {arm for _, arm in cfg.interventions}
    means = np.asarray(env_means, dtype=float)
    remaining = [a for a in range(means.size) if a not in pruned]
    target = max(remaining, key=lambda a: means[a])

    first_event = min(rnd for rnd, _ in cfg.interventions)
    played = {}
    for r in log.records:
        played.setdefault(r.seed, []).append(r.arm)
    first_stable = {}
    for seed, arms in played.items():
        first_stable[seed] = None
        for start in range(first_event - 1, len(arms) - stable_window + 1):
            window = arms[start : start + stable_window]
            if all(a == target for a in window):
                first_stable[seed] = start + 1  # 1-based round
                break
    return log, InterventionReport(
        target_arm=target,
        greedy_by_seed=played,
        first_stable_round=first_stable,
        stable_window=stable_window,
    )


# --- export -------------------------------------------------------------------
def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def export_runlog_csv(log: RunLog, path) -> None:
    fields = [
        "seed", "round", "arm", "frequency", "amplitude", "eps", "phase",
        "r1", "r2", "r3", "reward", "p_beta",
    ]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(fields)
        for r in log.records:
            writer.writerow([_fmt(getattr(r, f)) for f in fields])


def load_runlog_csv(path, config_fingerprint: str = "") -> RunLog:
    records = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            records.append(
                RoundRecord(
                    seed=int(row["seed"]),
                    round=int(row["round"]),
                    arm=int(row["arm"]),
                    frequency=float(row["frequency"]),
                    amplitude=float(row["amplitude"]),
                    eps=float(row["eps"]),
                    phase=row["phase"],
                    r1=float(row["r1"]),
                    r2=float(row["r2"]),
                    r3=float(row["r3"]),
                    reward=float(row["reward"]),
                    p_beta=float(row["p_beta"]),
                )
            )
    return RunLog(records=records, config_fingerprint=config_fingerprint)


def export_regret_csv(series: RegretSeries, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["round", "instantaneous_mean", "instantaneous_std",
             "cumulative_mean", "cumulative_std"]
        )
        for i, rnd in enumerate(series.rounds):
            writer.writerow(
                [int(rnd),
                 _fmt(float(series.instantaneous_mean[i])),
                 _fmt(float(series.instantaneous_std[i])),
                 _fmt(float(series.cumulative_mean[i])),
                 _fmt(float(series.cumulative_std[i]))]
            )


def export_heatmap_csv(cells: list[dict], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["eps", "k", "mean_cumulative_reward"])
        for c in cells:
            writer.writerow(
                [_fmt(c["eps"]), c["k"], _fmt(c["mean_cumulative_reward"])]
            )


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def export_reward_svg(logs: dict[str, RunLog], seeds_by_label: dict, path) -> None:
    """Mean instantaneous reward versus round, one line per policy."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(7, 4))
    for label, log in logs.items():
        rewards = log.rewards_by_seed(seeds_by_label[label])
        mean = np.nanmean(rewards, axis=0)
        ax.plot(np.arange(1, mean.size + 1), mean, label=label)
    ax.set_xlabel("round")
    ax.set_ylabel("mean instantaneous reward")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def export_regret_svg(series_by_label: dict[str, RegretSeries], path) -> None:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(7, 4))
    for label, series in series_by_label.items():
        ax.plot(series.rounds, series.cumulative_mean, label=label)
        ax.fill_between(
            series.rounds,
            series.cumulative_mean - series.cumulative_std,
            series.cumulative_mean + series.cumulative_std,
            alpha=0.2,
        )
    ax.set_xlabel("round")
    ax.set_ylabel("mean cumulative regret")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def export_heatmap_svg(cells: list[dict], path) -> None:
    plt = _pyplot()
    eps_values = sorted({c["eps"] for c in cells})
    k_values = sorted({c["k"] for c in cells})
    grid = np.full((len(eps_values), len(k_values)), np.nan)
    for c in cells:
        grid[eps_values.index(c["eps"]), k_values.index(c["k"])] = c[
            "mean_cumulative_reward"
        ]
    fig, ax = plt.subplots(figsize=(6, 4))
    im = ax.imshow(grid, aspect="auto", origin="lower", cmap="RdYlGn")
    ax.set_xticks(range(len(k_values)), [str(k) for k in k_values])
    ax.set_yticks(range(len(eps_values)), [f"{e:g}" for e in eps_values])
    ax.set_xlabel("top-K")
    ax.set_ylabel("eps")
    fig.colorbar(im, ax=ax, label="mean cumulative reward")
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
