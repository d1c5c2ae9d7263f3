"""Command-line entry point for the benchmark harness.

Subcommands:
  run        one policy, one experiment
  compare    several policies on the same environment and seeds
  grid       eps x K search for the adaptive controller
  intervene  scripted arm-pruning scenario with a reconvergence report
  calibrate  build a surrogate spec from biophysical-network rounds

Configs are YAML/JSON mappings of ExperimentConfig fields; command-line
flags override config-file values.
"""
from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np
import yaml

from . import __version__, bench
from .env import BgtEnv, SurrogateSpec, calibrate_surrogate, default_surrogate_spec


def _parse_seeds(text: str) -> tuple[int, ...]:
    """Comma-separated ids and inclusive ranges, e.g. "0-9" or "0,3,7-9"."""
    seeds = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            seeds.extend(range(int(lo), int(hi) + 1))
        else:
            seeds.append(int(part))
    return tuple(seeds)


def _load_config(args) -> bench.ExperimentConfig:
    data = {}
    if args.config:
        loaded = yaml.safe_load(Path(args.config).read_text())
        if not isinstance(loaded, dict):
            raise bench.ConfigError("config file must be a mapping")
        data.update(loaded)
    if args.seeds is not None:
        data["seeds"] = _parse_seeds(args.seeds)
    if args.rounds is not None:
        data["rounds"] = args.rounds
    if args.env is not None:
        data["environment"] = args.env
    if getattr(args, "policy", None) is not None:
        data["policy"] = args.policy
    if args.out_dir is not None:
        data["out_dir"] = args.out_dir
    return bench.ExperimentConfig.from_dict(data)


def _out_dir(cfg: bench.ExperimentConfig) -> Path:
    out = Path(cfg.out_dir or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _env_means(cfg: bench.ExperimentConfig) -> np.ndarray:
    """Per-arm mean rewards used for regret (surrogate spec statistics)."""
    spec = (
        SurrogateSpec.load(cfg.surrogate_spec_path)
        if cfg.surrogate_spec_path
        else default_surrogate_spec()
    )
    return spec.reward_mean


def _write_rewards_csv(logs: dict, seeds, path) -> None:
    """Mean instantaneous reward per round, one column per policy."""
    labels = list(logs)
    means = {
        label: np.nanmean(log.rewards_by_seed(seeds), axis=0)
        for label, log in logs.items()
    }
    rounds = max(m.size for m in means.values())
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["round"] + labels)
        for i in range(rounds):
            writer.writerow(
                [i + 1] + [f"{means[label][i]:.17g}" for label in labels]
            )


def cmd_run(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(cfg)
    log = bench.run_experiment(cfg)
    bench.export_runlog_csv(log, out / "runlog.csv")
    _write_rewards_csv({cfg.policy: log}, cfg.seeds, out / "rewards.csv")
    written = ["runlog.csv", "rewards.csv"]
    if cfg.environment == "surrogate":
        series = bench.compute_regret(log, cfg.optimal_arm_id(), _env_means(cfg))
        bench.export_regret_csv(series, out / "regret.csv")
        written.append("regret.csv")
        if args.format == "svg":
            bench.export_regret_svg({cfg.policy: series}, out / "regret.svg")
            written.append("regret.svg")
    if args.format == "svg":
        bench.export_reward_svg(
            {cfg.policy: log}, {cfg.policy: cfg.seeds}, out / "rewards.svg"
        )
        written.append("rewards.svg")
    rewards = log.rewards_by_seed(cfg.seeds)
    print(f"{cfg.policy}: {len(cfg.seeds)} seeds x {cfg.rounds} rounds, "
          f"mean cumulative reward {rewards.sum(axis=1).mean():+.4f}")
    print("wrote " + ", ".join(str(out / w) for w in written))
    return 0


def cmd_compare(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(cfg)
    policies = [p.strip() for p in args.policies.split(",")]
    logs, series = {}, {}
    means = _env_means(cfg) if cfg.environment == "surrogate" else None
    for name in policies:
        pol_cfg = bench.ExperimentConfig(
            **{**cfg.to_dict(), "policy": name, "policy_params": {}}
        )
        log = bench.run_experiment(pol_cfg)
        logs[name] = log
        bench.export_runlog_csv(log, out / f"runlog_{name}.csv")
        if means is not None:
            series[name] = bench.compute_regret(
                log, cfg.optimal_arm_id(), means
            )
        rewards = log.rewards_by_seed(cfg.seeds)
        print(f"{name}: mean cumulative reward "
              f"{rewards.sum(axis=1).mean():+.4f}")
    _write_rewards_csv(logs, cfg.seeds, out / "rewards.csv")
    if series:
        with open(out / "regret.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["round"] + [f"cumulative_{p}" for p in policies])
            for i in range(cfg.rounds):
                writer.writerow(
                    [i + 1]
                    + [f"{series[p].cumulative_mean[i]:.17g}" for p in policies]
                )
    if args.format == "svg":
        bench.export_reward_svg(
            logs, {p: cfg.seeds for p in policies}, out / "rewards.svg"
        )
        if series:
            bench.export_regret_svg(series, out / "regret.svg")
    print(f"wrote outputs to {out}")
    return 0


def cmd_grid(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(cfg)
    eps_values = [float(v) for v in args.eps.split(",")]
    k_values = [int(v) for v in args.k.split(",")]
    cells = bench.grid_search(
        eps_values, k_values, args.runs_per_cell, cfg,
        seed_offset=args.seed_offset,
    )
    bench.export_heatmap_csv(cells, out / "heatmap.csv")
    if args.format == "svg":
        bench.export_heatmap_svg(cells, out / "heatmap.svg")
    best = max(cells, key=lambda c: c["mean_cumulative_reward"])
    print(f"best cell: eps={best['eps']:g} K={best['k']} "
          f"mean cumulative reward {best['mean_cumulative_reward']:+.4f}")
    print(f"wrote {out / 'heatmap.csv'}")
    return 0


def cmd_intervene(args) -> int:
    cfg = _load_config(args)
    if args.prune_round is not None:
        arm = (
            args.prune_arm
            if args.prune_arm is not None
            else cfg.optimal_arm_id()
        )
        cfg = bench.ExperimentConfig(
            **{**cfg.to_dict(), "interventions": ((args.prune_round, arm),)}
        )
    out = _out_dir(cfg)
    log, report = bench.intervention_run(cfg, _env_means(cfg))
    bench.export_runlog_csv(log, out / "runlog.csv")
    _write_rewards_csv({cfg.policy: log}, cfg.seeds, out / "rewards.csv")
    if args.format == "svg":
        bench.export_reward_svg(
            {cfg.policy: log}, {cfg.policy: cfg.seeds}, out / "rewards.svg"
        )
    stable = [s for s, r in report.first_stable_round.items() if r is not None]
    print(f"post-pruning target arm: {report.target_arm}")
    for seed in cfg.seeds:
        rnd = report.first_stable_round.get(seed)
        state = f"stable from round {rnd}" if rnd else "did not stabilize"
        print(f"  seed {seed}: {state}")
    print(f"{len(stable)}/{len(cfg.seeds)} seeds reconverged; "
          f"wrote {out / 'runlog.csv'}")
    return 0


def cmd_calibrate(args) -> int:
    results = []
    env_seeds = _parse_seeds(args.env_seeds)
    for seed in env_seeds:
        env = BgtEnv(condition=args.condition, seed=seed)
        env.ensure_ready()
        rng = np.random.default_rng(seed + 1000)
        for _ in range(args.rounds_per_arm):
            for arm in rng.permutation(len(env.arms)):
                results.append(env.play(int(arm)))
        print(f"environment seed {seed} done", file=sys.stderr)
    spec = calibrate_surrogate(
        results,
        provenance=(
            "calibrated from the biophysical network environment",
            f"network seeds {list(env_seeds)}, {args.rounds_per_arm} rounds "
            f"per arm per seed, condition {args.condition!r}",
            "rounds of 1000 ms at dt=0.01 ms; per-neuron beta-power biomarker",
        ),
    )
    spec.save(args.out)
    print(f"wrote {args.out}; optimal arm {spec.optimal_arm} "
          f"(f={spec.arms[spec.optimal_arm].frequency:g} Hz, "
          f"A={spec.arms[spec.optimal_arm].amplitude:g} uA/cm^2)")
    return 0


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML/JSON experiment config")
    p.add_argument("--seeds", help='e.g. "0-29" or "0,1,5"')
    p.add_argument("--rounds", type=int)
    p.add_argument("--env", choices=["surrogate", "bgt"])
    p.add_argument("--out-dir")
    p.add_argument("--format", choices=["csv", "svg"], default="csv",
                   help="svg also writes the CSV tables")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="dbsbench",
        description="Closed-loop stimulation-parameter bandit workbench",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="single experiment")
    _add_common(p)
    p.add_argument("--policy", help="t3p | eps_greedy | ucb | bayes_ucb | "
                                    "discounted_ucb | thompson | random")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="multi-policy comparison")
    _add_common(p)
    p.add_argument("--policies", default="t3p,eps_greedy,ucb,bayes_ucb,"
                                         "discounted_ucb,thompson,random")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("grid", help="eps x K search")
    _add_common(p)
    p.add_argument("--eps", default="0.1,0.2,0.3,0.4,0.5,0.6")
    p.add_argument("--k", default="5,10,15,20,25,30")
    p.add_argument("--runs-per-cell", type=int, default=10)
    p.add_argument("--seed-offset", type=int, default=0)
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("intervene", help="scripted arm-pruning scenario")
    _add_common(p)
    p.add_argument("--policy")
    p.add_argument("--prune-round", type=int,
                   help="round at which to drop an arm")
    p.add_argument("--prune-arm", type=int,
                   help="arm id to drop (default: the configured optimal arm)")
    p.set_defaults(func=cmd_intervene)

    p = sub.add_parser("calibrate", help="build a surrogate spec")
    p.add_argument("--out", required=True)
    p.add_argument("--env-seeds", default="0-2")
    p.add_argument("--rounds-per-arm", type=int, default=3)
    p.add_argument("--condition", default="pd")
    p.set_defaults(func=cmd_calibrate)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
