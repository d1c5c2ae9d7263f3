"""Bandit policies: the pruned, re-triggered epsilon-greedy controller and
five classical baselines (epsilon-greedy, UCB, Bayes UCB, Discounted UCB,
Gaussian Thompson sampling) plus a uniform-random reference.

All policies share the contract ``select() -> arm_id`` /
``update(arm, reward, p_beta=None)``, called strictly in alternation.
Ties are always broken toward the lowest arm id, and index-based policies
play any unplayed arm first (lowest id first).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm


class LastArm(RuntimeError):
    """Refusing to prune the only remaining arm."""


@dataclass
class BanditState:
    """Running value estimates shared by the index policies."""

    n_arms: int

    def __post_init__(self):
        self.q = np.zeros(self.n_arms)
        self.n = np.zeros(self.n_arms, dtype=int)
        self.t = 0
        self.active = set(range(self.n_arms))

    def record(self, arm: int, reward: float) -> None:
        self.t += 1
        self.n[arm] += 1
        self.q[arm] += (reward - self.q[arm]) / self.n[arm]


def _argmax_lowest_id(scores: dict[int, float]) -> int:
    best = max(scores.values())
    return min(a for a, s in scores.items() if s == best)


def _first_unplayed(state: BanditState) -> int | None:
    unplayed = [a for a in sorted(state.active) if state.n[a] == 0]
    return unplayed[0] if unplayed else None


class Policy:
    """Interface: alternate select() and update()."""

    def select(self) -> int:
        raise NotImplementedError

    def update(self, arm: int, reward: float, p_beta: float | None = None) -> None:
        raise NotImplementedError


class RandomPolicy(Policy):
    def __init__(self, n_arms: int, rng=None):
        self.state = BanditState(n_arms)
        self.rng = rng if rng is not None else np.random.default_rng()

    def select(self) -> int:
        return int(self.rng.choice(sorted(self.state.active)))

    def update(self, arm, reward, p_beta=None):
        self.state.record(arm, reward)


class EpsGreedyPolicy(Policy):
    def __init__(self, n_arms: int, eps: float = 0.4, rng=None):
        if not 0.0 <= eps <= 1.0:
            raise ValueError("eps must lie in [0, 1]")
        self.state = BanditState(n_arms)
        self.eps = eps
        self.rng = rng if rng is not None else np.random.default_rng()

    def select(self) -> int:
        return eps_greedy_select(self.state, self.eps, self.rng)

    def update(self, arm, reward, p_beta=None):
        self.state.record(arm, reward)


def eps_greedy_select(state: BanditState, eps: float, rng) -> int:
    active = sorted(state.active)
    if eps > 0.0 and rng.random() < eps:
        return int(active[rng.integers(len(active))])
    return _argmax_lowest_id({a: state.q[a] for a in active})


class UcbPolicy(Policy):
    def __init__(self, n_arms: int, c: float = 0.05):
        self.state = BanditState(n_arms)
        self.c = c

    def select(self) -> int:
        return ucb_select(self.state, self.c)

    def update(self, arm, reward, p_beta=None):
        self.state.record(arm, reward)


def ucb_select(state: BanditState, c: float) -> int:
    arm = _first_unplayed(state)
    if arm is not None:
        return arm
    t = max(state.t, 1)
    scores = {
        a: state.q[a] + c * math.sqrt(math.log(t) / state.n[a])
        for a in state.active
    }
    return _argmax_lowest_id(scores)


@dataclass
class GaussianPosteriors:
    """Per-arm Normal(mu, sigma^2) posteriors.

    mu is the running mean of observed rewards (the prior mean until the
    first pull); the variance shrinks as sigma0^2 / (n + 1).
    """

    n_arms: int
    mu0: float = 0.0
    sigma0_sq: float = 1.0

    def __post_init__(self):
        self.mu = np.full(self.n_arms, float(self.mu0))
        self.obs_mean = np.zeros(self.n_arms)
        self.n = np.zeros(self.n_arms, dtype=int)
        self.t = 0

    def sigma_sq(self, arm: int) -> float:
        return self.sigma0_sq / (self.n[arm] + 1)

    def record(self, arm: int, reward: float) -> None:
        self.t += 1
        self.n[arm] += 1
        self.obs_mean[arm] += (reward - self.obs_mean[arm]) / self.n[arm]
        self.mu[arm] = self.obs_mean[arm]


class ThompsonPolicy(Policy):
    def __init__(self, n_arms: int, mu0: float = 0.0, sigma0_sq: float = 1.0, rng=None):
        self.post = GaussianPosteriors(n_arms, mu0, sigma0_sq)
        self.active = set(range(n_arms))
        self.rng = rng if rng is not None else np.random.default_rng()

    def select(self) -> int:
        active = sorted(self.active)
        samples = {}
        for a in active:
            sd = math.sqrt(self.post.sigma_sq(a))
            samples[a] = (
                self.post.mu[a] + sd * self.rng.standard_normal()
                if sd > 0.0
                else self.post.mu[a]
            )
        return _argmax_lowest_id(samples)

    def update(self, arm, reward, p_beta=None):
        self.post.record(arm, reward)


class BayesUcbPolicy(Policy):
    """Posterior-quantile index: mu + c * z(1 - 1/t) * sigma."""

    def __init__(self, n_arms: int, c: float = 1.0, mu0: float = 0.0, sigma0_sq: float = 1.0):
        self.post = GaussianPosteriors(n_arms, mu0, sigma0_sq)
        self.active = set(range(n_arms))
        self.c = c

    def select(self) -> int:
        unplayed = [a for a in sorted(self.active) if self.post.n[a] == 0]
        if unplayed:
            return unplayed[0]
        t = self.post.t
        z = norm.ppf(1.0 - 1.0 / t) if t >= 2 else 0.0
        scores = {
            a: self.post.mu[a] + self.c * z * math.sqrt(self.post.sigma_sq(a))
            for a in self.active
        }
        return _argmax_lowest_id(scores)

    def update(self, arm, reward, p_beta=None):
        self.post.record(arm, reward)


class DiscountedUcbPolicy(Policy):
    """UCB over exponentially discounted counts and reward sums."""

    def __init__(self, n_arms: int, c: float = 0.35, discount: float = 0.99):
        if not 0.0 < discount <= 1.0:
            raise ValueError("discount must lie in (0, 1]")
        self.n_arms = n_arms
        self.c = c
        self.discount = discount
        self.disc_n = np.zeros(n_arms)
        self.disc_sum = np.zeros(n_arms)
        self.plays = np.zeros(n_arms, dtype=int)
        self.active = set(range(n_arms))

    def select(self) -> int:
        unplayed = [a for a in sorted(self.active) if self.plays[a] == 0]
        if unplayed:
            return unplayed[0]
        total = float(np.sum(self.disc_n))
        scores = {}
        for a in self.active:
            mean = self.disc_sum[a] / self.disc_n[a]
            bonus = self.c * math.sqrt(math.log(total) / self.disc_n[a])
            scores[a] = mean + bonus
        return _argmax_lowest_id(scores)

    def update(self, arm, reward, p_beta=None):
        self.disc_n *= self.discount
        self.disc_sum *= self.discount
        self.disc_n[arm] += 1.0
        self.disc_sum[arm] += reward
        self.plays[arm] += 1

    def discounted_mean(self, arm: int) -> float:
        return self.disc_sum[arm] / self.disc_n[arm]


@dataclass
class T3PConfig:
    """Tuning constants for the pruned, re-triggered controller."""

    eps_start: float = 0.2
    eps_min: float = 0.0
    decay_step: float = 0.025  # per post-warm-up round
    top_k: int = 25
    deviation_threshold: float = 0.20  # relative biomarker increase
    deviation_patience: int = 3  # consecutive deviant rounds
    timer_period: int = 600  # rounds between scheduled restarts
    retain_estimates_on_restart: bool = False

    def validate(self, n_arms: int) -> None:
        if not 0.0 <= self.eps_min <= self.eps_start <= 1.0:
            raise ValueError("need 0 <= eps_min <= eps_start <= 1")
        if not 1 <= self.top_k <= n_arms:
            raise ValueError("top_k must lie in [1, n_arms]")


WARMUP = "warmup"
RUN = "run"


class T3PPolicy(Policy):
    """Warm-up over all arms, prune to the top K, then decayed epsilon-greedy.

    Restarts the whole procedure when a countdown timer elapses or when the
    biomarker deviates upward from its running baseline for several
    consecutive rounds.
    """

    def __init__(self, n_arms: int, cfg: T3PConfig | None = None, rng=None):
        self.cfg = cfg or T3PConfig()
        self.cfg.validate(n_arms)
        self.n_arms = n_arms
        self.rng = rng if rng is not None else np.random.default_rng()
        self._restart(fresh=True)

    def _restart(self, fresh: bool) -> None:
        if fresh or not self.cfg.retain_estimates_on_restart:
            self.state = BanditState(self.n_arms)
        else:
            self.state.active = set(range(self.n_arms))
        self.phase = WARMUP
        self.eps = self.cfg.eps_start
        self._warmup_next = 0
        self._rounds_since_restart = 0
        self._pbeta_baseline: list[float] = []
        self._deviation_streak = 0

    @property
    def active(self) -> set[int]:
        return self.state.active

    def select(self) -> int:
        if self.phase == WARMUP:
            return self._warmup_next
        return eps_greedy_select(self.state, self.eps, self.rng)

    def greedy_arm(self) -> int:
        return _argmax_lowest_id(
            {a: self.state.q[a] for a in sorted(self.state.active)}
        )

    def update(self, arm, reward, p_beta=None):
        self.state.record(arm, reward)
        self._rounds_since_restart += 1
        if self.phase == WARMUP:
            self._warmup_next += 1
            if self._warmup_next == self.n_arms:
                self._prune()
                self.phase = RUN
            return
        self.eps = max(self.cfg.eps_min, self.eps - self.cfg.decay_step)
        if self._check_triggers(p_beta):
            self._restart(fresh=False)

    def _prune(self) -> None:
        order = sorted(range(self.n_arms), key=lambda a: (-self.state.q[a], a))
        self.state.active = set(order[: self.cfg.top_k])

    def _check_triggers(self, p_beta) -> bool:
        if self._rounds_since_restart >= self.cfg.timer_period:
            return True
        if p_beta is None:
            return False
        if len(self._pbeta_baseline) >= 3:
            ref = float(np.mean(self._pbeta_baseline))
            if p_beta > ref * (1.0 + self.cfg.deviation_threshold):
                self._deviation_streak += 1
                if self._deviation_streak >= self.cfg.deviation_patience:
                    return True
                return False
        self._deviation_streak = 0
        self._pbeta_baseline.append(float(p_beta))
        return False

    def intervene_prune(self, arm: int) -> None:
        """Permanently drop an arm (until the next full restart)."""
        if arm not in self.state.active:
            return
        if len(self.state.active) == 1:
            raise LastArm("cannot prune the last active arm")
        self.state.active.discard(arm)


def make_policy(name: str, n_arms: int, rng=None, **params) -> Policy:
    """Factory used by the benchmark harness and CLI."""
    name = name.lower().replace("-", "_")
    if name == "t3p":
        cfg = T3PConfig(**params)
        return T3PPolicy(n_arms, cfg, rng=rng)
    if name == "eps_greedy":
        return EpsGreedyPolicy(n_arms, rng=rng, **params)
    if name == "ucb":
        return UcbPolicy(n_arms, **params)
    if name == "bayes_ucb":
        return BayesUcbPolicy(n_arms, **params)
    if name == "discounted_ucb":
        return DiscountedUcbPolicy(n_arms, **params)
    if name == "thompson":
        return ThompsonPolicy(n_arms, rng=rng, **params)
    if name == "random":
        return RandomPolicy(n_arms, rng=rng)
    raise ValueError(f"unknown policy {name!r}")
