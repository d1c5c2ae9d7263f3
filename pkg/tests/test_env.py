"""Reward function, surrogate environment, and calibration."""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dbsbench.env import (
    MAX_GRID_RMS,
    BgtEnv,
    InsufficientData,
    RewardBreakdown,
    RewardConfig,
    RoundResult,
    SurrogateEnv,
    SurrogateSpec,
    UnknownArm,
    calibrate_surrogate,
    compute_reward,
    default_surrogate_spec,
)
from dbsbench.signal import BetaPower
from dbsbench.stim import StimParams, build_arm_space, generate_pulse_train


class TestComputeReward:
    def test_unstimulated_round_scores_plus_point_one(self):
        # beta fully suppressed, no current: r1=0, r2=1, r3=0
        rb = compute_reward(0.0, np.zeros(1000), 0.01, RewardConfig())
        assert rb.total == pytest.approx(0.1)

    def test_worst_case_scores_minus_point_nine(self):
        # saturated beta under continuous max-grid current: r1=1, r2=0, r3=1
        i = np.full(1000, MAX_GRID_RMS)
        rb = compute_reward(10.0, i, 0.01, RewardConfig())
        assert rb.r1 == 1.0 and rb.r2 == 0.0 and rb.r3 == 1.0
        assert rb.total == pytest.approx(-0.9)

    def test_hand_computed_mixed_case(self):
        # half-reference beta with no stimulation: -0.7*0.5 + 0.1*1 = -0.25
        rb = compute_reward(0.5, np.zeros(100), 0.01, RewardConfig())
        assert rb.r1 == pytest.approx(0.5)
        assert rb.total == pytest.approx(-0.25)

    def test_r2_counts_zero_samples_of_real_train(self):
        train = generate_pulse_train(StimParams(155.0, 1000.0), 1000.0)
        rb = compute_reward(0.0, train.samples, 0.01, RewardConfig())
        # 155 pulses x 30 active samples out of 100000
        assert rb.r2 == pytest.approx(1.0 - 155 * 30 / 100_000)

    def test_r1_clamped_to_unit_interval(self):
        rb = compute_reward(50.0, np.zeros(10), 0.01, RewardConfig())
        assert rb.r1 == 1.0

    def test_accepts_beta_power_object(self):
        bp = BetaPower(value=0.25, method="bulk")
        rb = compute_reward(bp, np.zeros(10), 0.01, RewardConfig())
        assert rb.r1 == pytest.approx(0.25)

    def test_rejects_nonpositive_references(self):
        with pytest.raises(ValueError):
            compute_reward(0.5, np.zeros(10), 0.01, RewardConfig(p_beta_norm_ref=0.0))
        with pytest.raises(ValueError):
            compute_reward(0.5, np.zeros(10), 0.01, RewardConfig(i_rms_norm_ref=-1.0))

    @settings(max_examples=50, deadline=None)
    @given(
        pb=st.floats(min_value=0, max_value=100, allow_nan=False),
        amp=st.floats(min_value=0, max_value=5000, allow_nan=False),
    )
    def test_total_always_within_bounds(self, pb, amp):
        i = np.zeros(200)
        i[:30] = amp
        rb = compute_reward(pb, i, 0.01, RewardConfig())
        assert -0.9 <= rb.total <= 0.1


def make_spec(best=21, best_mean=0.05):
    space = build_arm_space()
    means = -0.01 * np.arange(len(space), dtype=float) - 0.1
    means[best] = best_mean
    return SurrogateSpec(
        arms=space,
        reward_mean=means,
        reward_std=np.zeros(len(space)),
        pbeta_mean=np.full(len(space), 0.2),
        pbeta_std=np.zeros(len(space)),
        provenance=("unit-test fixture",),
    )


class TestSurrogateSpec:
    def test_optimal_arm(self):
        assert make_spec(best=7).optimal_arm == 7

    def test_unique_best_required(self):
        space = build_arm_space()
        with pytest.raises(ValueError):
            SurrogateSpec(
                arms=space,
                reward_mean=np.zeros(31),
                reward_std=np.zeros(31),
                pbeta_mean=np.zeros(31),
                pbeta_std=np.zeros(31),
            )

    def test_shape_validated(self):
        space = build_arm_space()
        with pytest.raises(ValueError):
            SurrogateSpec(
                arms=space,
                reward_mean=np.zeros(30),
                reward_std=np.zeros(31),
                pbeta_mean=np.zeros(31),
                pbeta_std=np.zeros(31),
            )

    def test_csv_round_trip_is_exact(self, tmp_path):
        spec = make_spec()
        spec.reward_mean[3] = 1 / 3  # not exactly representable in decimal
        path = tmp_path / "spec.csv"
        spec.save(path)
        loaded = SurrogateSpec.load(path)
        np.testing.assert_array_equal(loaded.reward_mean, spec.reward_mean)
        np.testing.assert_array_equal(loaded.reward_std, spec.reward_std)
        np.testing.assert_array_equal(loaded.pbeta_mean, spec.pbeta_mean)
        np.testing.assert_array_equal(loaded.pbeta_std, spec.pbeta_std)
        assert loaded.provenance == spec.provenance

    def test_load_rejects_wrong_arm_count(self, tmp_path):
        spec = make_spec()
        path = tmp_path / "spec.csv"
        spec.save(path)
        lines = path.read_text().splitlines()
        path.write_text("\n".join(lines[:-1]) + "\n")
        with pytest.raises(ValueError):
            SurrogateSpec.load(path)

    def test_packaged_default(self):
        spec = default_surrogate_spec()
        assert len(spec.arms) == 31
        assert spec.arms[spec.optimal_arm] == StimParams(155.0, 1000.0)
        # the untreated arm must be clearly worse than the optimum
        assert spec.reward_mean[0] < spec.reward_mean[spec.optimal_arm] - 0.3
        assert spec.pbeta_mean[0] > spec.pbeta_mean[spec.optimal_arm]


class TestSurrogateEnv:
    def test_zero_variance_returns_means(self):
        env = SurrogateEnv(make_spec(), seed=0)
        for arm in (0, 16, 21, 30):
            res = env.play(arm)
            assert res.reward.total == env.spec.reward_mean[arm]
            assert res.p_beta.value == env.spec.pbeta_mean[arm]

    def test_seed_determinism(self):
        spec = make_spec()
        spec.reward_std[:] = 0.3
        a = SurrogateEnv(spec, seed=5)
        b = SurrogateEnv(spec, seed=5)
        for arm in (1, 2, 21, 21):
            assert a.play(arm).reward.total == b.play(arm).reward.total

    def test_biomarker_never_negative(self):
        spec = make_spec()
        spec.pbeta_mean[:] = 0.0
        spec.pbeta_std[:] = 1.0
        env = SurrogateEnv(spec, seed=0)
        assert all(env.play(0).p_beta.value >= 0.0 for _ in range(50))

    def test_unknown_arm(self):
        env = SurrogateEnv(make_spec(), seed=0)
        with pytest.raises(UnknownArm):
            env.play(31)

    def test_components_not_modeled(self):
        res = SurrogateEnv(make_spec(), seed=0).play(0)
        assert math.isnan(res.reward.r1)


def synthetic_result(arm, reward, pbeta=0.2):
    return RoundResult(
        arm=arm,
        reward=RewardBreakdown(r1=0.0, r2=0.0, r3=0.0, total=reward),
        p_beta=BetaPower(value=pbeta, method="surrogate"),
    )


class TestCalibrateSurrogate:
    def test_matches_sample_statistics(self):
        rng = np.random.default_rng(0)
        results = []
        expected_mean = np.empty(31)
        expected_std = np.empty(31)
        for arm in range(31):
            draws = rng.normal(arm * 0.01, 0.1, size=5)
            expected_mean[arm] = draws.mean()
            expected_std[arm] = draws.std(ddof=1)
            results += [synthetic_result(arm, d) for d in draws]
        # make the best arm unique regardless of draws
        results.append(synthetic_result(30, 10.0))
        spec = calibrate_surrogate(results, provenance=("test",))
        for arm in range(30):
            assert spec.reward_mean[arm] == pytest.approx(expected_mean[arm])
            assert spec.reward_std[arm] == pytest.approx(expected_std[arm])
        assert spec.provenance == ("test",)

    def test_pbeta_statistics(self):
        results = []
        for arm in range(31):
            for v in (0.1, 0.2, 0.6):
                results.append(synthetic_result(arm, float(arm == 21), pbeta=v))
        spec = calibrate_surrogate(results)
        assert spec.pbeta_mean[4] == pytest.approx(0.3)
        assert spec.pbeta_std[4] == pytest.approx(np.std([0.1, 0.2, 0.6], ddof=1))

    def test_requires_three_rounds_per_arm(self):
        results = [
            synthetic_result(a, float(a == 21)) for a in range(31) for _ in range(3)
        ]
        del results[:2]  # arm 0 left with one round
        with pytest.raises(InsufficientData):
            calibrate_surrogate(results)

    def test_rejects_unknown_arm(self):
        with pytest.raises(UnknownArm):
            calibrate_surrogate([synthetic_result(99, 0.0)])


@pytest.fixture(scope="module")
def env():
    return BgtEnv(
        condition="pd",
        n_per_region=2,
        seed=0,
        round_ms=200.0,
        warm_in_ms=200.0,
        baseline_rounds=2,
    )


class TestBgtEnv:
    def test_baseline_sets_reference(self, env):
        env.ensure_ready()
        assert env.reward_cfg.p_beta_norm_ref > 0.0

    def test_off_arm_round(self, env):
        res = env.play(0)
        assert res.reward.r2 == 1.0 and res.reward.r3 == 0.0
        assert -0.9 <= res.reward.total <= 0.1
        assert res.observation is None

    def test_stimulated_round(self, env):
        res = env.play(21)
        assert res.reward.r2 == pytest.approx(1.0 - 0.0003 * 155, rel=1e-3)
        assert res.reward.r3 == pytest.approx(
            1000.0 * math.sqrt(0.0003 * 155) / MAX_GRID_RMS, rel=1e-3
        )

    def test_unknown_arm(self, env):
        with pytest.raises(UnknownArm):
            env.play(-1)
