import numpy as np
import pytest

from hevrl.cycles import cycle_from_speeds, synth_trapezoid
from hevrl.env import (
    CycleEnv,
    EpisodeDoneError,
    RewardParams,
    State,
    TRACE_HEADER,
    normalize_state,
    reward_value,
    rollout,
)


@pytest.fixture
def trapezoid_env(driveline):
    return CycleEnv(synth_trapezoid(10, 5, 10, 5, 1.0), driveline)


class TestRewardValue:
    def test_zero_consumption_at_reference_soc(self):
        assert reward_value(RewardParams(), 0.0, 0.0, 0.6) == 0.0

    def test_consumption_and_soc_penalty(self):
        # Oracle: -(2.0 + 350 * 0.05^2) = -2.875.
        assert reward_value(RewardParams(), 1.5, 0.5, 0.55) == pytest.approx(-2.875)

    def test_soc_deviation_symmetric_for_even_exponent(self):
        rp = RewardParams()
        assert reward_value(rp, 0.0, 0.0, 0.55) == pytest.approx(
            reward_value(rp, 0.0, 0.0, 0.65)
        )

    def test_defaults_match_reference_weights(self):
        rp = RewardParams()
        assert (rp.alpha, rp.beta, rp.n, rp.soc_ref) == (1.0, 350.0, 2, 0.6)


class TestNormalize:
    def test_reference_point(self):
        np.testing.assert_allclose(
            normalize_state(State(0.6, 20.0, 1.5)), [0.2, 0.5, 0.5]
        )

    def test_bounds_for_typical_ranges(self):
        lo = normalize_state(State(0.0, 0.0, -3.0))
        hi = normalize_state(State(1.0, 40.0, 3.0))
        np.testing.assert_allclose(lo, [-1.0, 0.0, -1.0])
        np.testing.assert_allclose(hi, [1.0, 1.0, 1.0])


class TestReset:
    def test_starts_at_reference_soc(self, trapezoid_env):
        s = trapezoid_env.reset()
        assert s.soc == 0.6

    def test_first_sample_speed(self, trapezoid_env):
        s = trapezoid_env.reset()
        assert s.v == 0.0 and s.acc == 2.0

    def test_reset_is_deterministic(self, trapezoid_env):
        assert trapezoid_env.reset() == trapezoid_env.reset()

    def test_round_robin_indexing(self, driveline):
        c1 = synth_trapezoid(5, 2, 2, 2, 1.0)
        c2 = synth_trapezoid(8, 2, 2, 2, 1.0)
        env = CycleEnv([c1, c2], driveline)
        env.reset(0)
        assert env.current_cycle.name == c1.name
        env.reset(1)
        assert env.current_cycle.name == c2.name
        env.reset(2)
        assert env.current_cycle.name == c1.name


class TestStep:
    def test_action_mapping(self, trapezoid_env):
        env = trapezoid_env
        assert env.action_to_engine_power(-1.0) == 0.0
        assert env.action_to_engine_power(1.0) == 56e3
        assert env.action_to_engine_power(0.0) == 28e3
        assert env.action_to_engine_power(7.0) == 56e3  # clipped at the boundary

    def test_step_after_done_raises(self, driveline):
        env = CycleEnv(cycle_from_speeds("two", [0.0, 1.0], 1.0), driveline)
        env.reset()
        _, _, done = env.step(0.0)
        assert done
        with pytest.raises(EpisodeDoneError):
            env.step(0.0)

    def test_reward_decomposition_exact(self, trapezoid_env):
        rp = trapezoid_env.reward
        state = trapezoid_env.reset()
        done = False
        while not done:
            state, r, done = trapezoid_env.step(-0.4)
            res = trapezoid_env.last_result
            assert r + rp.alpha * (res.fuel_g + res.elec_g) + rp.beta * (
                rp.soc_ref - res.soc
            ) ** rp.n == pytest.approx(0.0, abs=1e-15)

    def test_reward_nonpositive_with_floored_elec(self, trapezoid_env):
        state = trapezoid_env.reset()
        done = False
        while not done:
            state, r, done = trapezoid_env.step(0.3)
            assert r <= 0.0


class TestRollout:
    def test_log_length_is_cycle_minus_one(self, trapezoid_env):
        log = rollout(lambda s: 0.0, trapezoid_env)
        assert len(log) == 20

    def test_two_sample_cycle_single_step(self, driveline):
        env = CycleEnv(cycle_from_speeds("two", [0.0, 1.0], 1.0), driveline)
        log = rollout(lambda s: 0.0, env)
        assert len(log) == 1

    def test_engine_off_burns_no_fuel(self, trapezoid_env):
        log = rollout(lambda s: -1.0, trapezoid_env)
        assert all(r.fuel_g == 0.0 for r in log.records)
        socs = [r.soc for r in log.records]
        # SoC strictly decreases while traction power is drawn (braking regens).
        traction = [k for k, r in enumerate(log.records) if r.v > 0 and r.acc >= 0]
        for k in traction[1:]:
            assert socs[k] < socs[k - 1]

    def test_rollout_is_deterministic(self, trapezoid_env):
        a = rollout(lambda s: 0.123, trapezoid_env)
        b = rollout(lambda s: 0.123, trapezoid_env)
        assert a.records == b.records
        assert a.episode_return == b.episode_return

    def test_trace_csv_schema(self, trapezoid_env, tmp_path):
        log = rollout(lambda s: 0.0, trapezoid_env)
        path = tmp_path / "trace.csv"
        log.write_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == ",".join(TRACE_HEADER)
        assert len(lines) == 21
        first = lines[1].split(",")
        assert first[0] == "0"
        assert float(first[1]) == pytest.approx(log.records[0].soc)
