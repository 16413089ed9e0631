import numpy as np
import pytest

from hevrl.ddpg import actor_specs
from hevrl.explore import (
    NoiseSpec,
    NoiseSpecError,
    NoiseState,
    episode_reset,
    explore_action,
    perturb_actor,
    sample_action_noise,
)
from hevrl.net import forward, init_network


@pytest.fixture
def actor(rng):
    return init_network(actor_specs(), rng)


def make_state():
    return NoiseState()


class TestNoiseSpec:
    @pytest.mark.parametrize(
        "text,kind,label",
        [
            ("TFS", "none", "TFS"),
            ("none", "none", "TFS"),
            ("Gaussian_AS(0.06)", "gaussian_action", "Gaussian_AS(0.06)"),
            ("OU_AS(0.09)", "ou_action", "OU_AS(0.09)"),
            ("Gaussian_PS(0.03)", "gaussian_param", "Gaussian_PS(0.03)"),
            ("APS(0.09,0.03)", "mixture", "APS(0.09,0.03)"),
            ("Gaussian_APS(0.06,0.03)", "mixture", "Gaussian_APS(0.06,0.03)"),
        ],
    )
    def test_parse_label_roundtrip(self, text, kind, label):
        spec = NoiseSpec.parse(text)
        assert spec.kind == kind
        assert spec.label() == label
        assert NoiseSpec.parse(spec.label()) == spec

    def test_reference_grid_representable(self):
        # The comparison grid: five Gaussian action variances, five OU
        # variances, two parameter variances, and the two mixtures.
        for v in (0.02, 0.03, 0.04, 0.05, 0.06):
            assert NoiseSpec.parse(f"Gaussian_AS({v})").sigma2_action == v
        for v in (0.08, 0.09, 0.10, 0.11, 0.13):
            assert NoiseSpec.parse(f"OU_AS({v})").sigma2_action == v
        for v in (0.03, 0.04):
            assert NoiseSpec.parse(f"Gaussian_PS({v})").sigma2_param == v
        aps = NoiseSpec.parse("APS(0.09,0.03)")
        assert (aps.sigma2_action, aps.sigma2_param, aps.mixture_action) == (0.09, 0.03, "ou")
        gaps = NoiseSpec.parse("Gaussian_APS(0.06,0.03)")
        assert (gaps.sigma2_action, gaps.sigma2_param, gaps.mixture_action) == (0.06, 0.03, "gaussian")

    def test_negative_variance_rejected(self):
        with pytest.raises(NoiseSpecError):
            NoiseSpec(kind="gaussian_action", sigma2_action=-0.1)

    def test_unknown_kind_rejected(self):
        with pytest.raises(NoiseSpecError):
            NoiseSpec.parse("Bogus(1.0)")


class TestActionNoise:
    def test_zero_variance_gaussian_is_silent(self, rng):
        spec = NoiseSpec(kind="gaussian_action", sigma2_action=0.0)
        state = make_state()
        assert all(sample_action_noise(spec, state, rng) == 0.0 for _ in range(50))

    def test_ou_deterministic_mean_reversion(self, rng):
        # Oracle: with sigma = 0 and x0 = 1, one step gives x = 1 - 0.15 = 0.85.
        spec = NoiseSpec(kind="ou_action", sigma2_action=0.0, ou_theta=0.15)
        state = make_state()
        state.ou_x = 1.0
        assert sample_action_noise(spec, state, rng) == pytest.approx(0.85)
        assert sample_action_noise(spec, state, rng) == pytest.approx(0.85**2)

    def test_gaussian_empirical_variance(self):
        rng = np.random.default_rng(42)
        spec = NoiseSpec(kind="gaussian_action", sigma2_action=0.06)
        state = make_state()
        draws = np.array([sample_action_noise(spec, state, rng) for _ in range(100_000)])
        assert np.var(draws) == pytest.approx(0.06, rel=0.05)

    def test_ou_lag_autocorrelation(self):
        rng = np.random.default_rng(7)
        spec = NoiseSpec(kind="ou_action", sigma2_action=0.09, ou_theta=0.15)
        state = make_state()
        xs = np.array([sample_action_noise(spec, state, rng) for _ in range(200_000)])
        xs = xs - xs.mean()
        var = float(np.dot(xs, xs) / xs.size)
        for k in range(1, 6):
            rho = float(np.dot(xs[:-k], xs[k:]) / ((xs.size - k) * var))
            assert abs(rho - (1 - 0.15) ** k) < 0.05

    def test_pure_param_kind_has_no_action_noise(self, rng):
        spec = NoiseSpec(kind="gaussian_param", sigma2_param=0.03)
        with pytest.raises(NoiseSpecError):
            sample_action_noise(spec, make_state(), rng)


class TestPerturbActor:
    def test_zero_variance_identical_outputs(self, actor, rng):
        spec = NoiseSpec(kind="gaussian_param", sigma2_param=0.0)
        noisy = perturb_actor(actor, spec, rng)
        for _ in range(10):
            x = rng.normal(size=3)
            assert forward(noisy, x)[0] == forward(actor, x)[0]

    def test_original_untouched(self, actor, rng):
        before = actor.flatten()
        perturb_actor(actor, NoiseSpec(kind="gaussian_param", sigma2_param=0.03), rng)
        np.testing.assert_array_equal(actor.theta, before)

    def test_difference_vector_variance(self, actor):
        rng = np.random.default_rng(3)
        spec = NoiseSpec(kind="gaussian_param", sigma2_param=0.03)
        diffs = np.concatenate(
            [perturb_actor(actor, spec, rng).theta - actor.theta for _ in range(4)]
        )
        assert np.var(diffs) == pytest.approx(0.03, rel=0.10)


class TestExploreAction:
    def test_none_matches_clean_policy(self, actor, rng):
        spec = NoiseSpec(kind="none")
        state = make_state()
        episode_reset(spec, state, actor, rng)
        for _ in range(5):
            x = rng.normal(size=3)
            assert explore_action(spec, state, actor, x, rng) == forward(actor, x)[0]

    @pytest.mark.parametrize(
        "spec",
        [
            NoiseSpec(kind="gaussian_action", sigma2_action=0.0),
            NoiseSpec(kind="ou_action", sigma2_action=0.0),
            NoiseSpec(kind="gaussian_param", sigma2_param=0.0),
            NoiseSpec(kind="mixture", sigma2_action=0.0, sigma2_param=0.0),
        ],
    )
    def test_all_zero_variances_match_clean_policy(self, actor, rng, spec):
        state = make_state()
        episode_reset(spec, state, actor, rng)
        for _ in range(5):
            x = rng.normal(size=3)
            assert explore_action(spec, state, actor, x, rng) == forward(actor, x)[0]

    def test_actions_always_clipped(self, actor):
        rng = np.random.default_rng(0)
        spec = NoiseSpec(kind="gaussian_action", sigma2_action=4.0)
        state = make_state()
        episode_reset(spec, state, actor, rng)
        for _ in range(500):
            u = explore_action(spec, state, actor, np.zeros(3), rng)
            assert -1.0 <= u <= 1.0

    def test_param_noise_is_state_consistent_within_episode(self, actor, rng):
        spec = NoiseSpec(kind="gaussian_param", sigma2_param=0.03)
        state = make_state()
        episode_reset(spec, state, actor, rng)
        x = np.array([0.2, 0.1, -0.3])
        first = explore_action(spec, state, actor, x, rng)
        assert all(explore_action(spec, state, actor, x, rng) == first for _ in range(10))
        # A new episode redraws the perturbation.
        episode_reset(spec, state, actor, rng)
        assert explore_action(spec, state, actor, x, rng) != first

    def test_action_noise_is_inconsistent_at_same_state(self, actor, rng):
        spec = NoiseSpec(kind="gaussian_action", sigma2_action=0.06)
        state = make_state()
        episode_reset(spec, state, actor, rng)
        x = np.array([0.2, 0.1, -0.3])
        a = explore_action(spec, state, actor, x, rng)
        b = explore_action(spec, state, actor, x, rng)
        assert a != b

    def test_exploration_never_mutates_online_actor(self, actor, rng):
        before = actor.flatten()
        for text in ("Gaussian_AS(0.06)", "OU_AS(0.09)", "Gaussian_PS(0.03)", "APS(0.09,0.03)"):
            spec = NoiseSpec.parse(text)
            state = make_state()
            for _ in range(3):
                episode_reset(spec, state, actor, rng)
                explore_action(spec, state, actor, rng.normal(size=3), rng)
        np.testing.assert_array_equal(actor.theta, before)

    def test_mixture_uses_perturbed_net_plus_action_noise(self, actor, rng):
        spec = NoiseSpec(kind="mixture", sigma2_action=0.09, sigma2_param=0.03)
        state = make_state()
        episode_reset(spec, state, actor, rng)
        assert state.perturbed is not None
        x = np.zeros(3)
        # With the action-noise component silenced, the action comes from the
        # perturbed network, not the online actor.
        quiet = NoiseSpec(kind="mixture", sigma2_action=0.0, sigma2_param=0.03)
        u = explore_action(quiet, state, actor, x, rng)
        assert u == forward(state.perturbed, x)[0]
        assert u != forward(actor, x)[0]
        # With it active, repeated draws at one state differ (unless clipped).
        draws = {explore_action(spec, state, actor, x, rng) for _ in range(5)}
        assert len(draws) >= 2


class TestDecay:
    def test_decay_scales_variance_per_episode(self, actor, rng):
        spec = NoiseSpec(kind="gaussian_action", sigma2_action=0.06, decay=0.5)
        state = make_state()
        episode_reset(spec, state, actor, rng)
        assert state.scale == 1.0
        episode_reset(spec, state, actor, rng)
        assert state.scale == 0.5
        episode_reset(spec, state, actor, rng)
        assert state.scale == 0.25

    def test_default_decay_is_off(self, actor, rng):
        spec = NoiseSpec(kind="gaussian_action", sigma2_action=0.06)
        state = make_state()
        for _ in range(5):
            episode_reset(spec, state, actor, rng)
        assert state.scale == 1.0
