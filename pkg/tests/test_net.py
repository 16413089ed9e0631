import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hevrl.net import (
    AdamState,
    LayerSpec,
    Mlp,
    adam_step,
    backward,
    forward,
    glorot_limit,
    init_network,
    n_params,
    unflatten,
)
from tests.conftest import finite_diff_grads

ACTOR_SPECS = (LayerSpec(3, 64, "relu"), LayerSpec(64, 32, "relu"), LayerSpec(32, 1, "tanh"))


class TestInit:
    def test_parameter_count(self, rng):
        # Oracle: 64*3+64 + 32*64+32 + 1*32+1 = 2369.
        net = init_network(ACTOR_SPECS, rng)
        assert net.n_params == 64 * 3 + 64 + 32 * 64 + 32 + 1 * 32 + 1 == 2369

    def test_same_seed_same_params(self):
        a = init_network(ACTOR_SPECS, np.random.default_rng(5))
        b = init_network(ACTOR_SPECS, np.random.default_rng(5))
        np.testing.assert_array_equal(a.theta, b.theta)

    def test_biases_zero_at_init(self, rng):
        net = init_network(ACTOR_SPECS, rng)
        for b in net.biases:
            assert np.all(b == 0.0)

    def test_glorot_bound(self, rng):
        net = init_network(ACTOR_SPECS, rng)
        for spec, w in zip(net.specs, net.weights):
            assert np.all(np.abs(w) <= glorot_limit(spec))

    def test_dim_mismatch_rejected(self, rng):
        with pytest.raises(ValueError, match="layer 1"):
            init_network((LayerSpec(3, 8), LayerSpec(9, 1)), rng)

    def test_bad_activation_rejected(self):
        with pytest.raises(ValueError, match="activation"):
            LayerSpec(3, 4, "sigmoid")


class TestForward:
    def test_zero_net_outputs_zero(self):
        net = Mlp((LayerSpec(3, 4, "relu"), LayerSpec(4, 1, "linear")), np.zeros(n_params((LayerSpec(3, 4, "relu"), LayerSpec(4, 1, "linear")))))
        assert forward(net, np.array([1.0, -2.0, 3.0]))[0] == 0.0

    def test_identity_layer(self):
        spec = (LayerSpec(3, 3, "linear"),)
        theta = np.concatenate([np.eye(3).ravel(), np.zeros(3)])
        net = Mlp(spec, theta)
        x = np.array([0.5, -1.5, 2.0])
        np.testing.assert_array_equal(forward(net, x), x)

    def test_two_layer_hand_computation(self):
        # Oracle: explicit matrix arithmetic on a 2x2 example.
        specs = (LayerSpec(2, 2, "relu"), LayerSpec(2, 1, "linear"))
        w1 = np.array([[1.0, -1.0], [0.5, 2.0]])
        b1 = np.array([0.1, -0.2])
        w2 = np.array([[3.0, -4.0]])
        b2 = np.array([0.25])
        net = Mlp(specs, np.concatenate([w1.ravel(), b1, w2.ravel(), b2]))
        x = np.array([2.0, 1.0])
        h = np.maximum(w1 @ x + b1, 0.0)
        expected = (w2 @ h + b2)[0]
        assert forward(net, x)[0] == pytest.approx(expected, rel=1e-15)

    def test_batch_matches_single(self, rng):
        net = init_network(ACTOR_SPECS, rng)
        xs = rng.normal(size=(5, 3))
        batch = forward(net, xs)
        singles = np.array([forward(net, x) for x in xs])
        np.testing.assert_allclose(batch, singles, rtol=1e-15)

    def test_wrong_width_rejected(self, rng):
        net = init_network(ACTOR_SPECS, rng)
        with pytest.raises(ValueError, match="width"):
            forward(net, np.zeros(4))


class TestBackward:
    def test_zero_upstream_gives_zero_grads(self, rng):
        net = init_network(ACTOR_SPECS, rng)
        g, gx = backward(net, rng.normal(size=3), np.zeros(1))
        assert np.all(g == 0.0) and np.all(gx == 0.0)

    def test_linear_layer_outer_product(self, rng):
        specs = (LayerSpec(3, 2, "linear"),)
        net = init_network(specs, rng)
        x = np.array([1.0, 2.0, -3.0])
        go = np.array([0.5, -1.5])
        g, gx = backward(net, x, go)
        m = Mlp(specs, g)
        np.testing.assert_allclose(m.weights[0], np.outer(go, x), rtol=1e-15)
        np.testing.assert_allclose(m.biases[0], go, rtol=1e-15)
        np.testing.assert_allclose(gx, net.weights[0].T @ go, rtol=1e-15)

    @pytest.mark.parametrize("seed", range(6))
    def test_matches_central_finite_differences(self, seed):
        rng = np.random.default_rng(seed)
        specs = (LayerSpec(3, 7, "relu"), LayerSpec(7, 4, "tanh"), LayerSpec(4, 2, "linear"))
        net = init_network(specs, rng)
        x = rng.normal(size=3)
        go = rng.normal(size=2)
        g, _ = backward(net, x, go)
        fd = finite_diff_grads(net, x, go, eps=1e-5)
        denom = np.maximum(np.abs(fd), 1e-8)
        assert np.max(np.abs(g - fd) / denom) < 1e-4

    def test_batch_grad_is_sum_of_singles(self, rng):
        net = init_network(ACTOR_SPECS, rng)
        xs = rng.normal(size=(4, 3))
        gos = rng.normal(size=(4, 1))
        g_batch, gx_batch = backward(net, xs, gos)
        g_sum = np.zeros_like(g_batch)
        for x, go in zip(xs, gos):
            g, _ = backward(net, x, go)
            g_sum += g
        np.testing.assert_allclose(g_batch, g_sum, rtol=1e-12)
        assert gx_batch.shape == xs.shape


class TestAdam:
    def test_zero_grad_keeps_params(self, rng):
        net = init_network(ACTOR_SPECS, rng)
        before = net.flatten()
        adam_step(net, np.zeros_like(net.theta), AdamState.for_net(net), lr=0.01)
        np.testing.assert_array_equal(net.theta, before)

    def test_first_step_is_lr_sized(self):
        specs = (LayerSpec(1, 1, "linear"),)
        net = Mlp(specs, np.array([1.0, 0.0]))
        state = AdamState.for_net(net)
        adam_step(net, np.array([1.0, 0.0]), state, lr=0.001)
        # Oracle: bias-corrected first step is lr * 1 / (1 + eps).
        assert net.theta[0] == pytest.approx(1.0 - 0.001, rel=1e-7)
        assert net.theta[1] == 0.0

    def test_deterministic_trajectories(self):
        def run():
            rng = np.random.default_rng(11)
            net = init_network(ACTOR_SPECS, rng)
            state = AdamState.for_net(net)
            for _ in range(10):
                g = rng.normal(size=net.theta.size)
                adam_step(net, g, state, lr=0.003)
            return net.flatten()

        np.testing.assert_array_equal(run(), run())


class TestFlatten:
    @given(st.integers(min_value=0, max_value=10_000))
    @settings(max_examples=25, deadline=None)
    def test_roundtrip_identity(self, seed):
        rng = np.random.default_rng(seed)
        vec = rng.normal(size=n_params(ACTOR_SPECS))
        net = unflatten(ACTOR_SPECS, vec)
        np.testing.assert_array_equal(net.flatten(), vec)

    def test_flatten_is_stable(self, rng):
        net = init_network(ACTOR_SPECS, rng)
        np.testing.assert_array_equal(net.flatten(), net.flatten())

    def test_total_length_matches_formula(self, rng):
        net = init_network(ACTOR_SPECS, rng)
        assert net.flatten().size == sum(s.out_dim * (s.in_dim + 1) for s in ACTOR_SPECS)

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError, match="length"):
            unflatten(ACTOR_SPECS, np.zeros(10))

    def test_layer_order_is_row_major_weights_then_bias(self):
        specs = (LayerSpec(2, 2, "linear"),)
        net = unflatten(specs, np.array([1.0, 2.0, 3.0, 4.0, 5.0, 6.0]))
        np.testing.assert_array_equal(net.weights[0], [[1.0, 2.0], [3.0, 4.0]])
        np.testing.assert_array_equal(net.biases[0], [5.0, 6.0])

    def test_flatten_returns_copy(self, rng):
        net = init_network(ACTOR_SPECS, rng)
        flat = net.flatten()
        flat[0] += 1.0
        assert net.theta[0] != flat[0]
