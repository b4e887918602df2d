import numpy as np
import pytest

import kancal as kc
from kancal.network import (
    KanLayerParams,
    kan_layer_backward,
    kan_layer_forward,
    mlp_layer_backward,
    mlp_layer_forward,
    MlpLayerParams,
    param_count,
    params_view,
)
from kancal.splines import SplineSpec, build_knots, spline_eval

from oracles import grad_check


def random_kan_layer(rng, in_dim=2, out_dim=3, grid_size=3, degree=2,
                     shortcut="silu"):
    spec = SplineSpec(-1, 1, grid_size, degree)
    return KanLayerParams(
        in_dim=in_dim, out_dim=out_dim, spec=spec,
        coeffs=rng.normal(0, 0.5, (out_dim, in_dim, spec.num_basis)),
        shortcut_kind=shortcut,
        w_base=rng.normal(0, 1, (out_dim, in_dim)),
        w_spline=rng.normal(0, 1, (out_dim, in_dim)),
    )


def roughen(model, rng):
    """Replace the small init with O(1) parameters so gradients are busy."""
    for layer in model.layers:
        if isinstance(layer, KanLayerParams):
            layer.coeffs[:] = rng.normal(0, 0.5, layer.coeffs.shape)
            layer.w_base[:] = rng.normal(0, 1, layer.w_base.shape)
            layer.w_spline[:] = rng.normal(0, 1, layer.w_spline.shape)
        else:
            layer.weight[:] = rng.normal(0, 0.7, layer.weight.shape)
            layer.bias[:] = rng.normal(0, 0.3, layer.bias.shape)
    return model


class TestKanLayerForward:
    def test_zero_coeffs_no_shortcut_gives_zero(self):
        rng = np.random.default_rng(0)
        layer = random_kan_layer(rng, shortcut="none")
        layer.coeffs[:] = 0.0
        y, _ = kan_layer_forward(layer, rng.uniform(-1, 1, (4, 2)))
        np.testing.assert_array_equal(y, 0.0)

    def test_constant_coeffs_partition_of_unity(self):
        spec = SplineSpec(-1, 1, 4, 3)
        layer = KanLayerParams(
            in_dim=1, out_dim=1, spec=spec,
            coeffs=np.full((1, 1, spec.num_basis), 1.9),
            shortcut_kind="none",
            w_base=np.zeros((1, 1)), w_spline=np.ones((1, 1)),
        )
        x = np.linspace(-1, 1, 7).reshape(-1, 1)
        y, _ = kan_layer_forward(layer, x)
        np.testing.assert_allclose(y, 1.9, atol=1e-12)

    def test_matches_scalar_recomputation(self):
        rng = np.random.default_rng(5)
        layer = random_kan_layer(rng)
        knots = build_knots(layer.spec)
        x = rng.uniform(-1.3, 1.3, (4, 2))
        y, _ = kan_layer_forward(layer, x)
        for b in range(4):
            for i in range(3):
                want = 0.0
                for j in range(2):
                    raw = x[b, j]
                    clamped = min(max(raw, -1.0), 1.0)
                    sval = spline_eval(layer.coeffs[i, j], knots,
                                       layer.spec.degree, clamped)
                    silu = raw / (1.0 + np.exp(-raw))
                    want += (layer.w_spline[i, j] * sval
                             + layer.w_base[i, j] * silu)
                assert abs(y[b, i] - want) < 1e-12

    def test_dimension_mismatch_rejected(self):
        layer = random_kan_layer(np.random.default_rng(0))
        with pytest.raises(ValueError):
            kan_layer_forward(layer, np.zeros((4, 5)))


class TestLayerBackward:
    def test_zero_upstream_gives_zero_grads(self):
        rng = np.random.default_rng(1)
        layer = random_kan_layer(rng)
        x = rng.uniform(-1, 1, (4, 2))
        _, cache = kan_layer_forward(layer, x)
        d_x, grads = kan_layer_backward(layer, cache, np.zeros((4, 3)))
        np.testing.assert_array_equal(d_x, 0.0)
        for g in grads.values():
            np.testing.assert_array_equal(g, 0.0)

    @pytest.mark.parametrize("shortcut", ["none", "identity", "silu"])
    def test_parameter_gradients_match_fd(self, shortcut):
        rng = np.random.default_rng(2)
        layer = random_kan_layer(rng, shortcut=shortcut)
        x = rng.uniform(-1.4, 1.4, (5, 2))
        d_y = rng.normal(size=(5, 3))

        def objective():
            y, _ = kan_layer_forward(layer, x)
            return float((y * d_y).sum())

        _, grads = kan_layer_backward(
            layer, kan_layer_forward(layer, x)[1], d_y)
        grad_check(objective,
                   [layer.coeffs, layer.w_base, layer.w_spline],
                   [grads["coeffs"], grads["w_base"], grads["w_spline"]])

    def test_input_gradient_matches_fd_interior(self):
        rng = np.random.default_rng(3)
        layer = random_kan_layer(rng)
        x = rng.uniform(-0.9, 0.9, (5, 2))
        d_y = rng.normal(size=(5, 3))
        d_x, _ = kan_layer_backward(layer, kan_layer_forward(layer, x)[1], d_y)

        def objective():
            y, _ = kan_layer_forward(layer, x)
            return float((y * d_y).sum())

        grad_check(objective, [x], [d_x])

    def test_clamped_inputs_get_shortcut_gradient_only(self):
        rng = np.random.default_rng(4)
        layer = random_kan_layer(rng, shortcut="identity")
        x = np.array([[2.5, -3.0]])        # both outside the grid
        d_y = np.ones((1, 3))
        d_x, _ = kan_layer_backward(layer, kan_layer_forward(layer, x)[1], d_y)
        want = (d_y @ layer.w_base)        # identity shortcut slope is 1
        np.testing.assert_allclose(d_x, want)

    def test_mismatched_cache_rejected(self):
        rng = np.random.default_rng(5)
        layer = random_kan_layer(rng)
        _, cache = kan_layer_forward(layer, rng.uniform(-1, 1, (4, 2)))
        with pytest.raises(ValueError):
            kan_layer_backward(layer, cache, np.zeros((3, 3)))

    @pytest.mark.parametrize("activation", ["relu", "gelu", "none"])
    def test_mlp_gradients_match_fd(self, activation):
        rng = np.random.default_rng(6)
        layer = MlpLayerParams(weight=rng.normal(0, 0.7, (3, 4)),
                               bias=rng.normal(0, 0.3, 3),
                               activation=activation)
        x = rng.normal(0, 1.0, (6, 4)) + 0.05   # keep relu kinks away
        d_y = rng.normal(size=(6, 3))
        _, cache = mlp_layer_forward(layer, x)
        d_x, grads = mlp_layer_backward(layer, cache, d_y)

        def objective():
            y, _ = mlp_layer_forward(layer, x)
            return float((y * d_y).sum())

        grad_check(objective, [layer.weight, layer.bias, x],
                   [grads["weight"], grads["bias"], d_x])


class TestModelForwardBackward:
    def test_identity_mlp_passes_input_through(self):
        layer = MlpLayerParams(weight=np.eye(3), bias=np.zeros(3),
                               activation="none")
        model = kc.Model(kind="mlp", layers=[layer], class_count=3)
        x = np.random.default_rng(0).normal(size=(5, 3))
        logits, _ = kc.forward(model, x)
        np.testing.assert_allclose(logits, x)

    def test_zeroed_kan_gives_uniform_softmax(self):
        spec = SplineSpec(-1, 1, 3, 2)
        model = kc.init_kan_model([2, 4, 3], spec, "none",
                                  np.random.default_rng(0))
        for layer in model.layers:
            layer.coeffs[:] = 0.0
        logits, _ = kc.forward(model, np.random.default_rng(1).uniform(-1, 1, (6, 2)))
        np.testing.assert_array_equal(logits, 0.0)
        np.testing.assert_allclose(kc.softmax(logits), 1.0 / 3.0)

    def test_rows_independent_of_batching(self):
        rng = np.random.default_rng(7)
        spec = SplineSpec(-1, 1, 5, 3)
        model = roughen(kc.init_kan_model([3, 4, 2], spec, "silu", rng), rng)
        x = rng.uniform(-1.2, 1.2, (8, 3))
        full, _ = kc.forward(model, x)
        singly = np.vstack([kc.forward(model, x[i:i + 1])[0] for i in range(8)])
        np.testing.assert_allclose(full, singly, atol=1e-12)

    def test_batch_permutation_equivariance(self):
        rng = np.random.default_rng(8)
        spec = SplineSpec(-1, 1, 5, 3)
        model = roughen(kc.init_kan_model([3, 4, 2], spec, "silu", rng), rng)
        x = rng.uniform(-1, 1, (8, 3))
        perm = rng.permutation(8)
        a, _ = kc.forward(model, x[perm])
        b, _ = kc.forward(model, x)
        np.testing.assert_allclose(a, b[perm], atol=1e-12)

    @pytest.mark.parametrize("shortcut", ["none", "identity", "silu"])
    def test_full_kan_gradients_match_fd(self, shortcut):
        rng = np.random.default_rng(9)
        spec = SplineSpec(-1, 1, 3, 2)
        model = roughen(kc.init_kan_model([2, 3, 2], spec, shortcut, rng), rng)
        x = rng.uniform(-1.2, 1.2, (8, 2))
        y = rng.integers(0, 2, 8)
        temp = kc.TemperatureState(tau=1.0)

        def objective():
            logits, _ = kc.forward(model, x)
            return kc.tsl(kc.cross_entropy(), logits, y, temp).value

        logits, caches = kc.forward(model, x)
        out = kc.tsl(kc.cross_entropy(), logits, y, temp)
        grads = kc.backward(model, caches, out.grad_logits)
        view = params_view(model)
        arrays = [a for layer in view for a in layer.values()]
        analytic = [grads[i][k] for i, layer in enumerate(view) for k in layer]
        grad_check(objective, arrays, analytic)

    def test_full_mlp_gradients_match_fd(self):
        rng = np.random.default_rng(10)
        model = roughen(kc.init_mlp_model([2, 4, 2], "gelu", rng), rng)
        x = rng.normal(size=(8, 2))
        y = rng.integers(0, 2, 8)
        temp = kc.TemperatureState(tau=1.0)

        def objective():
            logits, _ = kc.forward(model, x)
            return kc.tsl(kc.brier_score(), logits, y, temp).value

        logits, caches = kc.forward(model, x)
        out = kc.tsl(kc.brier_score(), logits, y, temp)
        grads = kc.backward(model, caches, out.grad_logits)
        view = params_view(model)
        arrays = [a for layer in view for a in layer.values()]
        analytic = [grads[i][k] for i, layer in enumerate(view) for k in layer]
        grad_check(objective, arrays, analytic)

    def test_zero_upstream_zero_gradset(self):
        rng = np.random.default_rng(11)
        spec = SplineSpec(-1, 1, 3, 2)
        model = kc.init_kan_model([2, 3, 2], spec, "silu", rng)
        logits, caches = kc.forward(model, rng.uniform(-1, 1, (4, 2)))
        grads = kc.backward(model, caches, np.zeros_like(logits))
        for layer in grads:
            for g in layer.values():
                np.testing.assert_array_equal(g, 0.0)


class TestParamCount:
    def test_mlp_arithmetic(self):
        model = kc.init_mlp_model([784, 32, 10], "relu",
                                  np.random.default_rng(0))
        assert param_count(model) == 784 * 32 + 32 + 32 * 10 + 10 == 25450

    def test_kan_with_shortcut(self):
        spec = SplineSpec(-1, 1, 5, 3)
        model = kc.init_kan_model([4, 4], spec, "silu",
                                  np.random.default_rng(0))
        assert param_count(model) == 4 * 4 * 8 + 2 * 16 == 160

    def test_kan_without_shortcut_excludes_base_weights(self):
        spec = SplineSpec(-1, 1, 5, 3)
        model = kc.init_kan_model([4, 4], spec, "none",
                                  np.random.default_rng(0))
        assert param_count(model) == 4 * 4 * 8 + 16


class TestCheckpoint:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(12)
        spec = SplineSpec(-1, 1, 4, 3)
        model = roughen(kc.init_kan_model([3, 5, 2], spec, "silu", rng), rng)
        path = tmp_path / "m.ckpt"
        kc.save_checkpoint(path, model, tau=1.73)
        loaded, tau = kc.load_checkpoint(path)
        assert tau == 1.73
        assert loaded.kind == "kan" and loaded.class_count == 2
        for a, b in zip(params_view(model), params_view(loaded)):
            for key in a:
                np.testing.assert_array_equal(a[key], b[key])
        x = rng.uniform(-1, 1, (4, 3))
        np.testing.assert_array_equal(kc.forward(model, x)[0],
                                      kc.forward(loaded, x)[0])

    def test_mlp_round_trip(self, tmp_path):
        rng = np.random.default_rng(13)
        model = kc.init_mlp_model([4, 6, 3], "gelu", rng)
        kc.save_checkpoint(tmp_path / "m.ckpt", model)
        loaded, tau = kc.load_checkpoint(tmp_path / "m.ckpt")
        assert tau == 1.0
        assert loaded.layers[0].activation == "gelu"
        assert loaded.layers[-1].activation == "none"

    def test_truncated_rejected(self, tmp_path):
        rng = np.random.default_rng(14)
        model = kc.init_mlp_model([4, 3], "relu", rng)
        path = tmp_path / "m.ckpt"
        kc.save_checkpoint(path, model)
        data = path.read_bytes()
        path.write_bytes(data[:-16])
        with pytest.raises(ValueError, match="truncated"):
            kc.load_checkpoint(path)

    def test_non_checkpoint_rejected(self, tmp_path):
        path = tmp_path / "m.ckpt"
        path.write_bytes(b'{"something": "else"}\n' + b"\x00" * 32)
        with pytest.raises(ValueError):
            kc.load_checkpoint(path)


class TestLogitSpread:
    def test_trained_kan_spreads_logits_more_than_mlp(self, spread_runs):
        """Budget-matched spline models should produce wider logit
        distributions than dense baselines on most seeds."""
        wins = sum(run["kan_logits"].std() >= run["mlp_logits"].std()
                   for run in spread_runs)
        assert wins >= 4
