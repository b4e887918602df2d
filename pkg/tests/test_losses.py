import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import kancal as kc
from kancal.losses import (
    LOSS_NAMES,
    LossKind,
    TemperatureState,
    base_loss,
    default_loss,
    scale_logits,
    softmax,
    tsl,
)

ALL_KINDS = [default_loss(name) for name in LOSS_NAMES]


def tsl_value(kind, logits, labels, tau):
    return tsl(kind, logits, labels, TemperatureState(tau=tau)).value


class TestSoftmax:
    def test_uniform_row(self):
        np.testing.assert_allclose(softmax(np.array([[0.0, 0.0, 0.0]])),
                                   1.0 / 3.0)

    @given(st.lists(st.floats(-50, 50), min_size=2, max_size=6),
           st.floats(-100, 100))
    @settings(max_examples=100, deadline=None)
    def test_shift_invariance(self, row, shift):
        row = np.array([row])
        np.testing.assert_allclose(softmax(row + shift), softmax(row),
                                   atol=1e-12)

    def test_two_zero(self):
        got = softmax(np.array([[2.0, 0.0]]))[0]
        want = np.array([np.e ** 2, 1.0]) / (np.e ** 2 + 1.0)
        np.testing.assert_allclose(got, want, atol=1e-12)
        np.testing.assert_allclose(got, [0.8808, 0.1192], atol=5e-5)

    def test_rows_sum_to_one(self):
        rng = np.random.default_rng(0)
        p = softmax(rng.normal(0, 30, (100, 5)))
        np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-12)
        assert (p >= 0).all()


class TestScaleLogits:
    def test_unit_temperature_is_identity(self):
        g = np.random.default_rng(0).normal(size=(4, 3))
        np.testing.assert_array_equal(scale_logits(g, 1.0), g)

    def test_large_temperature_flattens(self):
        g = np.random.default_rng(1).normal(0, 5, (20, 4))
        p = softmax(scale_logits(g, 1e6))
        np.testing.assert_allclose(p, 0.25, atol=1e-3)

    @pytest.mark.parametrize("tau", [0.5, 1.0, 2.0, 8.0])
    def test_argmax_invariance(self, tau):
        g = np.random.default_rng(2).normal(0, 3, (50, 6))
        np.testing.assert_array_equal(
            softmax(scale_logits(g, tau)).argmax(axis=1), g.argmax(axis=1))

    def test_nonpositive_temperature_rejected(self):
        with pytest.raises(ValueError):
            scale_logits(np.zeros((1, 2)), 0.0)
        with pytest.raises(ValueError):
            scale_logits(np.zeros((1, 2)), -1.0)


class TestLossKindValidation:
    def test_unknown_name(self):
        with pytest.raises(ValueError):
            LossKind("hinge")

    def test_bad_hyperparameters(self):
        with pytest.raises(ValueError):
            LossKind("focal", gamma=-1.0)
        with pytest.raises(ValueError):
            LossKind("label_smooth", alpha=1.0)
        with pytest.raises(ValueError):
            LossKind("focal_calibration", weight=-0.5)

    def test_label_out_of_range(self):
        probs = softmax(np.zeros((2, 3)))
        with pytest.raises(ValueError):
            base_loss(kc.cross_entropy(), probs, np.array([0, 3]))


class TestBaseLossValues:
    def test_ce_fifty_fifty(self):
        value, _ = base_loss(kc.cross_entropy(),
                             np.array([[0.5, 0.5]]), np.array([0]))
        assert abs(value - np.log(2.0)) < 1e-12

    def test_brier_perfect_prediction(self):
        probs = np.array([[1.0, 0.0, 0.0]])
        value, _ = base_loss(kc.brier_score(), probs, np.array([0]))
        assert value == 0.0

    def test_brier_uniform_binary(self):
        value, _ = base_loss(kc.brier_score(),
                             np.array([[0.5, 0.5]]), np.array([0]))
        assert abs(value - 0.5) < 1e-12

    def test_focal_reduces_to_ce_at_gamma_zero(self):
        rng = np.random.default_rng(3)
        probs = softmax(rng.normal(0, 2, (10, 4)))
        labels = rng.integers(0, 4, 10)
        v_ce, g_ce = base_loss(kc.cross_entropy(), probs, labels)
        v_f, g_f = base_loss(kc.focal(gamma=0.0), probs, labels)
        assert abs(v_ce - v_f) < 1e-12
        np.testing.assert_allclose(g_ce, g_f, atol=1e-12)

    def test_label_smoothing_zero_alpha_is_ce(self):
        rng = np.random.default_rng(4)
        probs = softmax(rng.normal(0, 2, (10, 4)))
        labels = rng.integers(0, 4, 10)
        v_ce, g_ce = base_loss(kc.cross_entropy(), probs, labels)
        v_ls, g_ls = base_loss(kc.label_smoothing(alpha=0.0), probs, labels)
        assert abs(v_ce - v_ls) < 1e-12
        np.testing.assert_allclose(g_ce, g_ls, atol=1e-12)

    def test_focal_calibration_is_focal_plus_brier(self):
        rng = np.random.default_rng(5)
        probs = softmax(rng.normal(0, 2, (10, 4)))
        labels = rng.integers(0, 4, 10)
        v_fcl, _ = base_loss(kc.focal_calibration(gamma=3.0, weight=0.7),
                             probs, labels)
        v_f, _ = base_loss(kc.focal(gamma=3.0), probs, labels)
        v_b, _ = base_loss(kc.brier_score(), probs, labels)
        assert abs(v_fcl - (v_f + 0.7 * v_b)) < 1e-12


class TestGradients:
    @pytest.mark.parametrize("kind", ALL_KINDS, ids=[k.name for k in ALL_KINDS])
    def test_logit_gradients_match_fd(self, kind):
        rng = np.random.default_rng(6)
        logits = rng.normal(0, 2, (7, 4))
        labels = rng.integers(0, 4, 7)
        _, grad = base_loss(kind, softmax(logits), labels)
        h = 1e-5
        for i in range(7):
            for j in range(4):
                logits[i, j] += h
                up, _ = base_loss(kind, softmax(logits), labels)
                logits[i, j] -= 2 * h
                down, _ = base_loss(kind, softmax(logits), labels)
                logits[i, j] += h
                fd = (up - down) / (2 * h)
                scale = max(abs(fd), abs(grad[i, j]), 1e-7)
                assert abs(fd - grad[i, j]) / scale < 1e-4

    @pytest.mark.parametrize("kind", ALL_KINDS, ids=[k.name for k in ALL_KINDS])
    @pytest.mark.parametrize("tau", [0.5, 1.0, 2.7])
    def test_tau_gradient_matches_fd(self, kind, tau):
        rng = np.random.default_rng(7)
        logits = rng.normal(0, 2, (9, 5))
        labels = rng.integers(0, 5, 9)
        out = tsl(kind, logits, labels, TemperatureState(tau=tau))
        h = 1e-6
        fd = (tsl_value(kind, logits, labels, tau + h)
              - tsl_value(kind, logits, labels, tau - h)) / (2 * h)
        assert abs(fd - out.grad_tau) / max(abs(fd), abs(out.grad_tau), 1e-7) < 1e-4


class TestTemperatureScaledLoss:
    def test_confident_correct_pushes_tau_down(self):
        out = tsl(kc.cross_entropy(), np.array([[2.0, 0.0]]), np.array([0]),
                  TemperatureState(tau=1.0))
        assert abs(out.grad_tau - 0.23840584404423514) < 1e-12

    def test_confident_wrong_pushes_tau_up(self):
        out = tsl(kc.cross_entropy(), np.array([[2.0, 0.0]]), np.array([1]),
                  TemperatureState(tau=1.0))
        assert abs(out.grad_tau - (-1.7615941559557649)) < 1e-12

    def test_unit_temperature_matches_base(self):
        rng = np.random.default_rng(8)
        logits = rng.normal(0, 2, (12, 4))
        labels = rng.integers(0, 4, 12)
        for kind in ALL_KINDS:
            out = tsl(kind, logits, labels, TemperatureState(tau=1.0))
            value, grad = base_loss(kind, softmax(logits), labels)
            assert out.value == value
            np.testing.assert_array_equal(out.grad_logits, grad)
            assert np.isfinite(out.grad_tau)

    def test_tau_outside_bounds_rejected(self):
        with pytest.raises(ValueError):
            TemperatureState(tau=0.01, tau_min=0.05, tau_max=10.0)
        with pytest.raises(ValueError):
            TemperatureState(tau=11.0)

    def test_ce_tau_gradient_sign_matches_logit_gap(self):
        """For one sample under cross entropy, the temperature gradient has
        the sign of g_y - sum_j p_j g_j."""
        rng = np.random.default_rng(9)
        agree = 0
        for _ in range(1000):
            k = rng.integers(2, 6)
            g = rng.normal(0, 3, (1, k))
            y = np.array([rng.integers(0, k)])
            out = tsl(kc.cross_entropy(), g, y, TemperatureState(tau=1.0))
            p = softmax(g)[0]
            gap = g[0, y[0]] - (p * g[0]).sum()
            agree += np.sign(out.grad_tau) == np.sign(gap)
        assert agree == 1000

    @pytest.mark.parametrize("tau", [0.5, 1.0, 2.0])
    def test_expected_loss_minimized_at_truth(self, tau):
        """Coarse strict-properness probe: over a simplex grid, the expected
        loss under the true distribution is smallest at the nearest grid
        point to the truth (full-resolution version in the acceptance
        suite)."""
        truth = np.array([0.23, 0.46, 0.31])
        step = 0.05
        best = {"ce": (None, np.inf), "brier": (None, np.inf)}
        for i in np.arange(0.0, 1.0 + 1e-9, step):
            for j in np.arange(0.0, 1.0 - i + 1e-9, step):
                p = np.array([i, j, 1.0 - i - j])
                if p[2] < -1e-12:
                    continue
                p = np.clip(p, 1e-12, None)
                p /= p.sum()
                logits = tau * np.log(p)[None, :]
                for name in ("ce", "brier"):
                    expected = sum(
                        truth[y] * tsl_value(default_loss(name), logits,
                                             np.array([y]), tau)
                        for y in range(3))
                    if expected < best[name][1]:
                        best[name] = (p, expected)
        for name in ("ce", "brier"):
            assert np.abs(best[name][0] - truth).max() < step

    def test_scaled_softmax_maximizes_constrained_entropy(self):
        """softmax(g/tau) maximizes H(q) + (1/tau) * <g, q> over the simplex,
        so no distribution with the same expected-logit value can have
        higher entropy."""
        rng = np.random.default_rng(10)
        for _ in range(20):
            k = rng.integers(2, 6)
            g = rng.normal(0, 2, k)
            tau = rng.uniform(0.2, 5.0)
            p_star = softmax((g / tau)[None, :])[0]
            objective_star = (-(p_star * np.log(p_star)).sum()
                              + (g * p_star).sum() / tau)
            q = rng.dirichlet(np.ones(k), size=500)
            entropy = -(q * np.log(np.maximum(q, 1e-300))).sum(axis=1)
            objective = entropy + q @ g / tau
            assert (objective <= objective_star + 1e-9).all()
