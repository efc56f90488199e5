"""Forward/backward correctness for the convolutional network."""

import math

import numpy as np
import pytest
from scipy.special import logsumexp

from evolab.errors import ContractViolation, InputError
from evolab.nn import net
from evolab.nn.model import ModelConfig, build_model, flatten, unflatten
from evolab.nn.net import NoiseSpec

from conftest import TINY_CONFIG


def tiny_batch(data_seed=5, n=2):
    rng = np.random.default_rng(data_seed)
    x = rng.random((n, 1, 28, 28))
    y = rng.integers(0, 10, size=n)
    return x, y


class TestNoiseSpec:
    def test_defaults_inactive(self):
        assert not NoiseSpec().active

    @pytest.mark.parametrize("kw", [
        {"input_fraction": -0.1},
        {"input_fraction": 1.5},
        {"feature_fraction": 2.0},
    ])
    def test_fraction_range(self, kw):
        with pytest.raises(InputError):
            NoiseSpec(**kw)

    def test_active(self):
        assert NoiseSpec(input_fraction=0.2).active
        assert NoiseSpec(feature_fraction=0.2).active


class TestForward:
    def test_logit_shape(self, tiny_model):
        x, _ = tiny_batch(n=3)
        logits, cache = net.forward(tiny_model, x)
        assert logits.shape == (3, 10)
        assert cache.n == 3 and cache.mode == "eval"

    def test_bad_mode(self, tiny_model):
        x, _ = tiny_batch()
        with pytest.raises(InputError, match="mode"):
            net.forward(tiny_model, x, mode="test")

    def test_bad_shape(self, tiny_model):
        with pytest.raises(InputError, match="shape"):
            net.forward(tiny_model, np.zeros((2, 1, 14, 14)))

    def test_train_dropout_requires_rng(self, tiny_model):
        x, _ = tiny_batch()
        with pytest.raises(InputError, match="rng"):
            net.forward(tiny_model, x, mode="train")

    def test_eval_needs_no_rng(self, tiny_model):
        x, _ = tiny_batch()
        net.forward(tiny_model, x, mode="eval")  # dropout configs ignored

    def test_corruption_requires_rng_even_in_eval(self, tiny_model):
        x, _ = tiny_batch()
        with pytest.raises(InputError, match="rng"):
            net.forward(tiny_model, x, noise=NoiseSpec(input_fraction=0.5))

    def test_eval_deterministic(self, tiny_model):
        x, _ = tiny_batch()
        a, _ = net.forward(tiny_model, x)
        b, _ = net.forward(tiny_model, x)
        np.testing.assert_array_equal(a, b)

    def test_train_reproducible_given_seed(self, tiny_model):
        x, _ = tiny_batch()
        a, _ = net.forward(tiny_model, x, mode="train",
                           rng=np.random.default_rng(42))
        b, _ = net.forward(tiny_model, x, mode="train",
                           rng=np.random.default_rng(42))
        np.testing.assert_array_equal(a, b)

    def test_zero_params_give_zero_logits(self):
        model = build_model(TINY_CONFIG, 0)
        for p in model.params:
            p[...] = 0.0
        x, _ = tiny_batch(n=4)
        logits, _ = net.forward(model, x)
        np.testing.assert_array_equal(logits, np.zeros((4, 10)))

    def test_nonfinite_logits_rejected(self, tiny_model):
        bad = tiny_model.copy()
        bad.params[11][...] = np.inf  # output bias, keeps the matmul clean
        x, _ = tiny_batch()
        with pytest.raises(ContractViolation, match="finite"):
            net.forward(bad, x)

    def test_dropout_zero_config_draws_nothing(self):
        cfg = ModelConfig(latent_maps=2, linear_width=4,
                          dropout=0.0, input_dropout=0.0)
        model = build_model(cfg, 1)
        x, _ = tiny_batch()
        # train mode without an rng is fine when no randomness is configured
        a, _ = net.forward(model, x, mode="train")
        b, _ = net.forward(model, x, mode="eval")
        np.testing.assert_array_equal(a, b)


class TestCrossEntropy:
    def test_uniform_baseline_is_log10(self):
        logits = np.zeros((6, 10))
        y = np.arange(6) % 10
        assert net.cross_entropy(logits, y) == pytest.approx(math.log(10), abs=1e-12)

    def test_occluded_baseline_is_log8(self):
        logits = np.zeros((4, 10))
        y = np.array([0, 1, 2, 3])
        loss = net.cross_entropy(logits, y, occluded={8, 9})
        assert loss == pytest.approx(math.log(8), abs=1e-12)

    def test_matches_plain_softmax_without_occlusion(self, rng):
        logits = rng.standard_normal((32, 10)) * 3
        y = rng.integers(0, 10, 32)
        ref = float(np.mean(
            logsumexp(logits, axis=1) - logits[np.arange(32), y]
        ))
        assert net.cross_entropy(logits, y) == pytest.approx(ref, rel=1e-12)

    def test_occlusion_restricts_normalization(self, rng):
        logits = rng.standard_normal((16, 10))
        y = rng.integers(0, 8, 16)
        keep = list(range(8))
        ref = float(np.mean(
            logsumexp(logits[:, keep], axis=1) - logits[np.arange(16), y]
        ))
        got = net.cross_entropy(logits, y, occluded={8, 9})
        assert got == pytest.approx(ref, rel=1e-12)

    def test_occluded_label_is_contract_violation(self):
        logits = np.zeros((2, 10))
        with pytest.raises(ContractViolation, match="occluded"):
            net.cross_entropy(logits, [3, 9], occluded={9})

    def test_cannot_occlude_everything(self):
        with pytest.raises(InputError):
            net.cross_entropy(np.zeros((1, 10)), [0], occluded=set(range(10)))

    def test_shape_validation(self):
        with pytest.raises(InputError):
            net.cross_entropy(np.zeros((2, 7)), [0, 1])
        with pytest.raises(InputError, match="labels"):
            net.cross_entropy(np.zeros((2, 10)), [0, 1, 2])

    def test_grad_matches_finite_differences(self, rng):
        logits = rng.standard_normal((5, 10))
        y = rng.integers(0, 8, 5)
        g = net.cross_entropy_grad(logits, y, occluded={9})
        h = 1e-6
        for i in range(5):
            for j in range(10):
                up, down = logits.copy(), logits.copy()
                up[i, j] += h
                down[i, j] -= h
                fd = (net.cross_entropy(up, y, {9})
                      - net.cross_entropy(down, y, {9})) / (2 * h)
                assert g[i, j] == pytest.approx(fd, abs=1e-8)

    def test_grad_zero_at_occluded_columns(self, rng):
        logits = rng.standard_normal((8, 10))
        y = rng.integers(0, 8, 8)
        g = net.cross_entropy_grad(logits, y, occluded={8, 9})
        assert not g[:, 8].any() and not g[:, 9].any()

    def test_grad_rows_sum_to_zero(self, rng):
        # softmax-minus-onehot rows always sum to zero
        logits = rng.standard_normal((8, 10))
        y = rng.integers(0, 10, 8)
        g = net.cross_entropy_grad(logits, y)
        np.testing.assert_allclose(g.sum(axis=1), 0.0, atol=1e-15)


class TestAccuracy:
    def test_plain_argmax(self):
        logits = np.zeros((3, 10))
        logits[0, 4] = 1.0
        logits[1, 7] = 1.0
        logits[2, 0] = 1.0
        assert net.accuracy(logits, [4, 7, 1]) == pytest.approx(2 / 3)

    def test_occluded_labels_count_as_wrong(self):
        logits = np.zeros((2, 10))
        logits[:, 9] = 5.0  # network shouts "9", but 9 is hidden
        assert net.accuracy(logits, [9, 9], occluded={9}) == 0.0

    def test_restricted_argmax_ignores_occluded_columns(self):
        logits = np.zeros((1, 10))
        logits[0, 9] = 5.0
        logits[0, 3] = 1.0
        assert net.accuracy(logits, [3], occluded={9}) == 1.0


def fd_gradient(loss_fn, flat, h):
    """Central finite differences of a scalar function of the flat params."""
    g = np.zeros_like(flat)
    for i in range(flat.size):
        up, down = flat.copy(), flat.copy()
        up[i] += h
        down[i] -= h
        g[i] = (loss_fn(up) - loss_fn(down)) / (2 * h)
    return g


def relative_errors(a, b, floor=1e-7):
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)


class TestBackward:
    def test_matches_fd_eval_mode(self):
        model = build_model(TINY_CONFIG, 3)
        x, y = tiny_batch(data_seed=5)

        def loss_at(flat):
            m = unflatten(flat, TINY_CONFIG)
            logits, _ = net.forward(m, x)
            return net.cross_entropy(logits, y)

        logits, cache = net.forward(model, x)
        analytic = flatten(net.backward(model, cache, y))
        fd = fd_gradient(loss_at, flatten(model), 1e-5)
        assert relative_errors(fd, analytic).max() < 1e-4

    def test_matches_fd_train_mode_with_dropout(self):
        cfg = ModelConfig(latent_maps=2, linear_width=4,
                          dropout=0.1, input_dropout=0.1)
        model = build_model(cfg, 13)
        x, y = tiny_batch(data_seed=5)

        # recreating the generator per call pins the dropout masks, making
        # the loss a deterministic function of the parameters
        def loss_at(flat):
            m = unflatten(flat, cfg)
            logits, _ = net.forward(m, x, mode="train",
                                    rng=np.random.default_rng(99))
            return net.cross_entropy(logits, y)

        _, cache = net.forward(model, x, mode="train",
                               rng=np.random.default_rng(99))
        analytic = flatten(net.backward(model, cache, y))
        fd = fd_gradient(loss_at, flatten(model), 1e-6)
        assert relative_errors(fd, analytic).max() < 1e-3

    def test_matches_fd_with_corruption_noise(self):
        model = build_model(TINY_CONFIG, 13)
        x, y = tiny_batch(data_seed=5)
        noise = NoiseSpec(input_fraction=0.25, feature_fraction=0.25)

        def loss_at(flat):
            m = unflatten(flat, TINY_CONFIG)
            logits, _ = net.forward(m, x, noise=noise,
                                    rng=np.random.default_rng(7))
            return net.cross_entropy(logits, y)

        _, cache = net.forward(model, x, noise=noise,
                               rng=np.random.default_rng(7))
        analytic = flatten(net.backward(model, cache, y))
        # h=1e-5: corruption leaves some gradient entries near 1e-8, where a
        # smaller step runs into the resolution of the loss difference itself
        fd = fd_gradient(loss_at, flatten(model), 1e-5)
        assert relative_errors(fd, analytic).max() < 1e-3

    def test_duplicated_rows_leave_mean_gradient_unchanged(self, tiny_model):
        x, y = tiny_batch(n=3)
        single = net.batch_gradient(tiny_model, x, y)
        doubled = net.batch_gradient(
            tiny_model, np.concatenate([x, x]), np.concatenate([y, y])
        )
        np.testing.assert_allclose(doubled, single, atol=1e-14)

    @pytest.mark.parametrize("seed", range(5))
    def test_gradient_step_descends(self, seed):
        model = build_model(TINY_CONFIG, seed)
        rng = np.random.default_rng(seed + 100)
        x = rng.random((8, 1, 28, 28))
        y = rng.integers(0, 10, 8)
        logits, cache = net.forward(model, x)
        before = net.cross_entropy(logits, y)
        grads = net.backward(model, cache, y)
        for p, g in zip(model.params, grads):
            p -= 1e-4 * g
        after = net.cross_entropy(net.forward(model, x)[0], y)
        assert after < before

    def test_stale_cache_config_rejected(self, tiny_model):
        x, y = tiny_batch()
        _, cache = net.forward(tiny_model, x)
        other = build_model(ModelConfig(latent_maps=4, linear_width=4), 0)
        with pytest.raises(ContractViolation, match="architecture"):
            net.backward(other, cache, y)

    def test_label_count_mismatch_rejected(self, tiny_model):
        x, y = tiny_batch(n=3)
        _, cache = net.forward(tiny_model, x)
        with pytest.raises(ContractViolation, match="batch"):
            net.backward(tiny_model, cache, y[:2])

    def test_gradient_identical_without_cached_window_matrices(
        self, tiny_model, monkeypatch
    ):
        x, y = tiny_batch(n=4)
        _, cache = net.forward(tiny_model, x)
        assert all(c is not None for c in cache.conv_cols)
        with_cols = flatten(net.backward(tiny_model, cache, y))

        monkeypatch.setattr(net, "COLS_CACHE_MAX_BYTES", 0)
        _, lean = net.forward(tiny_model, x)
        assert all(c is None for c in lean.conv_cols)
        without = flatten(net.backward(tiny_model, lean, y))
        np.testing.assert_array_equal(with_cols, without)


class TestEvaluate:
    def test_matches_manual_full_batch(self, tiny_model, rng):
        x = rng.random((20, 1, 28, 28))
        y = rng.integers(0, 10, 20)
        logits, _ = net.forward(tiny_model, x)
        want_loss = net.cross_entropy(logits, y)
        want_acc = net.accuracy(logits, y)
        loss, acc = net.evaluate(tiny_model, x, y, batch_size=512)
        assert loss == pytest.approx(want_loss, rel=1e-12)
        assert acc == pytest.approx(want_acc)

    def test_chunking_invariant(self, tiny_model, rng):
        x = rng.random((17, 1, 28, 28))
        y = rng.integers(0, 10, 17)
        whole = net.evaluate(tiny_model, x, y, batch_size=512)
        chunked = net.evaluate(tiny_model, x, y, batch_size=5)
        assert whole[0] == pytest.approx(chunked[0], rel=1e-12)
        assert whole[1] == chunked[1]

    def test_occluded_samples_excluded_from_loss_but_not_accuracy(
        self, tiny_model, rng
    ):
        x = rng.random((10, 1, 28, 28))
        y = np.array([9] * 5 + [0] * 5)
        loss, acc = net.evaluate(tiny_model, x, y, occluded={9})
        keep_loss, _ = net.evaluate(tiny_model, x[5:], y[5:], occluded={9})
        assert loss == pytest.approx(keep_loss, rel=1e-12)
        assert 0.0 <= acc <= 0.5  # the five 9s can never be right

    def test_all_labels_occluded_gives_nan_loss(self, tiny_model, rng):
        x = rng.random((4, 1, 28, 28))
        y = np.array([9, 9, 9, 9])
        loss, acc = net.evaluate(tiny_model, x, y, occluded={9})
        assert math.isnan(loss)
        assert acc == 0.0

    def test_batch_gradient_flat_length(self, tiny_model):
        x, y = tiny_batch(n=4)
        g = net.batch_gradient(tiny_model, x, y)
        assert g.shape == (tiny_model.n_params(),)
        assert np.isfinite(g).all()
