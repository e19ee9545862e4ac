import numpy as np
import pytest

from scgc.core import finite_difference_gradient, make_rng, pack, relative_error, unpack
from scgc.model import (AutoencoderParams, OptimizerState, adam_step, backward, decode, decode_with_cache,
                        encode, encode_with_cache, init_autoencoder, load_checkpoint, save_checkpoint)


def straight_line_forward(layers, h, relu=True):
    """Independent re-statement of the layer recurrence."""
    for k in range(len(layers)):
        w, b = layers[k]
        out = np.zeros((h.shape[0], w.shape[1]))
        for i in range(h.shape[0]):
            for j in range(w.shape[1]):
                out[i, j] = sum(h[i, m] * w[m, j] for m in range(w.shape[0])) + b[j]
        if relu and k < len(layers) - 1:
            out = np.where(out > 0, out, 0.0)
        h = out
    return h


class TestInit:
    def test_mirrored_parameter_count(self):
        p = init_autoencoder(334, [500, 500, 2000], 10, decoder=True, rng=make_rng(0))
        enc = p.num_parameters("encoder")
        dec_weights = sum(w.size for w, _ in p.decoder)
        enc_weights = sum(w.size for w, _ in p.encoder)
        assert dec_weights == enc_weights
        # biases differ only by the layer-width ordering; weights mirror exactly
        assert enc == sum(a * b + b for a, b in zip([334, 500, 500, 2000], [500, 500, 2000, 10]))
        assert p.dims == [334, 500, 500, 2000, 10]
        assert [w.shape for w, _ in p.decoder] == [(10, 2000), (2000, 500), (500, 500), (500, 334)]

    def test_encoder_only(self):
        p = init_autoencoder(8, [6], 3, decoder=False, rng=make_rng(0))
        assert p.decoder == [] and not p.has_decoder

    def test_encoder_only_is_encoder_half(self):
        full = init_autoencoder(8, [6, 5], 3, decoder=True, rng=make_rng(0))
        assert full.encoder_only().num_parameters() == full.num_parameters("encoder")
        weights_full = sum(w.size for w, _ in full.encoder + full.decoder)
        weights_enc = sum(w.size for w, _ in full.encoder_only().encoder)
        assert weights_full == 2 * weights_enc

    def test_seed_reproducible(self):
        a = init_autoencoder(5, [4], 2, True, make_rng(42, "init"))
        b = init_autoencoder(5, [4], 2, True, make_rng(42, "init"))
        for k, v in a.named_arrays().items():
            np.testing.assert_array_equal(v, b.named_arrays()[k])

    def test_init_scale_and_zero_bias(self):
        p = init_autoencoder(100, [50], 4, True, make_rng(1))
        w, b = p.encoder[0]
        assert np.abs(w).max() <= np.sqrt(1 / 100)
        assert np.all(b == 0)

    def test_mismatched_chain_rejected(self):
        with pytest.raises(ValueError):
            AutoencoderParams([(np.zeros((3, 4)), np.zeros(4)), (np.zeros((5, 2)), np.zeros(2))])


class TestForward:
    def test_zero_weights(self):
        p = init_autoencoder(4, [3], 2, True, make_rng(0))
        for w, b in p.encoder + p.decoder:
            w[:] = 0
            b[:] = 0
        x = np.random.default_rng(0).normal(size=(5, 4))
        np.testing.assert_array_equal(encode(p, x), 0.0)
        np.testing.assert_array_equal(decode(p, np.ones((5, 2))), 0.0)

    def test_identity_slice(self):
        p = AutoencoderParams([(np.eye(4)[:, :2], np.zeros(2))], [(np.eye(4)[:2, :], np.zeros(4))])
        x = np.arange(12.0).reshape(3, 4)
        np.testing.assert_array_equal(encode(p, x), x[:, :2])
        z = np.array([[1.0, 2.0]])
        np.testing.assert_array_equal(decode(p, z), [[1.0, 2.0, 0.0, 0.0]])

    def test_against_straight_line_oracle(self):
        p = init_autoencoder(6, [5, 4], 3, True, make_rng(3))
        for _, b in p.encoder + p.decoder:
            b[:] = np.random.default_rng(1).normal(size=b.shape)
        x = np.random.default_rng(2).normal(size=(4, 6))
        z = encode(p, x)
        np.testing.assert_allclose(z, straight_line_forward(p.encoder, x), rtol=0, atol=1e-12)
        np.testing.assert_allclose(decode(p, z), straight_line_forward(p.decoder, z), rtol=0, atol=1e-12)

    def test_deterministic(self):
        p = init_autoencoder(6, [5], 3, True, make_rng(3))
        x = np.random.default_rng(2).normal(size=(7, 6))
        assert np.array_equal(encode(p, x), encode(p, x))

    def test_shape_errors(self):
        p = init_autoencoder(6, [5], 3, False, make_rng(3))
        with pytest.raises(ValueError):
            encode(p, np.ones((2, 5)))
        with pytest.raises(ValueError, match="encoder-only"):
            decode(p, np.ones((2, 3)))


class TestBackward:
    def test_zero_upstream(self):
        p = init_autoencoder(4, [3], 2, True, make_rng(0))
        x = np.ones((3, 4))
        z, ec = encode_with_cache(p, x)
        xh, dc = decode_with_cache(p, z)
        grads = backward(p, ec, np.zeros_like(z), dc, np.zeros_like(xh))
        assert set(grads) == set(p.named_arrays())
        for g in grads.values():
            assert np.all(g == 0)

    def test_linear_closed_form(self):
        rng = np.random.default_rng(4)
        x, y = rng.normal(size=(6, 3)), rng.normal(size=(6, 2))
        w = rng.normal(size=(3, 2))
        p = AutoencoderParams([(w.copy(), np.zeros(2))], activation="linear")
        z, ec = encode_with_cache(p, x)
        dz = 2.0 * (z - y) / x.shape[0]  # d/dz of mean-over-batch squared error
        grads = backward(p, ec, dz)
        np.testing.assert_allclose(grads["enc0.W"], 2.0 * x.T @ (x @ w - y) / 6, rtol=0, atol=1e-12)

    def test_against_finite_differences(self):
        p = init_autoencoder(5, [4, 6], 3, True, make_rng(8))
        rng = np.random.default_rng(9)
        for _, b in p.encoder + p.decoder:
            b[:] = 0.1 * rng.normal(size=b.shape)
        # keep only rows whose ReLU inputs stay clear of the kink
        rows = []
        while len(rows) < 7:
            cand = rng.normal(size=(1, 5))
            z, ec = encode_with_cache(p, cand)
            _, dc = decode_with_cache(p, z)
            if min(np.abs(a).min() for a in ec["pre"][:-1] + dc["pre"][:-1]) > 1e-3:
                rows.append(cand[0])
        x = np.array(rows)
        target = np.random.default_rng(10).normal(size=(x.shape[0], 3))
        like = p.named_arrays()

        def loss_of(vec):
            q = p.copy()
            for k, v in unpack(vec, like).items():
                q.named_arrays()[k][...] = v
            z = encode(q, x)
            return float(np.sum((decode(q, z) - x) ** 2) + np.sum(np.sin(z) * target))

        z, ec = encode_with_cache(p, x)
        xh, dc = decode_with_cache(p, z)
        grads = backward(p, ec, np.cos(z) * target, dc, 2.0 * (xh - x))
        fd = finite_difference_gradient(loss_of, pack(like), 1e-5)
        assert relative_error(pack({k: grads[k] for k in like}), fd) < 1e-4

    def test_shape_mismatch(self):
        p = init_autoencoder(4, [3], 2, False, make_rng(0))
        _, ec = encode_with_cache(p, np.ones((3, 4)))
        with pytest.raises(ValueError):
            backward(p, ec, np.ones((4, 2)))
        with pytest.raises(ValueError):
            backward(p, ec, np.ones((3, 2)), None, np.ones((3, 4)))


class TestAdam:
    def test_zero_gradient_no_change(self):
        params = {"w": np.array([1.0, -2.0])}
        adam_step(OptimizerState(lr=0.1), params, {"w": np.zeros(2)})
        np.testing.assert_array_equal(params["w"], [1.0, -2.0])

    def test_first_step_sign(self):
        params = {"w": np.zeros(3)}
        g = np.array([1e3, -5e2, 2e4])
        _, state = adam_step(OptimizerState(lr=0.01), params, {"w": g})
        np.testing.assert_allclose(params["w"], -0.01 * np.sign(g), rtol=1e-9)
        assert state.step == 1

    def test_quadratic_decreases(self):
        a = np.diag([1.0, 4.0, 9.0])
        params = {"w": np.array([3.0, -2.0, 1.0])}
        state = OptimizerState(lr=0.05)
        losses = []
        for _ in range(100):
            w = params["w"]
            losses.append(float(w @ a @ w))
            adam_step(state, params, {"w": 2 * a @ w})
        assert all(b < a_ for a_, b in zip(losses, losses[1:]))
        assert state.step == 100

    def test_non_finite_names_layer(self):
        with pytest.raises(FloatingPointError, match="enc1.W"):
            adam_step(OptimizerState(lr=0.1), {"enc1.W": np.zeros(2)}, {"enc1.W": np.array([0.0, np.nan])})


def test_checkpoint_roundtrip(tmp_path):
    p = init_autoencoder(5, [4], 2, True, make_rng(3), seed=3)
    mu = np.random.default_rng(0).normal(size=(3, 2))
    save_checkpoint(tmp_path / "ck.json", p, mu, {"note": 1})
    q, mu2, extra = load_checkpoint(tmp_path / "ck.json")
    for k, v in p.named_arrays().items():
        np.testing.assert_array_equal(v, q.named_arrays()[k])
    np.testing.assert_array_equal(mu, mu2)
    assert q.seed == 3 and q.activation == "relu" and extra == {"note": 1}

    enc = p.encoder_only()
    save_checkpoint(tmp_path / "enc.json", enc)
    q, mu3, _ = load_checkpoint(tmp_path / "enc.json")
    assert not q.has_decoder and mu3 is None
