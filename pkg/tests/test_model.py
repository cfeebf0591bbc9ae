import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from unihssl.model import (
    Encoder,
    Head,
    Model,
    classify,
    encode,
    init_2c_from_pretrained,
    load_checkpoint,
    logits,
    save_checkpoint,
)
from unihssl.ndgrad import DimensionError, Tensor


def loop_forward(weights, biases, x):
    h = [list(row) for row in x]
    for layer, (w, b) in enumerate(zip(weights, biases)):
        out = []
        for row in h:
            new = []
            for j in range(w.shape[1]):
                s = b[j]
                for i in range(w.shape[0]):
                    s += row[i] * w[i, j]
                if layer < len(weights) - 1:
                    s = max(s, 0.0)
                new.append(s)
            out.append(new)
        h = out
    return np.array(h)


def test_zero_encoder_gives_zero_embedding():
    enc = Encoder([3, 4, 2], [Tensor(np.zeros((3, 4))), Tensor(np.zeros((4, 2)))], [Tensor(np.zeros(4)), Tensor(np.zeros(2))])
    np.testing.assert_array_equal(encode(enc, np.ones((5, 3))).data, np.zeros((5, 2)))


def test_identity_layer():
    enc = Encoder([3, 3], [Tensor(np.eye(3))], [Tensor(np.zeros(3))])
    x = np.random.default_rng(0).normal(size=(4, 3))
    np.testing.assert_array_equal(encode(enc, x).data, x)


def test_encoder_matches_loop_oracle():
    rng = np.random.default_rng(1)
    enc = Encoder.init([5, 7, 3], rng)
    for b in enc.biases:
        b.data[:] = rng.normal(size=b.shape)
    x = rng.normal(size=(6, 5))
    expected = loop_forward([w.data for w in enc.weights], [b.data for b in enc.biases], x)
    np.testing.assert_allclose(encode(enc, x).data, expected, atol=1e-12)


def test_encoder_input_mismatch():
    enc = Encoder.init([5, 3], np.random.default_rng(0))
    with pytest.raises(DimensionError):
        encode(enc, np.zeros((2, 4)))


def test_glorot_bounds_and_zero_bias():
    enc = Encoder.init([16, 64, 32], np.random.default_rng(2))
    for w, b in zip(enc.weights, enc.biases):
        bound = np.sqrt(6.0 / sum(w.shape))
        assert np.all(np.abs(w.data) <= bound)
        assert np.all(b.data == 0)


class TestClassify:
    def test_zero_logits_uniform(self):
        head = Head(Tensor(np.zeros((3, 4))), Tensor(np.zeros(4)))
        np.testing.assert_allclose(classify(head, Tensor(np.ones((2, 3)))).data, 0.25, atol=1e-15)

    def test_dominant_logit(self):
        head = Head(Tensor(np.zeros((2, 3))), Tensor([0.0, 1000.0, 0.0]))
        np.testing.assert_allclose(classify(head, Tensor(np.ones((1, 2)))).data, [[0, 1, 0]], atol=1e-12)

    def test_formula(self):
        rng = np.random.default_rng(3)
        head = Head(Tensor(rng.normal(size=(3, 4))), Tensor(rng.normal(size=4)))
        z = rng.normal(size=(5, 3))
        lg = z @ head.weight.data + head.bias.data
        expected = np.exp(lg) / np.exp(lg).sum(axis=1, keepdims=True)
        np.testing.assert_allclose(classify(head, Tensor(z)).data, expected, atol=1e-12)

    def test_mismatch(self):
        head = Head.init(3, 2, np.random.default_rng(0))
        with pytest.raises(DimensionError):
            classify(head, Tensor(np.zeros((1, 4))))

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10_000))
    def test_rows_sum_to_one(self, seed):
        rng = np.random.default_rng(seed)
        head = Head(Tensor(rng.normal(scale=5, size=(3, 6))), Tensor(rng.normal(size=6)))
        p = classify(head, Tensor(rng.normal(scale=5, size=(4, 3)))).data
        np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-12)


class TestInit2C:
    def setup_method(self):
        rng = np.random.default_rng(4)
        self.g = Head(Tensor(rng.normal(size=(4, 3))), Tensor(rng.normal(size=3)))

    def test_first_columns_copied_exactly(self):
        h = init_2c_from_pretrained(self.g, np.random.default_rng(0))
        assert h.out_classes == 6
        np.testing.assert_array_equal(h.weight.data[:, :3], self.g.weight.data)
        np.testing.assert_array_equal(h.bias.data[:3], self.g.bias.data)
        np.testing.assert_array_equal(h.bias.data[3:], 0.0)

    def test_same_seed_same_random_half(self):
        a = init_2c_from_pretrained(self.g, np.random.default_rng(7))
        b = init_2c_from_pretrained(self.g, np.random.default_rng(7))
        np.testing.assert_array_equal(a.weight.data, b.weight.data)

    def test_different_seed(self):
        a = init_2c_from_pretrained(self.g, np.random.default_rng(7))
        b = init_2c_from_pretrained(self.g, np.random.default_rng(8))
        np.testing.assert_array_equal(a.weight.data[:, :3], b.weight.data[:, :3])
        assert not np.array_equal(a.weight.data[:, 3:], b.weight.data[:, 3:])

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10_000))
    def test_preserves_first_c_logits(self, seed):
        z = Tensor(np.random.default_rng(seed).normal(size=(5, 4)))
        h = init_2c_from_pretrained(self.g, np.random.default_rng(seed))
        np.testing.assert_array_equal(logits(h, z).data[:, :3], logits(self.g, z).data)


def test_checkpoint_round_trip_is_bit_exact(tmp_path):
    rng = np.random.default_rng(5)
    model = Model(Encoder.init([6, 8, 4], rng), Head.init(4, 6, rng))
    model.head.bias.data[:] = rng.normal(size=6)
    path = tmp_path / "m.npz"
    save_checkpoint(model, path)
    loaded = load_checkpoint(path)
    assert loaded.encoder.layer_dims == [6, 8, 4]
    for a, b in zip(model.parameters(), loaded.parameters()):
        assert a.data.shape == b.data.shape
        np.testing.assert_array_equal(a.data, b.data)
    x = rng.normal(size=(3, 6))
    np.testing.assert_array_equal(model.predict(x), loaded.predict(x))


def test_model_copy_is_independent():
    rng = np.random.default_rng(6)
    model = Model(Encoder.init([3, 2], rng), Head.init(2, 2, rng))
    clone = model.copy()
    clone.head.weight.data += 1.0
    assert not np.array_equal(model.head.weight.data, clone.head.weight.data)
