import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from calloc.autodiff import Tensor
from calloc.model import (
    CallocModel,
    ModelConfig,
    StaleMemoryError,
    model_grad_check,
    one_hot,
    rebuild_anchor_memory,
    reference_model,
    scaled_dot_product_attention,
)


@pytest.fixture(scope="module")
def small():
    rng = np.random.default_rng(0)
    m = CallocModel(ModelConfig(n_in=10, n_classes=4, embed_dim=16, key_dim=8), seed=2)
    x = rng.uniform(0, 1, (12, 10)).astype(np.float32)
    labels = np.repeat(np.arange(4), 3)
    rebuild_anchor_memory(m, x, labels)
    return m, x, labels


def test_reference_param_counts():
    counts = reference_model().param_count()
    # 2 * (165*128 + 128) and 61*61 + 61
    assert counts["emb_curriculum"] + counts["emb_original"] == 42_496
    assert counts["head"] == 3_782
    assert counts["attention"] == 2 * (128 * 64 + 64)
    assert abs(counts["total"] - 65_239) / 65_239 <= 0.05
    assert counts["total"] == sum(t.value.size for t in reference_model().parameters().values())


def test_hand_sized_attention():
    q = np.array([[1.0, 0.0]])
    k = np.array([[1.0, 0.0], [0.0, 1.0]])
    out, w = scaled_dot_product_attention(Tensor(q), Tensor(k), Tensor(np.eye(2)))
    e = math.exp(1 / math.sqrt(2))
    expect = [e / (e + 1), 1 / (e + 1)]
    np.testing.assert_allclose(w.value[0], expect, rtol=1e-12)
    np.testing.assert_allclose(out.value[0], [0.670, 0.330], atol=5e-4)


@given(st.integers(1, 6), st.integers(1, 9), st.integers(0, 10_000))
def test_attention_rows_sum_to_one(nq, nk, seed):
    rng = np.random.default_rng(seed)
    q, k = rng.normal(size=(nq, 5)) * 4, rng.normal(size=(nk, 5)) * 4
    v = one_hot(rng.integers(0, 3, nk), 3, np.float64)
    out, w = scaled_dot_product_attention(Tensor(q), Tensor(k), Tensor(v))
    np.testing.assert_allclose(w.value.sum(axis=1), 1.0, atol=1e-6)
    assert out.shape == (nq, 3)


def test_identical_keys_give_column_mean(rng):
    k = np.tile(rng.normal(size=(1, 6)), (7, 1))
    v = one_hot(np.array([0, 0, 1, 2, 2, 2, 1]), 3, np.float64)
    out, _ = scaled_dot_product_attention(Tensor(rng.normal(size=(4, 6))), Tensor(k), Tensor(v))
    np.testing.assert_allclose(out.value, np.tile(v.mean(axis=0), (4, 1)), atol=1e-6)


def test_single_anchor_returns_its_label(rng):
    v = one_hot(np.array([2]), 4, np.float64)
    out, _ = scaled_dot_product_attention(Tensor(rng.normal(size=(5, 3))), Tensor(rng.normal(size=(1, 3))), Tensor(v))
    np.testing.assert_allclose(out.value, np.tile(v, (5, 1)), atol=1e-12)


def test_single_row_memory(small):
    m, x, labels = small
    other = CallocModel(m.config, seed=2)
    mem = rebuild_anchor_memory(other, x[:1], labels[:1])
    assert len(mem) == 1
    np.testing.assert_allclose(other.attention_weights(x), 1.0)


def test_anchor_permutation_invariance(small, rng):
    m, x, labels = small
    perm = rng.permutation(len(labels))
    mem = m.memory
    shuffled = replace(mem, keys=mem.keys[perm], values=mem.values[perm], labels=mem.labels[perm])
    np.testing.assert_allclose(m.forward(x, shuffled).value, m.forward(x).value, atol=1e-5)


def test_memory_shapes_reference_split():
    m = reference_model()
    rng = np.random.default_rng(0)
    x = rng.uniform(0, 1, (305, 165)).astype(np.float32)
    mem = rebuild_anchor_memory(m, x, np.repeat(np.arange(61), 5))
    assert mem.keys.shape == (305, 128)
    assert mem.values.shape == (305, 61)
    assert np.all(mem.values.sum(axis=1) == 1)


def test_rebuild_is_deterministic(small):
    m, x, labels = small
    a = rebuild_anchor_memory(m, x, labels)
    b = rebuild_anchor_memory(m, x, labels)
    assert np.array_equal(a.keys, b.keys) and a.digest == b.digest


def test_stale_memory_rejected(small):
    m, x, labels = small
    clone = CallocModel(m.config, seed=2)
    rebuild_anchor_memory(clone, x, labels)
    clone.touch()
    with pytest.raises(StaleMemoryError):
        clone.predict(x)
    rebuild_anchor_memory(clone, x, labels)
    clone.predict(x)


def test_missing_memory_and_width_mismatch(small):
    m, x, _ = small
    with pytest.raises(ValueError, match="empty"):
        CallocModel(m.config).predict(x)
    with pytest.raises(ValueError, match="width"):
        m.predict(x[:, :5])
    with pytest.raises(ValueError):
        rebuild_anchor_memory(CallocModel(m.config), x[:0], [])


def test_eval_embeddings_deterministic(small):
    m, x, _ = small
    assert np.array_equal(m.embed_original(x).value, m.embed_original(x).value)


def test_zero_weights_give_zero_embedding(small):
    m, x, _ = small
    z = CallocModel(m.config)
    z.emb_curriculum.dense.W.value[:] = 0
    assert not z.embed_curriculum(x).value.any()


def test_curriculum_path_has_no_stochastic_layers():
    m = reference_model()
    assert m.emb_curriculum.dropout == 0 and m.emb_curriculum.noise_sigma == 0
    assert m.emb_original.dropout == 0.2 and m.emb_original.noise_sigma == 0.32


def test_predict_returns_class_indices(small):
    m, x, _ = small
    p = m.predict(x)
    assert p.shape == (12,) and p.min() >= 0 and p.max() < 4


def test_input_gradient_matches_finite_difference(small):
    m, x, labels = small
    m64 = m.astype(np.float64)
    rebuild_anchor_memory(m64, x.astype(np.float64), labels)
    xq = x[:2].astype(np.float64)
    g = m64.input_gradient(xq, labels[:2])

    def loss(v):
        z = m64.logits(v)
        z = z - z.max(axis=1, keepdims=True)
        logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
        return -logp[np.arange(2), labels[:2]].sum()

    h = 1e-6
    for i, j in [(0, 0), (1, 3), (0, 9)]:
        e = np.zeros_like(xq)
        e[i, j] = h
        assert g[i, j] == pytest.approx((loss(xq + e) - loss(xq - e)) / (2 * h), rel=1e-4, abs=1e-8)


def test_full_model_grad_check():
    rep = model_grad_check(reference_model(seed=3), n_samples=100)
    assert rep.n_checked >= 100
    assert rep.max_rel_error < 1e-3


def test_training_loss_components(small):
    from calloc.autodiff import RngStream

    m, x, labels = small
    total, ce, mse = m.training_loss(x[:4], np.arange(4), x, labels, labels[:4], RngStream(0), 0.5)
    assert total.item() == pytest.approx(ce.item() + 0.5 * mse.item(), rel=1e-5)
    _, _, zero = m.training_loss(x[:4], np.arange(4), x, labels, labels[:4], RngStream(0), 0.0)
    assert zero.item() == 0.0


def test_state_round_trip(small):
    m, x, labels = small
    other = CallocModel(m.config, seed=99)
    other.load_state(m.state())
    rebuild_anchor_memory(other, x, labels)
    assert np.array_equal(other.logits(x), m.logits(x))
    with pytest.raises(ValueError):
        other.load_state({"nope": np.zeros(1)})


def test_invalid_config():
    with pytest.raises(ValueError):
        ModelConfig(0, 3)
