import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from calloc.attacks import (
    AttackConfig,
    attack_mask,
    counterfeit_baseline,
    craft,
    craft_fgsm,
    craft_mim,
    craft_pgd,
    select_target_aps,
    select_target_aps_per_row,
    spoof,
    target_count,
)
from calloc.baselines import DenseClassifier


class ConstantGradient:
    """Victim whose loss gradient is a fixed vector, whatever the input."""

    def __init__(self, g):
        self.g = np.asarray(g, dtype=np.float32)
        self.calls = 0

    def input_gradient(self, x, labels):
        self.calls += 1
        return np.broadcast_to(self.g, x.shape).copy()


@pytest.fixture(scope="module")
def victim():
    return DenseClassifier(8, 5, hidden=(16, 16), seed=4)


@pytest.fixture(scope="module")
def batch():
    rng = np.random.default_rng(7)
    return rng.uniform(0, 1, (40, 8)).astype(np.float32), rng.integers(0, 5, 40)


def test_fgsm_arithmetic():
    out = craft_fgsm(ConstantGradient([2.0, -3.0]), [[0.5, 0.5]], [0], 0.1, np.ones(2, bool))
    np.testing.assert_allclose(out, [[0.6, 0.4]], atol=1e-7)


def test_pgd_scalar_examples():
    v, m = ConstantGradient([1.0]), np.ones(1, bool)
    assert craft_pgd(v, [[0.5]], [0], 0.2, 0.05, 3, m)[0, 0] == pytest.approx(0.65, abs=1e-6)
    # five steps of 0.2 would reach 1.5; the box stops it at x + eps
    assert craft_pgd(v, [[0.5]], [0], 0.3, 0.2, 5, m)[0, 0] == pytest.approx(0.8, abs=1e-6)


def test_zero_budget_is_identity(victim, batch):
    x, y = batch
    m = np.ones(8, bool)
    assert np.array_equal(craft_fgsm(victim, x, y, 0.0, m), x)
    assert np.array_equal(craft_pgd(victim, x, y, 0.0, 0.01, 4, m), x)


def test_pgd_one_step_equals_fgsm(victim, batch):
    x, y = batch
    m = select_target_aps(8, 50, seed=1)
    for eps in (0.1, 0.3, 0.5):
        assert np.array_equal(craft_pgd(victim, x, y, eps, eps, 1, m), craft_fgsm(victim, x, y, eps, m))


def test_mim_without_momentum_equals_pgd(victim, batch):
    x, y = batch
    m = np.ones(8, bool)
    assert np.array_equal(craft_mim(victim, x, y, 0.2, 0.05, 6, 0.0, m), craft_pgd(victim, x, y, 0.2, 0.05, 6, m))


def test_mim_constant_direction_equals_pgd():
    v, m = ConstantGradient([0.5, -2.0, 1.0]), np.ones(3, bool)
    x = np.array([[0.3, 0.6, 0.5]])
    assert np.array_equal(craft_mim(v, x, [0], 0.2, 0.05, 5, 1.0, m), craft_pgd(v, x, [0], 0.2, 0.05, 5, m))


def test_iterative_attacks_query_each_step():
    v = ConstantGradient([1.0])
    craft_pgd(v, [[0.5]], [0], 0.2, 0.05, 7, np.ones(1, bool))
    assert v.calls == 7


@given(
    st.sampled_from(["fgsm", "pgd", "mim"]),
    st.floats(0, 0.5),
    st.floats(0, 100),
    st.sampled_from(["manipulation", "spoofing"]),
    st.integers(0, 50),
    st.booleans(),
)
def test_budget_mask_and_range(victim, batch, kind, eps, phi, mode, seed, per_row):
    x, y = batch
    cfg = AttackConfig(kind=kind, epsilon=eps, phi_percent=phi, steps=3, mode=mode, seed=seed, per_sample_mask=per_row)
    means = x.mean(axis=0)
    mask = attack_mask(cfg, len(x), x)
    out = craft(victim, x, y, cfg, mask, means)
    full = np.broadcast_to(mask, x.shape)
    base = counterfeit_baseline(x, mask, means) if mode == "spoofing" else x
    assert np.all(out[~full] == x[~full])
    assert np.all(np.abs(out - base)[full] <= np.float32(eps) + 1e-7)
    assert out.min() >= 0 and out.max() <= 1


def test_attacks_are_deterministic(victim, batch):
    x, y = batch
    cfg = AttackConfig(kind="mim", epsilon=0.3, phi_percent=40, seed=3)
    m = attack_mask(cfg, len(x), x)
    assert np.array_equal(craft(victim, x, y, cfg, m), craft(victim, x, y, cfg, m))


def test_width_and_budget_errors(victim, batch):
    x, y = batch
    with pytest.raises(ValueError, match="width"):
        craft_fgsm(victim, x, y, 0.1, np.ones(5, bool))
    with pytest.raises(ValueError):
        craft_fgsm(victim, x, y, -0.1, np.ones(8, bool))
    with pytest.raises(ValueError):
        craft_pgd(victim, x, y, 0.1, 0.1, 0, np.ones(8, bool))


@pytest.mark.parametrize(
    "kw",
    [dict(kind="cw"), dict(epsilon=-1), dict(phi_percent=101), dict(kind="pgd", steps=0), dict(mode="jam"), dict(mu=-1)],
)
def test_config_validation(kw):
    with pytest.raises(ValueError):
        AttackConfig(**kw)


def test_config_defaults():
    c = AttackConfig(kind="PGD", epsilon=0.2, mode="spoof")
    assert (c.kind, c.mode, c.steps, c.step_size, c.mu) == ("pgd", "spoofing", 10, 0.05, 1.0)
    assert AttackConfig(kind="fgsm", steps=9).steps == 1


def test_mask_counts():
    assert not select_target_aps(156, 0).any()
    assert select_target_aps(156, 100).all()
    assert select_target_aps(156, 10).sum() == 15
    assert target_count(78, 30) == 23


@given(st.integers(1, 300), st.floats(0, 100), st.integers(0, 1000))
def test_mask_popcount_is_floor(n_aps, phi, seed):
    assert select_target_aps(n_aps, phi, seed=seed).sum() == int(np.floor(phi * n_aps / 100 + 1e-9))


@given(st.integers(1, 200), st.integers(0, 1000))
def test_random_masks_nest_as_phi_grows(n_aps, seed):
    masks = [select_target_aps(n_aps, p, seed=seed) for p in range(0, 101, 10)]
    for small, big in zip(masks, masks[1:]):
        assert np.all(big[small])


def test_strongest_targeting_ranks_by_mean_rss():
    rss = np.array([[-90.0, -40.0, -60.0, -20.0], [-90.0, -40.0, -60.0, -20.0]])
    assert select_target_aps(rss, 50, "strongest").tolist() == [False, True, False, True]
    with pytest.raises(ValueError):
        select_target_aps(4, 50, "strongest")


def test_per_row_masks():
    m = select_target_aps_per_row(30, 20, 25, seed=2)
    assert np.all(m.sum(axis=1) == 5)
    assert len({r.tobytes() for r in m}) > 1


def test_spoof_zero_budget_gives_means(victim, batch):
    x, y = batch
    means = np.linspace(0.1, 0.8, 8)
    mask = select_target_aps(8, 50, seed=0)
    out = spoof(victim, x, y, AttackConfig(epsilon=0.0), mask, means)
    np.testing.assert_array_equal(out[:, mask], np.broadcast_to(means[mask].astype(np.float32), (40, 4)))
    np.testing.assert_array_equal(out[:, ~mask], x[:, ~mask])


def test_spoof_empty_mask(victim, batch):
    x, y = batch
    empty = np.zeros(8, bool)
    with pytest.raises(ValueError):
        spoof(victim, x, y, AttackConfig(), empty, x.mean(0))
    assert np.array_equal(craft(victim, x, y, AttackConfig(mode="spoofing"), empty, x.mean(0)), x)


def test_spoof_and_manipulation_differ_only_on_mask(victim, batch):
    x, y = batch
    mask = select_target_aps(8, 30, seed=5)
    a = craft(victim, x, y, AttackConfig(kind="pgd", epsilon=0.2), mask)
    b = craft(victim, x, y, AttackConfig(kind="pgd", epsilon=0.2, mode="spoofing"), mask, x.mean(0))
    assert np.array_equal(a[:, ~mask], b[:, ~mask])
