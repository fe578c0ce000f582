import numpy as np
import pytest

from momentwgan import autodiff as ad
from momentwgan.data import Alphabet, decode
from momentwgan.loss import clip_params
from momentwgan.nn import (
    CriticNet, DenseCritic, GeneratorNet, ModelParams, NetConfig, head_widths, lipschitz_estimate,
    load_checkpoint, sample_noise, save_checkpoint,
)
from momentwgan.oracles import gradient_check

SMALL = NetConfig(length=12, alphabet_size=6, channels=4, kernel=3, noise_dim=5)


def one_hot_batch(rng, b, length, u):
    idx = rng.integers(u, size=(b, length))
    return np.eye(u)[idx]


@pytest.mark.parametrize("length, widths", [
    (32, [32, 16, 8, 4, 2, 1]),
    (12, [12, 6, 3, 2, 1]),
    (5, [5, 3, 2, 1]),
    (1, [1]),
])
def test_head_widths_halve_with_ceiling(length, widths):
    assert head_widths(length) == widths


def test_parameter_count_depends_only_on_shape_config(rng):
    a = CriticNet(SMALL, np.random.default_rng(0))
    b = CriticNet(SMALL, np.random.default_rng(99), tau=0.5)
    assert a.params.count() == b.params.count()
    # conv1 + conv2 + head 12->6->3->2->1
    expected = (3 * 6 * 4 + 4) + (3 * 4 * 1 + 1) + (12 * 6 + 6) + (6 * 3 + 3) + (3 * 2 + 2) + (2 * 1 + 1)
    assert a.params.count() == expected


def test_critic_init_within_tau():
    net = CriticNet(SMALL, np.random.default_rng(0), tau=0.05)
    assert net.params.max_abs() <= 0.05


def test_critic_zero_params_gives_zero(rng):
    net = CriticNet(SMALL, rng)
    net.params.fill(0.0)
    out = net(one_hot_batch(rng, 5, 12, 6), training=True, rng=rng).value
    np.testing.assert_array_equal(out, np.zeros(5))


def test_critic_eval_is_deterministic(rng):
    net = CriticNet(SMALL, rng, tau=0.3)
    x = one_hot_batch(rng, 4, 12, 6)
    np.testing.assert_array_equal(net(x).value, net(x).value)


def test_critic_train_mode_varies_only_through_dropout(rng):
    net = CriticNet(SMALL, rng, tau=0.3)
    x = one_hot_batch(rng, 4, 12, 6)
    a = net(x, training=True, rng=np.random.default_rng(5)).value
    b = net(x, training=True, rng=np.random.default_rng(5)).value
    c = net(x, training=True, rng=np.random.default_rng(6)).value
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_critic_hand_set_miniature_counts_a_symbol():
    # kernel width 1, one channel picking symbol 0, head summing the two positions
    cfg = NetConfig(length=2, alphabet_size=3, channels=1, kernel=1, noise_dim=1)
    net = CriticNet(cfg, np.random.default_rng(0))
    net.params.fill(0.0)
    net.params["conv1.weight"].value[0, :, 0] = [1.0, 0.0, 0.0]
    net.params["conv2.weight"].value[0, 0, 0] = 1.0
    net.params["head0.weight"].value[:, 0] = [1.0, 1.0]
    x = np.eye(3)[[[0, 0], [0, 2], [1, 2]]]
    np.testing.assert_array_equal(net(x).value, x[:, :, 0].sum(axis=1))


def test_critic_rejects_wrong_shape(rng):
    net = CriticNet(SMALL, rng)
    with pytest.raises(ValueError, match="critic expects"):
        net(np.zeros((2, 11, 6)))


def test_critic_gradients_match_finite_differences(rng):
    net = CriticNet(SMALL, rng, tau=0.5)
    x = one_hot_batch(rng, 4, 12, 6)
    w = rng.normal(size=4)
    assert gradient_check(lambda: ad.mean(net(x) * w), list(net.params)) < 1e-4


def test_generator_zero_params_is_uniform(rng):
    net = GeneratorNet(SMALL, rng)
    net.params.fill(0.0)
    out = net(sample_noise(3, 5, rng)).value
    np.testing.assert_allclose(out, np.full((3, 12, 6), 1 / 6))


def test_generator_output_shape():
    cfg = NetConfig(length=10, alphabet_size=23, channels=4, kernel=5, noise_dim=8)
    net = GeneratorNet(cfg, np.random.default_rng(0))
    assert net(sample_noise(3, 8, np.random.default_rng(1))).shape == (3, 10, 23)


@pytest.mark.parametrize("training", [False, True])
def test_generator_rows_are_probability_vectors(training, rng):
    net = GeneratorNet(SMALL, rng)
    for p in net.params:
        p.value *= 20
    out = net(sample_noise(6, 5, rng), training=training, rng=rng).value
    assert np.all(out >= 0)
    np.testing.assert_allclose(out.sum(axis=-1), 1.0, atol=1e-9)


def test_generator_gradient_wrt_inflate_matches_finite_differences(rng):
    net = GeneratorNet(SMALL, rng)
    z = sample_noise(4, 5, rng)
    w = rng.normal(size=(4, 12, 6))
    inflate = net.params["inflate.weight"]
    assert gradient_check(lambda: ad.mean(net(z) * w), [inflate]) < 1e-4


def test_generator_full_gradient_matches_finite_differences(rng):
    net = GeneratorNet(SMALL, rng)
    z = sample_noise(4, 5, rng)
    w = rng.normal(size=(4, 12, 6))
    assert gradient_check(lambda: ad.mean(net(z) * w), list(net.params)) < 1e-4


def test_zero_generator_decodes_to_repeated_first_symbol(rng):
    alphabet = Alphabet("ACGT")
    cfg = NetConfig(length=7, alphabet_size=alphabet.size, channels=2, kernel=3, noise_dim=4)
    net = GeneratorNet(cfg, rng)
    net.params.fill(0.0)
    assert decode(net(sample_noise(3, 4, rng)).value, alphabet) == ["A" * 7] * 3


class TestNoise:
    def test_repeatable_from_seed(self):
        a = sample_noise(4, 3, np.random.default_rng(7))
        b = sample_noise(4, 3, np.random.default_rng(7))
        np.testing.assert_array_equal(a, b)

    def test_moments(self):
        z = sample_noise(1000, 1000, np.random.default_rng(0))
        assert abs(z.mean()) < 0.01
        assert abs(z.var() - 1) < 0.01

    def test_single_entry(self, rng):
        z = sample_noise(1, 1, rng)
        assert z.shape == (1, 1) and np.isfinite(z).all()

    def test_rejects_empty(self, rng):
        with pytest.raises(ValueError):
            sample_noise(0, 3, rng)


def test_model_params_order_is_stable():
    a = CriticNet(SMALL, np.random.default_rng(0)).params.names()
    b = CriticNet(SMALL, np.random.default_rng(1)).params.names()
    assert a == b and a[0] == "conv1.weight"


def test_model_params_rejects_duplicates():
    p = ModelParams({"w": np.zeros(2)})
    with pytest.raises(KeyError):
        p.add("w", np.zeros(2))


def test_lipschitz_estimate_shrinks_with_tau():
    cfg = NetConfig(length=12, alphabet_size=6, channels=8, kernel=5)
    rng = np.random.default_rng(3)
    a, b = one_hot_batch(rng, 64, 12, 6), one_hot_batch(rng, 64, 12, 6)
    estimates = []
    for tau in (0.1, 0.01):
        net = CriticNet(cfg, np.random.default_rng(0), tau=tau)
        estimates.append(lipschitz_estimate(net, a, b))
    assert np.isfinite(estimates).all()
    assert estimates[1] < estimates[0]


def test_dense_critic_gradients(rng):
    net = DenseCritic([3, 5, 1], rng, tau=0.5)
    x = rng.normal(size=(7, 3))
    assert gradient_check(lambda: ad.mean(net(x)), list(net.params)) < 1e-4


def test_checkpoint_round_trip_is_bit_exact(tmp_path, rng):
    critic, gen = CriticNet(SMALL, rng, tau=0.2), GeneratorNet(SMALL, rng)
    path = tmp_path / "ck.npz"
    save_checkpoint(path, critic, gen, extra={"alphabet": "ACGT"})
    c2, g2, meta = load_checkpoint(path)
    assert meta["extra"] == {"alphabet": "ACGT"}
    assert c2.config == SMALL
    for a, b in [(critic, c2), (gen, g2)]:
        for (name, x), (_, y) in zip(a.params.items(), b.params.items()):
            assert x.value.tobytes() == y.value.tobytes(), name
    save_checkpoint(tmp_path / "again.npz", c2, g2, extra={"alphabet": "ACGT"})
    assert path.read_bytes() == (tmp_path / "again.npz").read_bytes()


def test_corrupt_checkpoint_raises(tmp_path):
    bad = tmp_path / "bad.npz"
    bad.write_bytes(b"not a zip")
    with pytest.raises(ValueError, match="checkpoint"):
        load_checkpoint(bad)


def test_clipped_critic_stays_in_bounds(rng):
    net = CriticNet(SMALL, rng, tau=1.0)
    clip_params(net.params, 0.01)
    assert net.params.max_abs() <= 0.01
