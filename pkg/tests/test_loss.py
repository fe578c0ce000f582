import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from momentwgan import autodiff as ad
from momentwgan.loss import (
    LossConfig, MomentSummary, central_moments, clip_params, critic_loss, generator_loss,
    signed_first_moment,
)
from momentwgan.nn import ModelParams
from momentwgan.oracles import exact_central_moments, gradient_check

scores = st.lists(st.floats(-1, 1, allow_nan=False), min_size=1, max_size=40)


class TestCentralMoments:
    def test_constant_batch(self):
        s = central_moments([5, 5, 5, 5], 4)
        assert s == MomentSummary(5.0, (0.0, 0.0, 0.0))

    def test_symmetric_pair(self):
        s = central_moments([-1, 1], 4)
        assert (s.mu1, *s.central) == (0.0, 1.0, 0.0, 1.0)

    def test_zero_to_three(self):
        mu1, exact = exact_central_moments([0, 1, 2, 3], 4)
        assert (mu1, *exact) == (1.5, 1.25, 0, 2.5625)
        s = central_moments([0, 1, 2, 3], 4)
        assert (s.mu1, *s.central) == (1.5, 1.25, 0.0, 2.5625)

    def test_m1_has_no_central_moments(self):
        assert central_moments([1.0, 2.0], 1).central == ()

    def test_empty_raises(self):
        with pytest.raises(ValueError, match="empty"):
            central_moments([], 2)

    def test_matches_exact_oracle(self, rng):
        for _ in range(20):
            x = rng.normal(rng.uniform(-2, 2), rng.uniform(0.1, 3), size=int(rng.integers(2, 200)))
            mu1, exact = exact_central_moments(x, 6)
            s = central_moments(x, 6)
            assert s.mu1 == pytest.approx(float(mu1), rel=1e-12)
            for got, want in zip(s.central, exact):
                assert got == pytest.approx(float(want), rel=1e-12, abs=1e-300)

    @given(scores)
    def test_even_moments_nonnegative(self, xs):
        s = central_moments(xs, 6)
        assert s.moment(2) >= 0 and s.moment(4) >= 0 and s.moment(6) >= 0


class TestCriticLoss:
    def test_equal_predictions(self):
        assert critic_loss([0.3, 0.1], [0.3, 0.1]).item() == 0

    def test_unit_separation(self):
        assert critic_loss([1.0], [0.0]).item() == -1

    def test_arithmetic(self):
        assert critic_loss([0.2, 0.4], [0.1, 0.1]).item() == pytest.approx(-0.2)

    def test_empty_raises(self):
        with pytest.raises(ValueError):
            critic_loss([], [1.0])


class TestGeneratorLoss:
    def test_identical_batches(self):
        x = [0.1, -0.3, 0.7]
        for m in (2, 3, 4):
            assert generator_loss(x, x, m).item() == pytest.approx(0, abs=1e-15)
        assert generator_loss(x, x, 1).item() == pytest.approx(-np.mean(x))

    def test_second_moment_gap(self):
        assert generator_loss([0.0, 1.0], [0.5, 0.5], 2).item() == pytest.approx(0.25)

    def test_m1_is_negated_mean(self):
        assert generator_loss([9.0], [0.2, 0.4], 1).item() == pytest.approx(-0.3)

    def test_rejects_bad_m(self):
        with pytest.raises(ValueError):
            generator_loss([1.0], [1.0], 0)

    def test_matches_direct_formula(self, rng):
        real, gen = rng.normal(size=17), rng.normal(0.3, 2, size=17)
        expected = real.mean() - gen.mean()
        for j in range(2, 5):
            expected += abs(np.mean((gen - gen.mean()) ** j) - np.mean((real - real.mean()) ** j))
        assert generator_loss(real, gen, 4).item() == pytest.approx(expected, rel=1e-12)

    @pytest.mark.parametrize("m", [1, 2, 3, 4, 6])
    def test_gradient_wrt_generated_scores(self, m, rng):
        real = rng.normal(size=9)
        gen = ad.Node(rng.normal(0.5, 1.5, size=9), requires_grad=True)
        assert gradient_check(lambda: generator_loss(real, gen, m), [gen]) < 1e-4

    def test_no_gradient_reaches_real_scores(self, rng):
        real = ad.Node(rng.normal(size=8), requires_grad=True)
        gen = ad.Node(rng.normal(size=8), requires_grad=True)
        ad.backward(generator_loss(real, gen, 4))
        assert real.grad is None or not np.any(real.grad)
        assert gen.grad is not None

    @settings(max_examples=200)
    @given(scores, scores, st.integers(2, 5))
    def test_dominates_signed_first_moment(self, real, gen, m):
        loss = generator_loss(real, gen, m).item()
        assert loss >= signed_first_moment(real, gen) - 1e-12
        assert generator_loss(real, gen, m + 1).item() >= loss - 1e-12


class TestClip:
    def test_componentwise(self):
        p = ModelParams({"w": np.array([0.5, -0.2, 0.01])})
        clip_params(p, 0.1)
        np.testing.assert_array_equal(p["w"].value, [0.1, -0.1, 0.01])

    def test_inside_is_identity(self, rng):
        w = rng.uniform(-0.05, 0.05, size=20)
        p = ModelParams({"w": w.copy()})
        clip_params(p, 0.1)
        np.testing.assert_array_equal(p["w"].value, w)

    def test_idempotent(self, rng):
        p = ModelParams({"w": rng.normal(size=50)})
        once = clip_params(p, 0.3)["w"].value.copy()
        np.testing.assert_array_equal(clip_params(p, 0.3)["w"].value, once)

    def test_rejects_nonpositive_tau(self):
        with pytest.raises(ValueError):
            clip_params(ModelParams(), 0)


def test_loss_config_validation():
    assert LossConfig(m=3, tau=0.02).m == 3
    with pytest.raises(ValueError):
        LossConfig(m=0)
    with pytest.raises(ValueError):
        LossConfig(tau=-1)
