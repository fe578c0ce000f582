import math

import numpy as np
import pytest
import scipy.stats
from hypothesis import given, settings
from hypothesis import strategies as st

from momentwgan.evaluation import KmerDistribution, emd_1d, kl_divergence, kmer_distribution, spearman_rho
from momentwgan.oracles import brute_force_emd, direct_kl


class TestKmers:
    def test_windows(self):
        d = kmer_distribution(["ABCDEFG"], 6)
        assert d.probabilities() == {"ABCDEF": 0.5, "BCDEFG": 0.5}

    def test_repeat(self):
        assert kmer_distribution(["AA", "AA"], 2).probabilities() == {"AA": 1.0}

    def test_k_longer_than_sequences(self):
        d = kmer_distribution(["ABC"], 4)
        assert d.total == 0 and len(d) == 0

    def test_framing_symbols_excluded(self):
        assert kmer_distribution(["^AB$$"], 2).probabilities() == {"AB": 1.0}

    def test_rejects_k0(self):
        with pytest.raises(ValueError):
            kmer_distribution(["A"], 0)

    def test_probabilities_sum_to_one(self, rng):
        seqs = ["".join(rng.choice(list("ACGT"), 20)) for _ in range(30)]
        assert math.isclose(sum(kmer_distribution(seqs, 3).probabilities().values()), 1.0)


class TestKL:
    def test_self_is_zero(self):
        d = kmer_distribution(["ACGTTGCA", "AACC"], 2)
        assert kl_divergence(d, d) == 0.0

    def test_missing_background_word_uses_pseudocount(self):
        fg = KmerDistribution(2, {"AA": 1, "AB": 1})
        bg = KmerDistribution(2, {"AA": 1})
        expected = 0.5 * math.log(0.5) + 0.5 * math.log(0.5 / 1e-10)
        assert kl_divergence(fg, bg, 1e-10) == pytest.approx(expected)
        assert expected == pytest.approx(10.82, abs=0.01)

    def test_subset_support_is_standard_kl(self, rng):
        bg = KmerDistribution(1, dict(zip("ABCD", rng.integers(1, 50, size=4).tolist())))
        fg = KmerDistribution(1, {"A": 3, "C": 5})
        p, q = fg.probabilities(), bg.probabilities()
        for pc in (1e-10, 0.5):
            assert kl_divergence(fg, bg, pc) == pytest.approx(direct_kl(p, q, pc), rel=1e-12)
        want = scipy.stats.entropy([p.get(w, 0) for w in "ABCD"], [q[w] for w in "ABCD"])
        assert kl_divergence(fg, bg) == pytest.approx(want, rel=1e-12)

    def test_empty_foreground(self):
        with pytest.raises(ValueError):
            kl_divergence(KmerDistribution(2), KmerDistribution(2, {"AA": 1}))

    def test_k_mismatch(self):
        with pytest.raises(ValueError):
            kl_divergence(KmerDistribution(2, {"AA": 1}), KmerDistribution(3, {"AAA": 1}))

    @given(st.lists(st.text("ABC", min_size=2, max_size=8), min_size=1, max_size=8),
           st.lists(st.text("ABC", min_size=2, max_size=8), min_size=1, max_size=8))
    def test_gibbs_lower_bound(self, a, b):
        # padding q with pseudocounts can push its mass over 1, so the bound is
        # -ln(sum of padded q over the foreground support), not 0
        fg, bg = kmer_distribution(a, 2), kmer_distribution(b, 2)
        pc = min(bg.probabilities().values()) * 0.5
        q = bg.probabilities()
        mass = sum(q.get(w, pc) for w in fg.counts)
        assert kl_divergence(fg, bg, pc) >= -math.log(mass) - 1e-12
        if set(fg.counts) <= set(q):
            assert kl_divergence(fg, bg, pc) >= -1e-12


class TestEMD:
    def test_identical(self):
        assert emd_1d([3, 1, 2], [2, 3, 1]) == 0

    def test_unit(self):
        assert emd_1d([0], [1]) == 1

    def test_pairing(self):
        assert emd_1d([0, 0], [1, 3]) == 2 == brute_force_emd([0, 0], [1, 3])

    def test_unequal_counts(self):
        with pytest.raises(ValueError):
            emd_1d([0, 1], [1])

    def test_matches_brute_force(self, rng):
        for _ in range(30):
            n = int(rng.integers(1, 7))
            a, b = rng.normal(size=n), rng.normal(size=n)
            assert emd_1d(a, b) == pytest.approx(brute_force_emd(a, b), abs=1e-12)

    def test_matches_scipy(self, rng):
        a, b = rng.normal(size=300), rng.normal(0.7, 2, size=300)
        assert emd_1d(a, b) == pytest.approx(scipy.stats.wasserstein_distance(a, b), rel=1e-10)

    @settings(max_examples=100)
    @given(st.integers(1, 12).flatmap(lambda n: st.tuples(
        *[st.lists(st.floats(-100, 100), min_size=n, max_size=n)] * 3)))
    def test_metric_axioms(self, triple):
        a, b, c = triple
        assert emd_1d(a, a) == 0
        assert emd_1d(a, b) == pytest.approx(emd_1d(b, a), abs=1e-9)
        assert emd_1d(a, c) <= emd_1d(a, b) + emd_1d(b, c) + 1e-9


class TestSpearman:
    def test_increasing(self):
        assert spearman_rho([1, 2, 3, 4], [10, 20, 25, 90]) == 1

    def test_reversed(self):
        assert spearman_rho([1, 2, 3], [3, 2, 1]) == -1

    def test_small_case(self):
        # 1 - 6 * (4 + 1 + 1) / (3 * 8)
        assert spearman_rho([1, 2, 3], [3, 1, 2]) == pytest.approx(-0.5)

    def test_ties_match_scipy(self, rng):
        x, y = rng.integers(0, 5, size=40), rng.normal(size=40)
        assert spearman_rho(x, y) == pytest.approx(scipy.stats.spearmanr(x, y)[0], rel=1e-12)

    def test_constant_raises(self):
        with pytest.raises(ValueError, match="constant"):
            spearman_rho([1, 1, 1], [1, 2, 3])

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            spearman_rho([1, 2], [1, 2, 3])

    def test_monotone_invariance(self, rng):
        x, y = rng.normal(size=25), rng.normal(size=25)
        assert spearman_rho(np.exp(x), y ** 3) == pytest.approx(spearman_rho(x, y))
