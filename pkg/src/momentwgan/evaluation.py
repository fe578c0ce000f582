"""Sequence-quality and distribution metrics."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .data import END, START

DEFAULT_PSEUDOCOUNT = 1e-10


@dataclass
class KmerDistribution:
    k: int
    counts: Counter = field(default_factory=Counter)

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def __len__(self):
        return len(self.counts)

    def probability(self, word: str) -> float:
        total = self.total
        return self.counts.get(word, 0) / total if total else 0.0

    def probabilities(self) -> dict:
        total = self.total
        return {w: c / total for w, c in self.counts.items()}


def kmer_distribution(sequences, k: int) -> KmerDistribution:
    """Count overlapping k-length windows; windows touching a framing symbol are skipped."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    counts = Counter()
    for seq in sequences:
        for i in range(len(seq) - k + 1):
            word = seq[i:i + k]
            if START in word or END in word:
                continue
            counts[word] += 1
    return KmerDistribution(k, counts)


def kl_divergence(foreground: KmerDistribution, background: KmerDistribution,
                  pseudocount: float = DEFAULT_PSEUDOCOUNT) -> float:
    """KL(foreground || background) in nats.

    Words missing from the background support get probability ``pseudocount``.
    """
    if foreground.k != background.k:
        raise ValueError(f"k mismatch: {foreground.k} vs {background.k}")
    if foreground.total == 0:
        raise ValueError("foreground distribution has no k-mers")
    q = background.probabilities()
    total = 0.0
    for word, p in foreground.probabilities().items():
        total += p * math.log(p / q.get(word, pseudocount))
    return total


def emd_1d(samples_a, samples_b) -> float:
    """Exact earth mover's distance between two equal-size 1-D empirical samples."""
    a = np.sort(np.asarray(samples_a, dtype=np.float64).ravel())
    b = np.sort(np.asarray(samples_b, dtype=np.float64).ravel())
    if a.size != b.size:
        raise ValueError(f"emd_1d needs equal sample counts, got {a.size} and {b.size}")
    if a.size == 0:
        raise ValueError("emd_1d: empty samples")
    return float(np.mean(np.abs(a - b)))


def rankdata(x) -> np.ndarray:
    """Ranks starting at 1, ties receiving the average rank."""
    x = np.asarray(x, dtype=np.float64)
    order = np.argsort(x, kind="mergesort")
    ranks = np.empty(len(x))
    sorted_x = x[order]
    i = 0
    while i < len(x):
        j = i
        while j + 1 < len(x) and sorted_x[j + 1] == sorted_x[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2 + 1
        i = j + 1
    return ranks


def spearman_rho(xs, ys) -> float:
    xs, ys = np.asarray(xs, dtype=np.float64), np.asarray(ys, dtype=np.float64)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise ValueError(f"spearman_rho needs two equal-length vectors, got {xs.shape} and {ys.shape}")
    if xs.size < 2:
        raise ValueError("spearman_rho needs at least two points")
    rx, ry = rankdata(xs), rankdata(ys)
    rx -= rx.mean()
    ry -= ry.mean()
    denom = math.sqrt(float(rx @ rx) * float(ry @ ry))
    if denom == 0:
        raise ValueError("spearman_rho is undefined for a constant vector")
    return float(np.clip(rx @ ry / denom, -1.0, 1.0))
