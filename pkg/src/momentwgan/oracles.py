"""Slow, independent reference computations used to check the fast paths."""

from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np

from . import autodiff as ad


def numerical_gradient(fn, array: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central differences of scalar ``fn()`` w.r.t. ``array``, perturbed in place."""
    grad = np.zeros_like(array, dtype=np.float64)
    flat, gflat = array.reshape(-1), grad.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + h
        up = float(fn())
        flat[i] = old - h
        down = float(fn())
        flat[i] = old
        gflat[i] = (up - down) / (2 * h)
    return grad


def relative_error(a, b, floor: float = 1e-10) -> float:
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    scale = max(np.linalg.norm(a), np.linalg.norm(b), floor)
    return float(np.linalg.norm(a - b) / scale)


def gradient_check(build, leaves, h: float = 1e-5) -> float:
    """Worst relative error between backward() and central differences.

    ``build()`` must construct a fresh scalar graph from ``leaves`` (trainable
    nodes); leaf values are perturbed in place while differencing.
    """
    for leaf in leaves:
        leaf.zero_grad()
    ad.backward(build())
    worst = 0.0
    for leaf in leaves:
        analytic = leaf.grad if leaf.grad is not None else np.zeros_like(leaf.value)
        numeric = numerical_gradient(lambda: build().item(), leaf.value, h)
        worst = max(worst, relative_error(analytic, numeric))
    return worst


def exact_central_moments(values, m: int):
    """(mu1, [mu_2..mu_m]) by exact rational summation of the float inputs."""
    xs = [Fraction(float(v)) for v in np.asarray(values).ravel()]
    if not xs:
        raise ValueError("empty input")
    n = len(xs)
    mu1 = sum(xs) / n
    centered = [x - mu1 for x in xs]
    return mu1, [sum(c ** j for c in centered) / n for j in range(2, m + 1)]


def brute_force_emd(a, b) -> float:
    """Optimal matching cost over all permutations; only for tiny samples."""
    a, b = list(map(float, a)), list(map(float, b))
    if len(a) != len(b):
        raise ValueError("unequal sample counts")
    best = math.inf
    for perm in itertools.permutations(range(len(b))):
        best = min(best, sum(abs(a[i] - b[j]) for i, j in enumerate(perm)))
    return best / len(a)


def direct_kl(p: dict, q: dict, pseudocount: float) -> float:
    """Sum over the foreground's support of p ln(p / q), q defaulting to the pseudocount."""
    return math.fsum(pv * math.log(pv / q.get(w, pseudocount)) for w, pv in p.items() if pv > 0)
