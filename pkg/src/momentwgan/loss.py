"""Wasserstein critic loss, the higher-moment generator loss and weight clipping."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad


@dataclass(frozen=True)
class MomentSummary:
    mu1: float
    central: tuple = field(default_factory=tuple)  # mu_2 ... mu_m

    def moment(self, j: int) -> float:
        if j == 1:
            return self.mu1
        return self.central[j - 2]


@dataclass(frozen=True)
class LossConfig:
    m: int = 1
    tau: float = 0.01

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise ValueError(f"number of moments must be an integer >= 1, got {self.m}")
        if not self.tau > 0:
            raise ValueError(f"clip bound tau must be positive, got {self.tau}")


def central_moments(values, m: int) -> MomentSummary:
    """Raw mean plus central moments ``mean((x - mean)**j)`` for j = 2..m."""
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    x = np.asarray(values, dtype=np.float64).ravel()
    if x.size == 0:
        raise ValueError("central_moments: empty input")
    mu1 = float(x.mean())
    centered = x - mu1
    power = centered.copy()
    central = []
    for _ in range(2, m + 1):
        power = power * centered
        central.append(float(power.mean()))
    return MomentSummary(mu1, tuple(central))


def _vector(preds, name):
    node = ad.as_node(preds)
    if node.value.size == 0:
        raise ValueError(f"{name} is empty")
    return ad.reshape(node, (node.value.size,))


def critic_loss(preds_real, preds_gen) -> ad.Node:
    """mean(f(generated)) - mean(f(real)); minimising pushes real scores up."""
    real = _vector(preds_real, "preds_real")
    gen = _vector(preds_gen, "preds_gen")
    return ad.mean(gen) - ad.mean(real)


def _graph_moments(preds, m):
    mu1 = ad.mean(preds)
    centered = preds - mu1
    return mu1, [ad.mean(ad.power_int(centered, j)) for j in range(2, m + 1)]


def generator_loss(preds_real, preds_gen, m: int) -> ad.Node:
    """Generator loss over critic scores.

    For ``m == 1`` this is the standard ``-mean(f(generated))``.  For ``m > 1``
    it is the signed first-moment gap ``mean(real) - mean(gen)`` plus
    ``|mu_j(gen) - mu_j(real)|`` for each central moment j = 2..m.  Real-batch
    statistics are constants: no gradient reaches ``preds_real``.
    """
    if int(m) != m or m < 1:
        raise ValueError(f"m must be an integer >= 1, got {m}")
    gen = _vector(preds_gen, "preds_gen")
    if m == 1:
        return -ad.mean(gen)
    real = central_moments(ad.as_node(preds_real).value, m)
    mean_gen, central_gen = _graph_moments(gen, m)
    loss = real.mu1 - mean_gen
    for j, mu_gen in enumerate(central_gen, start=2):
        loss = loss + ad.abs_(mu_gen - real.moment(j))
    return loss


def signed_first_moment(preds_real, preds_gen) -> float:
    return float(np.mean(ad.as_node(preds_real).value) - np.mean(ad.as_node(preds_gen).value))


def clip_params(params, tau: float):
    """Clamp every parameter entry into [-tau, tau] in place."""
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    for node in params:
        np.clip(node.value, -tau, tau, out=node.value)
    return params
