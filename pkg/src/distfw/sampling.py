"""Epoch structure and per-iteration sample sizes for variance reduction.

Iterations k with mod(k+1, q) = 0 refresh the estimator with a full local
gradient; every other iteration draws a sample set whose size shrinks with
the step size.  Sizes are anchored at q^2 on each epoch's closing iterate
and grown backwards by the exact ratio gamma_k^2 / gamma_{k+1}^2, rounding
up at each step so the inequality

    gamma_k / sqrt(|S^k|) <= gamma_{k+1} / sqrt(|S^{k+1}|)

holds without slack.  (Rounding the closed-form value per iteration instead
can break the inequality by ~1e-4 once sizes exceed ~100.)
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np


class RefreshIterationError(ValueError):
    """A sample set was requested for a full-gradient refresh iteration."""


def _iroot(n: int, r: int) -> int:
    """floor(n ** (1/r)) computed exactly for positive integers."""
    q = int(round(n ** (1.0 / r)))
    while q > 0 and q ** r > n:
        q -= 1
    while (q + 1) ** r <= n:
        q += 1
    return q


def epoch_length(n_local: int, mode: str) -> int:
    """Epoch q: floor(n^(1/4)) convex, floor(n^(1/3)) non-convex, floored at 2."""
    if n_local < 1:
        raise ValueError("n_local must be >= 1")
    if mode == "convex":
        return max(2, _iroot(n_local, 4))
    if mode == "nonconvex":
        return max(2, _iroot(n_local, 3))
    raise ValueError(f"mode must be 'convex' or 'nonconvex', got {mode!r}")


def is_refresh(k: int, q: int) -> bool:
    """True when iteration k computes the full local gradient for v^(k+1)."""
    return (k + 1) % q == 0


def anchor_iteration(k: int, q: int) -> int:
    """The epoch-closing iterate nq-1 whose nominal size q^2 anchors k's size."""
    return math.ceil((k + 1) / q) * q - 1


def raw_sample_size(k: int, q: int, gamma: Callable[[int], float]) -> int:
    """Uncapped sample size at iteration k under the given step schedule."""
    if k < 1:
        raise ValueError("iterations are 1-based")
    if q < 2:
        raise ValueError("epoch length must be >= 2")
    size = q * q
    for t in range(anchor_iteration(k, q) - 1, k - 1, -1):
        ratio = gamma(t) / gamma(t + 1)
        size = math.ceil(size * ratio * ratio)
    return size


def sample_size(k: int, q: int, gamma: Callable[[int], float], n_local: int) -> int:
    """Sample size at iteration k, capped at the local sample count."""
    return min(n_local, raw_sample_size(k, q, gamma))


def draw_sample_set(rng: np.random.Generator, n_local: int, size: int) -> np.ndarray:
    """Uniform without-replacement draw of `size` indices from [0, n_local)."""
    if not 1 <= size <= n_local:
        raise ValueError(f"sample size {size} outside [1, {n_local}]")
    return np.sort(rng.choice(n_local, size=size, replace=False))


class SamplingSchedule:
    """Rule-based schedule: q^2-anchored shrinking sizes, full refresh each epoch."""

    def __init__(self, q: int, gamma: Callable[[int], float], n_local: int):
        if q < 2:
            raise ValueError("epoch length must be >= 2")
        if n_local < 1:
            raise ValueError("n_local must be >= 1")
        self.q = q
        self.gamma = gamma
        self.n_local = n_local

    def is_refresh(self, k: int) -> bool:
        return is_refresh(k, self.q)

    def size(self, k: int) -> int:
        return sample_size(k, self.q, self.gamma, self.n_local)

    def raw_size(self, k: int) -> int:
        return raw_sample_size(k, self.q, self.gamma)

    def draw(self, k: int, rng: np.random.Generator) -> np.ndarray:
        if self.is_refresh(k):
            raise RefreshIterationError(
                f"iteration {k} refreshes with the full local gradient; no sample set is drawn")
        return draw_sample_set(rng, self.n_local, self.size(k))


class FullBatchSchedule(SamplingSchedule):
    """Degenerate schedule forcing |S^k| = n_local on every sampled iteration."""

    def __init__(self, q: int, n_local: int):
        super().__init__(q, lambda k: 1.0, n_local)

    def size(self, k: int) -> int:
        return self.n_local

    def raw_size(self, k: int) -> int:
        return self.n_local
