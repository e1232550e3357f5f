"""Compact convex constraint sets exposing a linear minimization oracle."""

from __future__ import annotations

from abc import ABC, abstractmethod

import numpy as np


class ConstraintSet(ABC):
    """Interface: lmo(direction) -> vertex, Euclidean diameter, membership."""

    @abstractmethod
    def lmo(self, direction: np.ndarray) -> np.ndarray:
        """argmin over the set of <u, direction>."""

    @abstractmethod
    def diameter(self) -> float:
        """max ||x - y|| over pairs in the set."""

    @abstractmethod
    def contains(self, x: np.ndarray, tol: float = 1e-9) -> bool:
        """Membership test with tolerance."""


def lmo_l1(g: np.ndarray, radius: float) -> np.ndarray:
    """Closed-form l1-ball LMO: -R * sgn(g[j]) * e_j at j = argmax |g|.

    Ties break to the lowest index; a zero direction returns the zero
    vector (any feasible point is a minimizer of <u, 0>).
    """
    g = np.asarray(g, dtype=float)
    if radius <= 0:
        raise ValueError("radius must be positive")
    if not np.all(np.isfinite(g)):
        raise ValueError("direction contains NaN or Inf")
    u = np.zeros_like(g)
    j = int(np.argmax(np.abs(g)))
    if g[j] != 0.0:
        u[j] = -radius * np.sign(g[j])
    return u


def diameter_l1(radius: float) -> float:
    """Euclidean diameter 2R, attained at antipodal vertices."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    return 2.0 * radius


def contains_l1(x: np.ndarray, radius: float, tol: float = 0.0) -> bool:
    if tol < 0:
        raise ValueError("tol must be >= 0")
    return float(np.sum(np.abs(x))) <= radius + tol


class L1Ball(ConstraintSet):
    """l1-norm ball {x : ||x||_1 <= R} in a fixed dimension."""

    def __init__(self, radius: float, dim: int):
        if radius <= 0:
            raise ValueError("radius must be positive")
        if dim < 1:
            raise ValueError("dim must be >= 1")
        self.radius = float(radius)
        self.dim = int(dim)

    def lmo(self, direction: np.ndarray) -> np.ndarray:
        return lmo_l1(direction, self.radius)

    def diameter(self) -> float:
        return diameter_l1(self.radius)

    def contains(self, x: np.ndarray, tol: float = 1e-9) -> bool:
        return contains_l1(x, self.radius, tol)

    def __repr__(self):
        return f"L1Ball(radius={self.radius}, dim={self.dim})"
