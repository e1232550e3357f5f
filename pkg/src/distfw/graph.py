"""Multi-agent topologies and doubly-stochastic mixing matrices."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

#: Tolerances enforced on every constructed mixing matrix.
STOCHASTICITY_TOL = 1e-12
SYMMETRY_TOL = 1e-15


class SpectrumError(RuntimeError):
    """Power iteration failed to stabilize within the iteration cap."""


def _normalize_edges(edges, m: int) -> frozenset[tuple[int, int]]:
    seen = set()
    for e in edges:
        i, j = e
        if i == j:
            raise ValueError(f"self-loop on agent {i} is not allowed")
        if not (0 <= i < m and 0 <= j < m):
            raise ValueError(f"edge {{{i},{j}}} references an agent outside [0,{m})")
        key = (min(i, j), max(i, j))
        if key in seen:
            raise ValueError(f"duplicate edge {{{key[0]},{key[1]}}}")
        seen.add(key)
    return frozenset(seen)


def _is_connected(m: int, edges: frozenset[tuple[int, int]]) -> bool:
    if m <= 1:
        return True
    adj: list[list[int]] = [[] for _ in range(m)]
    for i, j in edges:
        adj[i].append(j)
        adj[j].append(i)
    seen = {0}
    stack = [0]
    while stack:
        for nb in adj[stack.pop()]:
            if nb not in seen:
                seen.add(nb)
                stack.append(nb)
    return len(seen) == m


@dataclass(frozen=True)
class Topology:
    """Connected undirected graph over agents 0..m-1."""

    m: int
    edges: frozenset[tuple[int, int]] = field(default_factory=frozenset)

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("agent count must be >= 1")
        object.__setattr__(self, "edges", _normalize_edges(self.edges, self.m))
        if not _is_connected(self.m, self.edges):
            raise ValueError(f"graph over {self.m} agents is not connected")

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.m, dtype=int)
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg

    def neighbors(self, i: int) -> list[int]:
        return sorted(j if a == i else a for a, j in self.edges if i in (a, j))


@dataclass(frozen=True)
class MixingMatrix:
    """Symmetric doubly-stochastic weights with spectral-gap certificate."""

    w: np.ndarray
    lambda2: float

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float)
        w.setflags(write=False)
        object.__setattr__(self, "w", w)
        m = w.shape[0]
        if w.shape != (m, m):
            raise ValueError("mixing matrix must be square")
        if np.any(w < 0):
            raise ValueError("mixing matrix entries must be non-negative")
        if np.max(np.abs(w - w.T)) > SYMMETRY_TOL:
            raise ValueError("mixing matrix must be symmetric")
        ones = np.ones(m)
        if np.max(np.abs(w @ ones - ones)) > STOCHASTICITY_TOL:
            raise ValueError("row sums must equal 1")
        if np.max(np.abs(w.T @ ones - ones)) > STOCHASTICITY_TOL:
            raise ValueError("column sums must equal 1")
        if not 0.0 <= self.lambda2 < 1.0:
            raise ValueError(f"lambda2={self.lambda2} violates the spectral-gap requirement lambda2 < 1")

    @property
    def m(self) -> int:
        return self.w.shape[0]


def build_topology(kind: str, m: int, seed: int = 0, p: float | None = None,
                   edges=None) -> Topology:
    """Construct a connected topology of the given kind.

    Supported kinds: ring, path, complete, ring_chords, erdos_renyi (needs
    ``p``), custom (needs ``edges``).  erdos_renyi redraws with an
    incremented seed until the sample is connected.
    """
    if m < 1:
        raise ValueError("agent count must be >= 1")
    if kind == "ring":
        if m == 1:
            return Topology(1, frozenset())
        e = {(i, (i + 1) % m) for i in range(m)}
        return Topology(m, frozenset(_canon(e)))
    if kind == "path":
        return Topology(m, frozenset((i, i + 1) for i in range(m - 1)))
    if kind == "complete":
        return Topology(m, frozenset((i, j) for i in range(m) for j in range(i + 1, m)))
    if kind == "ring_chords":
        # Ring plus m//2 diameters: the documented stand-in for dense-ish
        # small networks used in reproduction runs.
        if m == 1:
            return Topology(1, frozenset())
        e = {(i, (i + 1) % m) for i in range(m)}
        e |= {(i, i + m // 2) for i in range(m // 2) if m // 2 >= 2}
        return Topology(m, frozenset(_canon(e)))
    if kind == "erdos_renyi":
        if p is None or not 0.0 < p <= 1.0:
            raise ValueError("erdos_renyi requires p in (0,1]")
        for attempt in range(100):
            rng = np.random.default_rng(seed + attempt)
            e = {(i, j) for i in range(m) for j in range(i + 1, m)
                 if rng.random() < p}
            if _is_connected(m, frozenset(e)):
                return Topology(m, frozenset(e))
        raise ValueError(f"no connected Erdos-Renyi sample with p={p} after 100 attempts")
    if kind == "custom":
        if edges is None:
            raise ValueError("custom topology requires an edge list")
        return Topology(m, frozenset(tuple(e) for e in edges))
    raise ValueError(f"unknown topology kind {kind!r}")


def _canon(edges):
    return {(min(i, j), max(i, j)) for i, j in edges}


def load_edge_list(path, m: int) -> Topology:
    """Load a custom topology from a text file of "i j" pairs (0-based)."""
    edges = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'i j', got {line!r}")
            try:
                i, j = int(parts[0]), int(parts[1])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: non-integer agent id in {line!r}") from exc
            edges.append((i, j))
    return build_topology("custom", m, edges=edges)


def metropolis_weights(t: Topology) -> MixingMatrix:
    """Metropolis-Hastings weights: symmetric, doubly stochastic, lambda2 < 1."""
    m = t.m
    w = np.zeros((m, m))
    deg = t.degrees()
    for i, j in t.edges:
        w[i, j] = w[j, i] = 1.0 / (1.0 + max(deg[i], deg[j]))
    np.fill_diagonal(w, 1.0 - w.sum(axis=1))
    lam2 = 0.0 if m == 1 else second_eigenvalue(w)
    return MixingMatrix(w=w, lambda2=lam2)


def second_eigenvalue(w, tol: float = 1e-10, max_iter: int = 100_000) -> float:
    """Modulus of the largest eigenvalue of ``w`` orthogonal to the all-ones vector.

    Accepts a square array or a MixingMatrix.  Power iteration on the
    consensus-deflated matrix W - (1/m) * ones; the norm-ratio estimate is
    monotone for symmetric matrices, so stabilization within ``tol``
    certifies convergence.
    """
    w = np.asarray(getattr(w, "w", w), dtype=float)
    m = w.shape[0]
    if m == 1:
        return 0.0
    b = w - 1.0 / m
    rng = np.random.default_rng(0)
    x = rng.standard_normal(m)
    x -= x.mean()
    x /= np.linalg.norm(x)
    est = 0.0
    for _ in range(max_iter):
        y = b @ x
        new_est = float(np.linalg.norm(y))
        if new_est < 1e-300:
            return 0.0
        x = y / new_est
        x -= x.mean()
        if abs(new_est - est) <= tol:
            return new_est
        est = new_est
    raise SpectrumError(
        f"power iteration did not stabilize within {max_iter} iterations "
        f"(last estimate {est:.3e}); spectrum is ill-conditioned")


def k0_alpha(lambda2: float, alpha: float, cap: int = 10_000_000) -> int:
    """Smallest k0 >= 1 with lambda2 <= (k0/(k0+1))^alpha / (1 + k0^-alpha).

    Diagnostic for the consensus-contraction onset; linear scan is finite
    because the right-hand side increases to 1.
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must lie in (0,1]")
    if not 0.0 <= lambda2 < 1.0:
        raise ValueError(f"lambda2={lambda2} must lie in [0,1)")
    for k0 in range(1, cap):
        rhs = (k0 / (k0 + 1.0)) ** alpha / (1.0 + k0 ** (-alpha))
        if lambda2 <= rhs:
            return k0
    raise SpectrumError(f"k0({alpha}) exceeds {cap} for lambda2={lambda2}")
