"""Finite-sum binary-classification objectives over partitioned data.

Two component losses on samples (a, l) with l in {-1,+1}:

* ``convex``:    ln(1 + exp(-l <a, x>))        (logistic loss)
* ``nonconvex``: 1 / (1 + exp(l <a, x>))       (sigmoid loss)

Both are evaluated in overflow-safe form; feature vectors are sparse,
decision vectors dense.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.special import expit

OBJECTIVES = ("convex", "nonconvex")


class ParseError(ValueError):
    """Malformed dataset input; carries the offending line number."""

    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


@dataclass(frozen=True)
class Sample:
    """One labelled sparse feature vector (0-based, strictly increasing indices)."""

    indices: np.ndarray
    values: np.ndarray
    label: float

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        val = np.asarray(self.values, dtype=float)
        if idx.shape != val.shape:
            raise ValueError("indices and values must have equal length")
        if idx.size and (np.any(idx < 0) or np.any(np.diff(idx) <= 0)):
            raise ValueError("indices must be non-negative and strictly increasing")
        if not np.all(np.isfinite(val)):
            raise ValueError("feature values must be finite")
        if self.label not in (-1.0, 1.0):
            raise ValueError(f"label must be -1 or +1, got {self.label}")
        idx.setflags(write=False)
        val.setflags(write=False)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", val)
        object.__setattr__(self, "label", float(self.label))


class LocalDataset:
    """One agent's ordered sample list, backed by a CSR matrix for batch work."""

    def __init__(self, samples: list[Sample], dim: int):
        if not samples:
            raise ValueError("a local dataset needs at least one sample")
        for s in samples:
            if s.indices.size and s.indices[-1] >= dim:
                raise ValueError(f"sample index {s.indices[-1]} >= dim {dim}")
        self.samples = tuple(samples)
        self.n = len(samples)
        self.dim = int(dim)
        indptr = np.zeros(self.n + 1, dtype=np.int64)
        for i, s in enumerate(samples):
            indptr[i + 1] = indptr[i] + s.indices.size
        indices = np.concatenate([s.indices for s in samples]) if indptr[-1] else np.zeros(0, dtype=np.int64)
        data = np.concatenate([s.values for s in samples]) if indptr[-1] else np.zeros(0)
        self.a = sparse.csr_matrix((data, indices, indptr), shape=(self.n, dim))
        self.y = np.array([s.label for s in samples])


@dataclass(frozen=True)
class FiniteSumProblem:
    """m local datasets sharing one feature dimension and one objective."""

    locals: tuple[LocalDataset, ...]
    objective: str
    dim: int

    def __post_init__(self):
        if len(self.locals) < 1:
            raise ValueError("need at least one local dataset")
        if self.objective not in OBJECTIVES:
            raise ValueError(f"objective must be one of {OBJECTIVES}")
        for loc in self.locals:
            if loc.dim != self.dim:
                raise ValueError("inconsistent feature dimension across local datasets")
        object.__setattr__(self, "locals", tuple(self.locals))

    @property
    def m(self) -> int:
        return len(self.locals)

    @property
    def total_samples(self) -> int:
        return sum(loc.n for loc in self.locals)


# ---------------------------------------------------------------------------
# Parsing and partitioning
# ---------------------------------------------------------------------------

#: Default raw-label mapping: native {-1,+1} pass through, {1,2}-coded
#: binary datasets map 1 -> +1 and 2 -> -1.
DEFAULT_LABEL_MAP = {1.0: 1.0, -1.0: -1.0, 2.0: -1.0}


def parse_libsvm(source, dim: int | None = None,
                 label_map: dict[float, float] | None = None) -> tuple[list[Sample], int]:
    """Parse LIBSVM/SVMlight text into samples and the feature dimension.

    ``source`` is an iterable of lines (file object or list).  File indices
    are 1-based and must be ascending; they are shifted to 0-based.  The
    inferred dimension is max index + 1 unless ``dim`` overrides it.
    """
    if isinstance(source, str):
        source = source.splitlines()
    mapping = DEFAULT_LABEL_MAP if label_map is None else label_map
    samples: list[Sample] = []
    max_index = -1
    for lineno, line in enumerate(source, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        try:
            raw_label = float(tokens[0])
        except ValueError:
            raise ParseError(lineno, f"unreadable label {tokens[0]!r}") from None
        if raw_label not in mapping:
            raise ParseError(lineno, f"unmappable label {tokens[0]!r}")
        label = mapping[raw_label]
        idx = np.empty(len(tokens) - 1, dtype=np.int64)
        val = np.empty(len(tokens) - 1)
        prev = 0
        for pos, tok in enumerate(tokens[1:]):
            head, sep, tail = tok.partition(":")
            if not sep:
                raise ParseError(lineno, f"malformed feature token {tok!r}")
            try:
                i = int(head)
                v = float(tail)
            except ValueError:
                raise ParseError(lineno, f"malformed feature token {tok!r}") from None
            if i < 1:
                raise ParseError(lineno, f"feature index {i} is not 1-based")
            if i <= prev:
                raise ParseError(lineno, f"non-ascending feature index {i}")
            if not np.isfinite(v):
                raise ParseError(lineno, f"non-finite feature value in {tok!r}")
            prev = i
            idx[pos] = i - 1
            val[pos] = v
        if idx.size:
            max_index = max(max_index, int(idx[-1]))
        samples.append(Sample(indices=idx, values=val, label=label))
    inferred = max_index + 1
    if dim is None:
        dim = inferred
    elif inferred > dim:
        raise ParseError(0, f"feature index {inferred - 1} exceeds the requested dim {dim}")
    return samples, dim


def partition(samples: list[Sample], m: int, strategy: str = "round_robin",
              seed: int = 0, equalize: bool = True,
              dim: int | None = None) -> list[LocalDataset]:
    """Split samples across m agents after a seeded shuffle.

    With ``equalize`` (default) the trailing samples beyond m * floor(N/m)
    are dropped so every agent holds the same count.
    """
    if not samples:
        raise ValueError("cannot partition an empty sample list")
    if m < 1:
        raise ValueError("m must be >= 1")
    if len(samples) < m:
        raise ValueError(f"{len(samples)} samples cannot cover {m} agents")
    if strategy not in ("round_robin", "contiguous"):
        raise ValueError(f"unknown partition strategy {strategy!r}")
    if dim is None:
        dim = max((int(s.indices[-1]) + 1 for s in samples if s.indices.size), default=0)
    order = np.random.default_rng(seed).permutation(len(samples))
    if equalize:
        order = order[: m * (len(samples) // m)]
    if strategy == "round_robin":
        groups = [order[i::m] for i in range(m)]
    else:
        groups = [np.asarray(g) for g in np.array_split(order, m)]
    return [LocalDataset([samples[j] for j in g], dim) for g in groups]


def scale_max_abs(samples: list[Sample]) -> list[Sample]:
    """Per-feature max-abs scaling (optional preprocessing, off by default)."""
    if not samples:
        return []
    dim = max((int(s.indices[-1]) + 1 for s in samples if s.indices.size), default=0)
    colmax = np.zeros(dim)
    for s in samples:
        np.maximum.at(colmax, s.indices, np.abs(s.values))
    colmax[colmax == 0.0] = 1.0
    return [Sample(indices=s.indices, values=s.values / colmax[s.indices], label=s.label)
            for s in samples]


def synthetic_samples(n: int, dim: int, seed: int = 0, noise: float = 0.0) -> list[Sample]:
    """Gaussian features with a planted separator and label-flip noise."""
    if n < 1 or dim < 1:
        raise ValueError("n and dim must be >= 1")
    if not 0.0 <= noise < 1.0:
        raise ValueError("noise must lie in [0,1)")
    rng = np.random.default_rng(seed)
    w_star = rng.standard_normal(dim)
    feats = rng.standard_normal((n, dim))
    labels = np.where(feats @ w_star >= 0.0, 1.0, -1.0)
    flips = rng.random(n) < noise
    labels[flips] = -labels[flips]
    all_idx = np.arange(dim, dtype=np.int64)
    return [Sample(indices=all_idx, values=feats[i], label=labels[i]) for i in range(n)]


# ---------------------------------------------------------------------------
# Losses and gradients
# ---------------------------------------------------------------------------

def _margin(x: np.ndarray, s: Sample) -> float:
    return s.label * float(np.dot(s.values, x[s.indices]))


def component_loss(x: np.ndarray, s: Sample, objective: str) -> float:
    """Loss of a single component function at x."""
    z = _margin(x, s)
    if objective == "convex":
        return float(np.logaddexp(0.0, -z))
    if objective == "nonconvex":
        return float(expit(-z))
    raise ValueError(f"objective must be one of {OBJECTIVES}")


def grad_convex_component(x: np.ndarray, s: Sample) -> np.ndarray:
    """Gradient -l * a * sigmoid(-l<a,x>); nonzero only on the support of a."""
    z = _margin(x, s)
    g = np.zeros_like(x)
    g[s.indices] = -s.label * expit(-z) * s.values
    return g


def grad_nonconvex_component(x: np.ndarray, s: Sample) -> np.ndarray:
    """Gradient -l * a * sigma(1-sigma) with sigma = sigmoid(l<a,x>)."""
    z = _margin(x, s)
    sig = expit(z)
    g = np.zeros_like(x)
    g[s.indices] = -s.label * sig * (1.0 - sig) * s.values
    return g


def grad_component(x: np.ndarray, s: Sample, objective: str) -> np.ndarray:
    if objective == "convex":
        return grad_convex_component(x, s)
    if objective == "nonconvex":
        return grad_nonconvex_component(x, s)
    raise ValueError(f"objective must be one of {OBJECTIVES}")


def _batch_coeff(z: np.ndarray, y: np.ndarray, objective: str) -> np.ndarray:
    # z = y * (A @ x) elementwise; returns per-sample gradient coefficients
    # so that grad = A.T @ coeff / n.
    if objective == "convex":
        return -y * expit(-z)
    if objective == "nonconvex":
        sig = expit(z)
        return -y * sig * (1.0 - sig)
    raise ValueError(f"objective must be one of {OBJECTIVES}")


def batch_gradient(x: np.ndarray, local: LocalDataset, rows: np.ndarray,
                   objective: str) -> np.ndarray:
    """Mean component gradient over the given row subset of one local dataset."""
    a = local.a[rows]
    y = local.y[rows]
    z = y * (a @ x)
    return (a.T @ _batch_coeff(z, y, objective)) / len(y)


def full_local_gradient(x: np.ndarray, local: LocalDataset, objective: str,
                        counter=None) -> np.ndarray:
    """Mean gradient over all local samples; bumps counter.ifo by n if given."""
    z = local.y * (local.a @ x)
    if counter is not None:
        counter.ifo += local.n
    return (local.a.T @ _batch_coeff(z, local.y, objective)) / local.n


def local_loss(x: np.ndarray, local: LocalDataset, objective: str) -> float:
    z = local.y * (local.a @ x)
    if objective == "convex":
        return float(np.mean(np.logaddexp(0.0, -z)))
    return float(np.mean(expit(-z)))


def global_loss(x: np.ndarray, problem: FiniteSumProblem) -> float:
    """F(x) = (1/m) sum_i f_i(x); evaluation-only, not an algorithmic oracle."""
    return sum(local_loss(x, loc, problem.objective) for loc in problem.locals) / problem.m


def global_gradient(x: np.ndarray, problem: FiniteSumProblem) -> np.ndarray:
    """Exact gradient of F at x; evaluation-only."""
    g = np.zeros_like(x)
    for loc in problem.locals:
        g += full_local_gradient(x, loc, problem.objective)
    return g / problem.m
