"""Mathematical primitives shared by the simulator and the analysis pipeline.

Category vectors (article topics and user interests) are plain numpy float
arrays. All functions here are pure; RngStream instances are single-owner.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "normalize",
    "evaluate",
    "entropy",
    "simpson",
    "argmax_category",
    "RngStream",
]

NORM_TOL = 1e-9


def normalize(v) -> np.ndarray:
    """Scale a non-negative vector so its entries sum to 1."""
    v = np.asarray(v, dtype=np.float64)
    if v.size == 0:
        raise ValueError("cannot normalize an empty vector")
    if np.any(v < 0):
        raise ValueError("category vector entries must be non-negative")
    total = v.sum()
    if total <= 0.0:
        raise ValueError("degenerate vector: all entries are zero")
    return v / total


def is_normalized(v, tol: float = NORM_TOL) -> bool:
    v = np.asarray(v, dtype=np.float64)
    return bool(v.size and np.all(v >= 0) and abs(v.sum() - 1.0) <= tol)


def evaluate(u, a) -> float:
    """Evaluation of an article against a user interest: the dot product.

    Both vectors are expected normalized, which bounds the result to [0, 1].
    """
    u = np.asarray(u, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    if u.shape != a.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {a.shape}")
    return float(u @ a)


def entropy(p) -> float:
    """Shannon entropy in bits of a normalized distribution, with 0*log0 = 0."""
    p = np.asarray(p, dtype=np.float64)
    if not is_normalized(p):
        raise ValueError("entropy requires a normalized distribution")
    nz = p[p > 0.0]
    return float(-(nz * np.log2(nz)).sum())


def entropy_rows(mat: np.ndarray) -> np.ndarray:
    """Row-wise entropy in bits for a matrix of normalized distributions."""
    mat = np.asarray(mat, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(mat > 0.0, mat * np.log2(np.where(mat > 0.0, mat, 1.0)), 0.0)
    return -terms.sum(axis=-1)


def simpson(a, b) -> float:
    """Simpson overlap coefficient |A∩B| / min(|A|,|B|); 0 when either is empty."""
    sa, sb = set(a), set(b)
    if not sa or not sb:
        return 0.0
    return len(sa & sb) / min(len(sa), len(sb))


def argmax_category(v) -> int:
    """Index of the largest entry; ties go to the lowest index."""
    v = np.asarray(v)
    if v.size == 0:
        raise ValueError("argmax of an empty vector")
    return int(np.argmax(v))


class RngStream:
    """Deterministic random stream keyed by (seed, stream id).

    Equal (seed, stream) pairs produce identical draw sequences on any
    platform; distinct stream ids give statistically independent streams.
    One stream per (run, user) keeps parallel execution reproducible.
    """

    def __init__(self, seed: int, stream: int = 0):
        self.seed = int(seed)
        self.stream = int(stream)
        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream,))
        self._gen = np.random.Generator(np.random.PCG64(seq))

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream={self.stream})"

    def random(self, size=None):
        return self._gen.random(size)

    def uniform(self, low=0.0, high=1.0, size=None):
        return self._gen.uniform(low, high, size)

    def integers(self, low, high=None, size=None):
        return self._gen.integers(low, high, size)

    def choice(self, a, size=None, replace=True):
        return self._gen.choice(a, size=size, replace=replace)

    def permutation(self, x):
        return self._gen.permutation(x)

    def dirichlet(self, alpha, size=None):
        return self._gen.dirichlet(alpha, size)
