"""Codebook learning and hard vector quantization.

kmeans_fit runs Lloyd's algorithm with k-means++ seeding, several restarts,
and deterministic behavior for a fixed seed.  Squared Euclidean distance is
used throughout; nearest-prototype ties resolve to the lowest index.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse


@dataclass(frozen=True)
class KMeansConfig:
    k: int
    max_iterations: int = 100
    restarts: int = 3
    seed: int = 0
    tolerance: float = 1e-6  # relative objective change

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.max_iterations < 1 or self.restarts < 1:
            raise ValueError("max_iterations and restarts must be >= 1")


@dataclass(frozen=True)
class Codebook:
    """k learned prototypes, one per row.

    ``objective`` and ``history`` carry fit diagnostics (final k-means
    objective and the per-iteration objective trace of the winning restart);
    codebooks read back from disk have no history.
    """

    prototypes: np.ndarray
    objective: float = float("nan")
    history: tuple = field(default=(), compare=False)

    def __post_init__(self):
        proto = np.asarray(self.prototypes, dtype=np.float64)
        if proto.ndim != 2 or proto.shape[0] < 1:
            raise ValueError(f"prototypes must be a (k, dim) matrix, got shape {proto.shape}")
        if not np.isfinite(proto).all():
            raise ValueError("prototypes contain non-finite values")
        object.__setattr__(self, "prototypes", proto)

    @property
    def k(self):
        return self.prototypes.shape[0]

    @property
    def dim(self):
        return self.prototypes.shape[1]


def assign_nearest(x, prototypes, chunk=8192):
    """Nearest prototype per row: returns (indices, squared distances).

    Ties go to the lowest prototype index.  Distances use the expanded
    quadratic form in chunks, clipped at zero against rounding.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    prototypes = np.asarray(prototypes, dtype=np.float64)
    if x.shape[1] != prototypes.shape[1]:
        raise ValueError(f"descriptor dim {x.shape[1]} != codebook dim {prototypes.shape[1]}")
    p_sq = np.einsum("ij,ij->i", prototypes, prototypes)
    idx = np.empty(x.shape[0], dtype=np.intp)
    dist = np.empty(x.shape[0])
    for start in range(0, x.shape[0], chunk):
        xb = x[start:start + chunk]
        d = np.einsum("ij,ij->i", xb, xb)[:, None] - 2.0 * (xb @ prototypes.T) + p_sq[None, :]
        best = d.argmin(axis=1)
        idx[start:start + xb.shape[0]] = best
        dist[start:start + xb.shape[0]] = d[np.arange(xb.shape[0]), best]
    np.maximum(dist, 0.0, out=dist)
    return idx, dist


def quantize(x, cb):
    """Index of the nearest prototype for one descriptor (lowest index on ties)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != cb.dim:
        raise ValueError(f"descriptor dim {x.shape} != codebook dim {cb.dim}")
    d = np.square(cb.prototypes - x[None, :]).sum(axis=1)
    return int(d.argmin())


def quantize_batch(x, cb, chunk=8192):
    """Nearest-prototype indices for an (N, dim) descriptor matrix."""
    return assign_nearest(x, cb.prototypes, chunk=chunk)[0]


def bow_histogram(indices, k):
    """Occurrence counts of prototype indices; sum equals len(indices)."""
    indices = np.asarray(indices, dtype=np.intp)
    if indices.size and (indices.min() < 0 or indices.max() >= k):
        raise ValueError(f"prototype index outside [0, {k})")
    return np.bincount(indices, minlength=k).astype(np.int64)


def quantization_distortion(descriptors, cb):
    """Mean squared distance from each descriptor to its assigned prototype."""
    descriptors = np.atleast_2d(np.asarray(descriptors, dtype=np.float64))
    if descriptors.shape[0] == 0:
        raise ValueError("distortion of an empty descriptor set is undefined")
    _, dist = assign_nearest(descriptors, cb.prototypes)
    return float(dist.mean())


def _plus_plus_init(x, k, rng):
    n = x.shape[0]
    centers = np.empty((k, x.shape[1]))
    centers[0] = x[rng.integers(n)]
    d2 = np.square(x - centers[0]).sum(axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total > 0:
            pick = rng.choice(n, p=d2 / total)
        else:
            pick = rng.integers(n)
        centers[j] = x[pick]
        np.minimum(d2, np.square(x - centers[j]).sum(axis=1), out=d2)
    return centers


def _update_means(x, idx, centers, d2):
    k = centers.shape[0]
    counts = np.bincount(idx, minlength=k)
    ones = np.ones(x.shape[0])
    pooling = sparse.csr_matrix((ones, (idx, np.arange(x.shape[0]))), shape=(k, x.shape[0]))
    sums = pooling @ x
    out = centers.copy()
    nonempty = counts > 0
    out[nonempty] = sums[nonempty] / counts[nonempty, None]
    # Re-seed each empty cluster to the point currently farthest from its
    # centroid, consuming points in ascending cluster order.
    if not nonempty.all():
        d2 = d2.copy()
        for j in np.flatnonzero(~nonempty):
            far = int(d2.argmax())
            out[j] = x[far]
            d2[far] = -1.0
    return out


def _lloyd(x, k, max_iterations, tolerance, rng):
    centers = _plus_plus_init(x, k, rng)
    idx, d2 = assign_nearest(x, centers)
    obj = d2.sum()
    history = [obj]
    for _ in range(max_iterations):
        centers = _update_means(x, idx, centers, d2)
        idx, d2 = assign_nearest(x, centers)
        new_obj = d2.sum()
        history.append(new_obj)
        done = (obj - new_obj) <= tolerance * obj
        obj = new_obj
        if done:
            break
    return centers, obj, history


def kmeans_fit(descriptors, cfg):
    """Learn a codebook; best restart by final objective, deterministic per seed."""
    x = np.atleast_2d(np.asarray(descriptors, dtype=np.float64))
    if not np.isfinite(x).all():
        raise ValueError("training descriptors contain non-finite values")
    if x.shape[0] < cfg.k:
        raise ValueError(f"need at least k={cfg.k} descriptors, got {x.shape[0]}")
    best = None
    for restart in range(cfg.restarts):
        rng = np.random.default_rng([cfg.seed, restart])
        centers, obj, history = _lloyd(x, cfg.k, cfg.max_iterations, cfg.tolerance, rng)
        if best is None or obj < best[1]:
            best = (centers, obj, history)
    centers, obj, history = best
    return Codebook(prototypes=centers, objective=float(obj), history=tuple(history))


def save_codebook(path, cb):
    """Write ``BOWG-CB v1 <k> <dim>`` + row-major float32 LE prototypes."""
    from ._binio import write_tagged_floats

    write_tagged_floats(path, "BOWG-CB", (cb.k, cb.dim), cb.prototypes)


def load_codebook(path):
    from ._binio import read_tagged_floats

    (k, dim), flat = read_tagged_floats(path, "BOWG-CB")
    return Codebook(prototypes=flat.astype(np.float64).reshape(k, dim))
