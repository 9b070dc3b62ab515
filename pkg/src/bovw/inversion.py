"""Descriptor-to-patch inversion and image reconstruction.

The inverter is a ridge regression from (descriptor, bias) to patch pixels:
it minimizes ``sum ||W^T [x; 1] - p||^2 + lambda * ||W||_F^2`` with the bias
row left unregularized.  Inverted patches are drawn back onto a canvas at
their source windows and overlapping contributions are averaged, which is
what reveals how much a codebook smears out.
"""

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .codebook import quantize_batch
from .hog import DEFAULT_HOG, compute_hog_batch
from .image import extract_patches, grid_positions

RESIDUAL_TOLERANCE = 1e-6


class NumericalError(RuntimeError):
    """A linear solve produced an unacceptable residual."""


@dataclass(frozen=True)
class Inverter:
    """Linear map from augmented descriptor space to patch pixel space.

    ``weights`` has shape (dim + 1, patch_size**2); the last row is the bias.
    """

    weights: np.ndarray
    patch_size: int
    ridge_lambda: float

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if not np.isfinite(w).all():
            raise ValueError("inverter weights contain non-finite values")
        if w.ndim != 2 or w.shape[1] != self.patch_size ** 2:
            raise ValueError(
                f"weights shape {w.shape} does not match patch size {self.patch_size}"
            )
        object.__setattr__(self, "weights", w)

    @property
    def dim(self):
        return self.weights.shape[0] - 1


def accumulate_normal_eq(descriptors, patches, xtx=None, xty=None):
    """Add one batch of training pairs to the normal-equation accumulators.

    Returns (xtx, xty, count) where xtx is (dim+1, dim+1) over augmented
    descriptors [x; 1] and xty is (dim+1, pixels).  Start a new accumulation
    by passing xtx=None.
    """
    x = np.atleast_2d(np.asarray(descriptors, dtype=np.float64))
    p = np.asarray(patches, dtype=np.float64).reshape(x.shape[0], -1)
    xa = np.hstack([x, np.ones((x.shape[0], 1))])
    if xtx is None:
        xtx = np.zeros((xa.shape[1], xa.shape[1]))
        xty = np.zeros((xa.shape[1], p.shape[1]))
    xtx += xa.T @ xa
    xty += xa.T @ p
    return xtx, xty, x.shape[0]


def solve_inverter(xtx, xty, ridge_lambda, patch_size):
    """Solve the accumulated ridge system; bias row unregularized.

    Uses a symmetric positive-definite factorization; falls back to
    minimal-norm least squares when the system is rank deficient (legal for
    lambda = 0).  The normal-equation residual is checked on every solve.
    """
    if ridge_lambda < 0:
        raise ValueError("ridge_lambda must be >= 0")
    a = xtx.copy()
    d = a.shape[0] - 1
    a[np.arange(d), np.arange(d)] += ridge_lambda
    try:
        factor = linalg.cho_factor(a)
        weights = linalg.cho_solve(factor, xty)
    except linalg.LinAlgError:
        weights = linalg.lstsq(a, xty, lapack_driver="gelsd")[0]
    denom = linalg.norm(xty)
    residual = linalg.norm(a @ weights - xty) / denom if denom > 0 else 0.0
    if residual > RESIDUAL_TOLERANCE:
        raise NumericalError(f"normal-equation residual {residual:.3e} above {RESIDUAL_TOLERANCE}")
    return Inverter(weights=weights, patch_size=patch_size, ridge_lambda=float(ridge_lambda))


def train_inverter(descriptors, patches, ridge_lambda, patch_size=None):
    """Fit the inverter on (descriptor, patch) training pairs.

    ``patches`` may be (N, S, S) or (N, S*S); all must share one size.
    """
    patches = np.asarray(patches, dtype=np.float64)
    if patch_size is None:
        if patches.ndim != 3 or patches.shape[1] != patches.shape[2]:
            raise ValueError("cannot infer patch size; pass patch_size or (N, S, S) patches")
        patch_size = patches.shape[1]
    x = np.atleast_2d(np.asarray(descriptors, dtype=np.float64))
    if x.shape[0] < 1 or x.shape[0] != patches.shape[0]:
        raise ValueError("need equal, nonzero numbers of descriptors and patches")
    if patches.reshape(x.shape[0], -1).shape[1] != patch_size ** 2:
        raise ValueError("patch pixel count does not match patch_size")
    xtx, xty, _ = accumulate_normal_eq(x, patches)
    return solve_inverter(xtx, xty, ridge_lambda, patch_size)


def select_ridge_lambda(descriptors, patches, grid=(1e-2, 1e-1, 1.0, 10.0),
                        holdout_fraction=0.2, seed=0):
    """Pick the ridge weight with the lowest held-out inversion MSE.

    Returns (best_lambda, {lambda: holdout_mse}).  The split is seeded and at
    least one pair stays on each side.
    """
    x = np.atleast_2d(np.asarray(descriptors, dtype=np.float64))
    p = np.asarray(patches, dtype=np.float64).reshape(x.shape[0], -1)
    n = x.shape[0]
    if n < 2:
        raise ValueError("lambda selection needs at least 2 pairs")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    n_hold = min(max(1, int(round(holdout_fraction * n))), n - 1)
    hold, fit = perm[:n_hold], perm[n_hold:]
    patch_size = int(round(np.sqrt(p.shape[1])))
    xtx, xty, _ = accumulate_normal_eq(x[fit], p[fit])
    scores = {}
    for lam in grid:
        inv = solve_inverter(xtx, xty, lam, patch_size)
        pred = invert_batch(inv, x[hold]).reshape(n_hold, -1)
        scores[lam] = float(np.mean(np.square(pred - p[hold])))
    best = min(grid, key=lambda lam: scores[lam])
    return best, scores


def invert_batch(inv, descriptors):
    """Predicted patches for an (N, dim) descriptor matrix, shape (N, S, S)."""
    x = np.atleast_2d(np.asarray(descriptors, dtype=np.float64))
    if x.shape[1] != inv.dim:
        raise ValueError(f"descriptor dim {x.shape[1]} != inverter dim {inv.dim}")
    flat = x @ inv.weights[:-1] + inv.weights[-1]
    np.clip(flat, 0.0, 1.0, out=flat)
    return flat.reshape(x.shape[0], inv.patch_size, inv.patch_size)


def invert_descriptor(inv, x):
    """The most plausible patch for one descriptor, pixel values in [0, 1]."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("invert_descriptor expects a single descriptor")
    return invert_batch(inv, x[None])[0]


def invert_prototypes(inv, cb):
    """One inverted patch per codebook prototype, shape (k, S, S)."""
    if cb.dim != inv.dim:
        raise ValueError(f"codebook dim {cb.dim} != inverter dim {inv.dim}")
    return invert_batch(inv, cb.prototypes)


def reconstruct(img, grid, inv, hog_cfg=DEFAULT_HOG, cb=None, chunk=2048):
    """Rebuild an image from its dense local descriptors.

    Every grid window is described, optionally quantized against ``cb``
    (pass None for the no-quantization condition), inverted, and drawn back
    at its window.  Overlapping windows are averaged with uniform weight;
    window parts beyond the image border are not painted.  Output dimensions
    equal input dimensions.
    """
    if inv.patch_size != grid.patch_size:
        raise ValueError(
            f"inverter patch size {inv.patch_size} != grid patch size {grid.patch_size}"
        )
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape
    size = grid.patch_size
    corners = grid_positions(w, h, grid)
    accum = np.zeros((h, w))
    weight = np.zeros((h, w))
    for start in range(0, corners.shape[0], chunk):
        batch = corners[start:start + chunk]
        descriptors = compute_hog_batch(extract_patches(img, batch, size), hog_cfg)
        if cb is not None:
            descriptors = cb.prototypes[quantize_batch(descriptors, cb)]
        patches = invert_batch(inv, descriptors)
        for (x0, y0), patch in zip(batch, patches):
            ny = min(size, h - y0)
            nx = min(size, w - x0)
            accum[y0:y0 + ny, x0:x0 + nx] += patch[:ny, :nx]
            weight[y0:y0 + ny, x0:x0 + nx] += 1.0
    covered = weight > 0
    out = np.zeros((h, w))
    out[covered] = accum[covered] / weight[covered]
    return out


def high_freq_energy(img):
    """Mean absolute 3x3 Laplacian response over interior pixels.

    Quantifies how much fine detail a reconstruction retains; averaging many
    overlapping inversions drives it down.
    """
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2 or img.shape[0] < 3 or img.shape[1] < 3:
        raise ValueError("high_freq_energy needs an image of at least 3x3 pixels")
    core = img[1:-1, 1:-1]
    lap = img[:-2, 1:-1] + img[2:, 1:-1] + img[1:-1, :-2] + img[1:-1, 2:] - 4.0 * core
    return float(np.abs(lap).mean())


def save_inverter(path, inv):
    """Write ``BOWG-INV v1 <dim+1> <patch_size>`` + row-major float32 LE weights."""
    from ._binio import write_tagged_floats

    write_tagged_floats(path, "BOWG-INV", (inv.dim + 1, inv.patch_size), inv.weights)


def load_inverter(path):
    from ._binio import read_tagged_floats

    (rows, patch_size), flat = read_tagged_floats(path, "BOWG-INV")
    weights = flat.astype(np.float64).reshape(rows, patch_size ** 2)
    return Inverter(weights=weights, patch_size=patch_size, ridge_lambda=float("nan"))
