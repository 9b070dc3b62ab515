"""Felzenszwalb-style HOG descriptors for square grayscale patches.

Each patch is divided into ``cells_per_side x cells_per_side`` cells.  Every
pixel votes its gradient magnitude into the two nearest of 18 signed
orientation bins (linear interpolation on the circle), gradients being
centered differences with replicated borders.  Per cell the descriptor
carries 32 channels:

* 18 contrast-sensitive orientation channels,
* 9 contrast-insensitive channels (opposite orientations folded together),
* 4 normalization/energy channels, one per 2x2 cell block containing the cell,
* 1 constant-zero padding channel.

Each channel is block-normalized against the gradient energy of the four
2x2 cell neighborhoods (missing neighbors count as zero energy, epsilon
regularizes the denominator) and truncated at 0.2.  With the default 4x4
cell layout the descriptor has 4 * 4 * 32 = 512 dimensions regardless of
patch size.
"""

from dataclasses import dataclass

import numpy as np

from .image import extract_patches, grid_positions

# Weight of the four energy channels, from the HOG lineage this variant follows.
ENERGY_SCALE = 0.2357

CHANNELS_EXTRA = 5  # 4 energy channels + 1 zero padding channel


@dataclass(frozen=True)
class HogConfig:
    cells_per_side: int = 4
    bins_sensitive: int = 18
    bins_insensitive: int = 9
    truncation: float = 0.2
    epsilon: float = 1e-4

    def __post_init__(self):
        if self.bins_sensitive != 2 * self.bins_insensitive:
            raise ValueError("bins_sensitive must be exactly twice bins_insensitive")
        if self.cells_per_side < 1:
            raise ValueError("cells_per_side must be >= 1")

    @property
    def channels_per_cell(self):
        return self.bins_sensitive + self.bins_insensitive + CHANNELS_EXTRA

    @property
    def dim(self):
        return self.cells_per_side ** 2 * self.channels_per_cell


DEFAULT_HOG = HogConfig()


def compute_hog(patch, cfg=DEFAULT_HOG):
    """Descriptor of a single square patch; see the module docstring."""
    patch = np.asarray(patch, dtype=np.float64)
    if patch.ndim != 2 or patch.shape[0] != patch.shape[1]:
        raise ValueError(f"expected a square patch, got shape {patch.shape}")
    return compute_hog_batch(patch[None], cfg)[0]


def compute_hog_batch(patches, cfg=DEFAULT_HOG):
    """Descriptors for a stack of patches, shape (N, S, S) -> (N, dim)."""
    patches = np.asarray(patches, dtype=np.float64)
    n, side = patches.shape[0], patches.shape[1]
    cells = cfg.cells_per_side
    if side % cells != 0:
        raise ValueError(f"patch side {side} not divisible by {cells} cells per side")
    if n == 0:
        return np.zeros((0, cfg.dim))
    bins = cfg.bins_sensitive

    idx = np.arange(side)
    gx = patches[:, :, np.minimum(idx + 1, side - 1)] - patches[:, :, np.maximum(idx - 1, 0)]
    gy = patches[:, np.minimum(idx + 1, side - 1), :] - patches[:, np.maximum(idx - 1, 0), :]
    mag = np.hypot(gx, gy)

    # Soft assignment to the two nearest orientation-bin centers on the circle.
    pos = (np.arctan2(gy, gx) % (2.0 * np.pi)) * (bins / (2.0 * np.pi))
    lower = np.floor(pos)
    frac = pos - lower
    b0 = lower.astype(np.intp) % bins
    b1 = (b0 + 1) % bins

    csize = side // cells
    cell_of = (idx // csize)
    cell_idx = cell_of[:, None] * cells + cell_of[None, :]
    base = (np.arange(n, dtype=np.intp)[:, None, None] * (cells * cells) + cell_idx) * bins
    total = n * cells * cells * bins
    hist = np.bincount((base + b0).ravel(), weights=(mag * (1.0 - frac)).ravel(), minlength=total)
    hist += np.bincount((base + b1).ravel(), weights=(mag * frac).ravel(), minlength=total)
    hist = hist.reshape(n, cells, cells, bins)

    folded = hist[..., :cfg.bins_insensitive] + hist[..., cfg.bins_insensitive:]
    energy = np.square(folded).sum(axis=-1)

    # Energy of each 2x2 cell block; cells outside the patch contribute zero.
    padded = np.pad(energy, ((0, 0), (1, 1), (1, 1)))
    blocks = padded[:, :-1, :-1] + padded[:, :-1, 1:] + padded[:, 1:, :-1] + padded[:, 1:, 1:]
    inv = 1.0 / np.sqrt(blocks + cfg.epsilon)
    norms = np.stack(
        [inv[:, :-1, :-1], inv[:, :-1, 1:], inv[:, 1:, :-1], inv[:, 1:, 1:]], axis=-1
    )  # (n, cells, cells, 4): up-left, up-right, down-left, down-right blocks

    tau = cfg.truncation
    sens = np.minimum(hist[..., None] * norms[..., None, :], tau)
    insens = np.minimum(folded[..., None] * norms[..., None, :], tau)
    feat_sens = 0.5 * sens.sum(axis=-1)
    feat_insens = 0.5 * insens.sum(axis=-1)
    feat_energy = ENERGY_SCALE * sens.sum(axis=-2)
    zero = np.zeros(feat_energy.shape[:-1] + (1,))

    out = np.concatenate([feat_sens, feat_insens, feat_energy, zero], axis=-1)
    return out.reshape(n, cfg.dim)


def dense_hog(img, grid, cfg=DEFAULT_HOG, chunk=2048):
    """Descriptors for every grid window of an image, shape (N, dim).

    Rows follow grid_positions order; overhanging windows are zero-padded
    exactly as extract_patch does.
    """
    img = np.asarray(img, dtype=np.float64)
    corners = grid_positions(img.shape[1], img.shape[0], grid)
    out = np.empty((corners.shape[0], cfg.dim))
    for start in range(0, corners.shape[0], chunk):
        batch = corners[start:start + chunk]
        patches = extract_patches(img, batch, grid.patch_size)
        out[start:start + batch.shape[0]] = compute_hog_batch(patches, cfg)
    return out


def save_descriptors(path, descriptors):
    """Write a descriptor set: ``BOWG-DESC v1 <count> <dim>`` + float32 LE rows."""
    from ._binio import write_tagged_floats

    descriptors = np.atleast_2d(np.asarray(descriptors))
    write_tagged_floats(path, "BOWG-DESC", descriptors.shape, descriptors)


def load_descriptors(path):
    from ._binio import read_tagged_floats

    (count, dim), flat = read_tagged_floats(path, "BOWG-DESC")
    return flat.astype(np.float64).reshape(count, dim)
