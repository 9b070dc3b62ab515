"""Grayscale image handling and dense-grid patch geometry.

Images are plain 2-d float64 arrays with intensities in [0, 1], row-major
(``img[y, x]``).  Patches are extracted on a regular grid anchored at the
origin; windows whose top-left corner lies inside the image are kept even
when they overhang the right or bottom border, and the overhang is filled
with zeros.
"""

from dataclasses import dataclass

import numpy as np
from PIL import Image, UnidentifiedImageError

# ITU-R 601 luma weights, used for every color-to-gray conversion.
LUMA_WEIGHTS = (0.299, 0.587, 0.114)


def require_gray_image(img):
    """Validate the 2-d [0, 1] image convention and return the array."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2 or img.shape[0] < 1 or img.shape[1] < 1:
        raise ValueError(f"expected a 2-d image with positive dimensions, got shape {img.shape}")
    if not np.isfinite(img).all():
        raise ValueError("image contains non-finite intensities")
    if img.min() < 0.0 or img.max() > 1.0:
        raise ValueError("image intensities must lie in [0, 1]")
    return img


def load_image(path):
    """Load a PNG or JPEG file as a grayscale [0, 1] array.

    Color inputs are reduced to luma with the fixed ITU-R 601 weights
    (0.299 R + 0.587 G + 0.114 B) before scaling to [0, 1].
    """
    try:
        with Image.open(path) as im:
            if im.format not in ("PNG", "JPEG"):
                raise ValueError(f"{path}: unsupported image format {im.format!r} (PNG/JPEG only)")
            if im.mode == "P":
                im = im.convert("RGBA")
            arr = np.asarray(im)
    except UnidentifiedImageError as exc:
        raise OSError(f"{path}: not a decodable raster image") from exc
    if arr.dtype == np.uint8:
        arr = arr.astype(np.float64) / 255.0
    elif arr.dtype == np.uint16:
        arr = arr.astype(np.float64) / 65535.0
    else:
        arr = arr.astype(np.float64)
    if arr.ndim == 3:
        r, g, b = LUMA_WEIGHTS
        arr = r * arr[..., 0] + g * arr[..., 1] + b * arr[..., 2]
    return np.clip(arr, 0.0, 1.0)


def save_image(path, img):
    """Write an image as 8-bit grayscale PNG.

    Intensities are clamped to [0, 1], scaled by 255 and rounded half-up.
    """
    img = require_gray_image(img)
    quantized = np.floor(img * 255.0 + 0.5).astype(np.uint8)
    Image.fromarray(quantized, mode="L").save(path, format="PNG")


@dataclass(frozen=True)
class GridSpec:
    """Dense sampling grid: square patch side and stride, both in pixels."""

    patch_size: int
    stride: int

    def __post_init__(self):
        p, s = self.patch_size, self.stride
        if p < 8 or (p & (p - 1)) != 0:
            raise ValueError(f"patch_size must be a power of two >= 8, got {p}")
        if not 1 <= s <= p:
            raise ValueError(f"stride must satisfy 1 <= stride <= patch_size, got {s}")


@dataclass(frozen=True)
class PatchWindow:
    """Square window given by its top-left corner and side length."""

    x0: int
    y0: int
    size: int


def grid_positions(width, height, grid):
    """Top-left corners of all grid windows, as an (N, 2) int array of (x0, y0).

    Corners sit at multiples of the stride and must lie strictly inside the
    image; the windows themselves may overhang the right/bottom border.  Rows
    are ordered row-major (y outer, x inner), and N equals
    ``ceil(width / stride) * ceil(height / stride)``.
    """
    if width < 1 or height < 1:
        raise ValueError(f"image dimensions must be >= 1, got {width}x{height}")
    xs = np.arange(0, width, grid.stride, dtype=np.intp)
    ys = np.arange(0, height, grid.stride, dtype=np.intp)
    out = np.empty((ys.size * xs.size, 2), dtype=np.intp)
    out[:, 0] = np.tile(xs, ys.size)
    out[:, 1] = np.repeat(ys, xs.size)
    return out


def iter_windows(width, height, grid):
    """Yield the grid as PatchWindow objects, in grid_positions order."""
    for x0, y0 in grid_positions(width, height, grid):
        yield PatchWindow(int(x0), int(y0), grid.patch_size)


def extract_patch(img, window):
    """Cut a square patch; pixels beyond the image border are zero."""
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape
    x0, y0, size = window.x0, window.y0, window.size
    if not (0 <= x0 < w and 0 <= y0 < h):
        raise IndexError(f"window corner ({x0}, {y0}) outside {w}x{h} image")
    patch = np.zeros((size, size), dtype=np.float64)
    ny = min(size, h - y0)
    nx = min(size, w - x0)
    patch[:ny, :nx] = img[y0:y0 + ny, x0:x0 + nx]
    return patch


def extract_patches(img, corners, size):
    """Gather many zero-padded patches at once; returns (N, size, size).

    ``corners`` is an (N, 2) array of (x0, y0) as produced by grid_positions.
    """
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape
    corners = np.asarray(corners, dtype=np.intp)
    if corners.size and (
        corners[:, 0].min() < 0 or corners[:, 0].max() >= w
        or corners[:, 1].min() < 0 or corners[:, 1].max() >= h
    ):
        raise IndexError("window corner outside image")
    padded = np.zeros((h + size, w + size), dtype=np.float64)
    padded[:h, :w] = img
    offs = np.arange(size, dtype=np.intp)
    rows = corners[:, 1][:, None, None] + offs[None, :, None]
    cols = corners[:, 0][:, None, None] + offs[None, None, :]
    return padded[rows, cols]
