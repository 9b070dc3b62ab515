"""Seeded synthetic image corpora for tests, demos and desk-scale runs.

Oriented sinusoidal gratings make a classification task whose signal lives
exactly where HOG looks (orientation statistics), so a small bag-of-words
pipeline separates the classes almost perfectly.  The mixed corpus adds
edges, blobs and checkerboards to exercise reconstruction with content at
several spatial frequencies.
"""

import os

import numpy as np

from .image import save_image


def grating(size, angle_deg, frequency, phase=0.0, contrast=1.0, noise=0.0, rng=None):
    """Sinusoidal grating in [0, 1]; frequency is in cycles per pixel."""
    theta = np.deg2rad(angle_deg)
    yy, xx = np.mgrid[0:size, 0:size]
    wave = np.sin(2.0 * np.pi * frequency * (xx * np.cos(theta) + yy * np.sin(theta)) + phase)
    img = 0.5 + 0.5 * contrast * wave
    if noise > 0:
        img = img + (rng or np.random.default_rng()).normal(0.0, noise, img.shape)
    return np.clip(img, 0.0, 1.0)


def checkerboard(size, cell, phase=0, low=0.1, high=0.9):
    yy, xx = np.mgrid[0:size, 0:size]
    board = ((yy // cell + xx // cell + phase) % 2).astype(np.float64)
    return low + (high - low) * board


def blobs(size, n, sigma, rng):
    yy, xx = np.mgrid[0:size, 0:size]
    img = np.zeros((size, size))
    for _ in range(n):
        cy, cx = rng.uniform(0, size, 2)
        amp = rng.uniform(0.4, 1.0)
        img += amp * np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2.0 * sigma ** 2))
    peak = img.max()
    return img / peak if peak > 0 else img


def step_scene(size, rng):
    """A few random axis-aligned constant rectangles over a flat background."""
    img = np.full((size, size), rng.uniform(0.2, 0.8))
    for _ in range(rng.integers(2, 5)):
        x0, y0 = rng.integers(0, size - 8, 2)
        w, h = rng.integers(8, size // 2, 2)
        img[y0:y0 + h, x0:x0 + w] = rng.uniform(0.0, 1.0)
    return img


def ci_images(count=20, size=96, seed=7):
    """A fixed mixed-content corpus used by the directional reconstruction checks."""
    rng = np.random.default_rng(seed)
    images = []
    for i in range(count):
        kind = i % 4
        if kind == 0:
            img = grating(size, rng.uniform(0, 180), rng.uniform(0.04, 0.12),
                          phase=rng.uniform(0, 2 * np.pi), contrast=rng.uniform(0.6, 1.0),
                          noise=0.03, rng=rng)
        elif kind == 1:
            img = step_scene(size, rng)
        elif kind == 2:
            img = blobs(size, int(rng.integers(3, 7)), rng.uniform(4, 10), rng)
        else:
            img = checkerboard(size, int(rng.integers(4, 12)), phase=int(rng.integers(0, 2)))
        images.append(img)
    return images


def _write_class(root, name, images):
    cls_dir = os.path.join(root, name)
    os.makedirs(cls_dir, exist_ok=True)
    for i, img in enumerate(images):
        save_image(os.path.join(cls_dir, f"img{i:03d}.png"), img)


def make_texture_corpus(root, n_classes=3, images_per_class=40, size=96, seed=0):
    """Class-folder corpus of oriented gratings; class c points at c*180/C degrees.

    Returns the class names (also the folder names).
    """
    rng = np.random.default_rng(seed)
    names = []
    for c in range(n_classes):
        angle = 180.0 * c / n_classes
        name = f"grating{int(round(angle)):03d}"
        names.append(name)
        images = [
            grating(size, angle + rng.uniform(-5, 5), rng.uniform(0.05, 0.12),
                    phase=rng.uniform(0, 2 * np.pi), contrast=rng.uniform(0.6, 1.0),
                    noise=0.05, rng=rng)
            for _ in range(images_per_class)
        ]
        _write_class(root, name, images)
    return names


def make_study_corpus(root, n_classes=15, images_per_class=12, size=96, seed=0):
    """A 15-class corpus for exercising the human-study machinery.

    Classes differ by grating orientation and carrier frequency; content is
    irrelevant to the study plumbing, only the class structure matters.
    """
    rng = np.random.default_rng(seed)
    names = []
    for c in range(n_classes):
        angle = 180.0 * c / n_classes
        freq = 0.05 + 0.01 * (c % 5)
        name = f"class{c:02d}"
        names.append(name)
        images = [
            grating(size, angle + rng.uniform(-4, 4), freq,
                    phase=rng.uniform(0, 2 * np.pi), contrast=rng.uniform(0.7, 1.0),
                    noise=0.04, rng=rng)
            for _ in range(images_per_class)
        ]
        _write_class(root, name, images)
    return names
