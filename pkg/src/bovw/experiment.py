"""The repeated-split scene-classification experiment.

Each split draws a fixed number of training images per class, fits the
codebook and the inverter on training data only, represents every image as
a kernel-mapped bag-of-words histogram, trains the linear classifier with
cross-validated cost, and reports the average recognition rate on all
remaining images.  Everything is seeded, so reruns are bit-identical.
"""

import json
import math
import os
from dataclasses import dataclass, field, replace

import numpy as np
from PIL import Image

from . import classify
from .classify import ExperimentConfig
from .codebook import KMeansConfig, bow_histogram, kmeans_fit, quantize_batch
from .encoding import KernelMapConfig, kernel_map, l1_normalize
from .hog import DEFAULT_HOG, HogConfig, dense_hog
from .image import GridSpec, extract_patches, grid_positions, load_image
from .inversion import select_ridge_lambda, train_inverter


@dataclass(frozen=True)
class PipelineConfig:
    """Everything one experiment run depends on, in one place."""

    grid: GridSpec = GridSpec(patch_size=64, stride=8)
    hog: HogConfig = DEFAULT_HOG
    kmeans: KMeansConfig = KMeansConfig(k=512)
    kernel: KernelMapConfig = KernelMapConfig()
    experiment: ExperimentConfig = ExperimentConfig()
    descriptor_pool: int = 200_000
    inverter_pairs: int = 50_000
    inverter_lambda_grid: tuple = (1e-2, 1e-1, 1.0, 10.0)


class SceneCorpus:
    """Class-folder image corpus: one sub-directory per class."""

    IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")

    def __init__(self, root):
        self.root = root
        if not os.path.isdir(root):
            raise FileNotFoundError(f"dataset root {root} does not exist")
        self._paths = {}
        for name in sorted(os.listdir(root)):
            cls_dir = os.path.join(root, name)
            if not os.path.isdir(cls_dir):
                continue
            files = tuple(
                os.path.join(cls_dir, f)
                for f in sorted(os.listdir(cls_dir))
                if f.lower().endswith(self.IMAGE_SUFFIXES)
            )
            if files:
                self._paths[name] = files
        if not self._paths:
            raise FileNotFoundError(f"no class folders with images under {root}")

    @property
    def classes(self):
        return tuple(self._paths)

    def paths(self, cls):
        return self._paths[cls]

    def load(self, path):
        return load_image(path)

    def dimensions(self, path):
        """(width, height) from the file header, without decoding pixels."""
        with Image.open(path) as im:
            return im.size


@dataclass(frozen=True)
class SplitResult:
    split: int
    seed: int
    cost: float
    ridge_lambda: float
    inverter_holdout_mse: float
    per_class: dict
    mean_rate: float
    inverter: object = field(default=None, repr=False, compare=False)


@dataclass(frozen=True)
class ExperimentResult:
    splits: tuple
    mean_rate: float
    std_rate: float
    classes: tuple = field(default=(), compare=False)


def _grid_count(dims, grid):
    w, h = dims
    return math.ceil(w / grid.stride) * math.ceil(h / grid.stride)


def image_features(img, grid, hog_cfg, cb, kernel_cfg):
    """Kernel-mapped, L1-normalized bag-of-words vector for one image."""
    descriptors = dense_hog(img, grid, hog_cfg)
    hist = bow_histogram(quantize_batch(descriptors, cb), cb.k)
    return kernel_map(l1_normalize(hist), kernel_cfg)


def _featurize(corpus, paths, grid, hog_cfg, cb, kernel_cfg):
    return np.vstack([
        image_features(corpus.load(p), grid, hog_cfg, cb, kernel_cfg) for p in paths
    ])


def _sample_rows(rng, counts, how_many):
    """Uniform sample without replacement over the concatenated row space.

    Returns a per-image list of selected local row indices.
    """
    total = int(np.sum(counts))
    chosen = np.sort(rng.choice(total, size=min(how_many, total), replace=False))
    offsets = np.concatenate([[0], np.cumsum(counts)])
    per_image = []
    for i in range(len(counts)):
        inside = chosen[(chosen >= offsets[i]) & (chosen < offsets[i + 1])]
        per_image.append(inside - offsets[i])
    return per_image


def collect_pool_and_pairs(corpus, paths, grid, hog_cfg, n_pool, n_pairs, rng):
    """Sample descriptors and (descriptor, patch) pairs across many images.

    Both samples are uniform without replacement over all grid windows of all
    given images (window counts come from the image headers, so each image is
    decoded at most once).  Returns (pool, pair_descriptors, pair_patches);
    arrays are empty when the respective request is zero.
    """
    counts = [_grid_count(corpus.dimensions(p), grid) for p in paths]
    pool_rows = _sample_rows(rng, counts, n_pool)
    pair_rows = _sample_rows(rng, counts, n_pairs)
    pool, pair_desc, pair_patch = [], [], []
    for path, rows_pool, rows_pair in zip(paths, pool_rows, pair_rows):
        if rows_pool.size == 0 and rows_pair.size == 0:
            continue
        img = corpus.load(path)
        descriptors = dense_hog(img, grid, hog_cfg)
        if rows_pool.size:
            pool.append(descriptors[rows_pool])
        if rows_pair.size:
            corners = grid_positions(img.shape[1], img.shape[0], grid)
            pair_desc.append(descriptors[rows_pair])
            pair_patch.append(
                extract_patches(img, corners[rows_pair], grid.patch_size).astype(np.float32)
            )
    dim = hog_cfg.dim
    pixels = grid.patch_size ** 2
    return (
        np.vstack(pool) if pool else np.zeros((0, dim)),
        np.vstack(pair_desc) if pair_desc else np.zeros((0, dim)),
        np.vstack(pair_patch) if pair_patch else np.zeros((0, grid.patch_size, grid.patch_size)),
    )


def _run_split(corpus, cfg, split, shuffle_labels, hook):
    seeds = [int(s.generate_state(1)[0]) for s in
             np.random.SeedSequence([cfg.experiment.seed, split]).spawn(4)]
    split_seed, kmeans_seed, lambda_seed, cv_seed = seeds
    rng = np.random.default_rng(split_seed)
    ecfg = cfg.experiment

    if hook:
        hook(f"split{split}:fit")
    train_paths, test_paths = [], []
    train_labels, test_labels = [], []
    for cls in corpus.classes:
        paths = corpus.paths(cls)
        perm = rng.permutation(len(paths))
        for j in perm[:ecfg.train_per_class]:
            train_paths.append(paths[j])
            train_labels.append(cls)
        for j in perm[ecfg.train_per_class:]:
            test_paths.append(paths[j])
            test_labels.append(cls)

    # One extraction pass collects the clustering pool and the inverter pairs.
    pool, pair_desc, pair_patch = collect_pool_and_pairs(
        corpus, train_paths, cfg.grid, cfg.hog, cfg.descriptor_pool, cfg.inverter_pairs, rng
    )

    cb = kmeans_fit(pool, replace(cfg.kmeans, seed=kmeans_seed))
    lam, lam_scores = select_ridge_lambda(
        pair_desc, pair_patch, grid=cfg.inverter_lambda_grid, seed=lambda_seed
    )
    inverter = train_inverter(pair_desc, pair_patch, lam)

    train_x = _featurize(corpus, train_paths, cfg.grid, cfg.hog, cb, cfg.kernel)
    train_y = np.asarray(train_labels, dtype=object)
    if shuffle_labels:
        train_y = rng.permutation(train_y)
    model = classify.train_classifier(train_x, train_y, replace(ecfg, seed=cv_seed))

    if hook:
        hook(f"split{split}:evaluate")
    test_x = _featurize(corpus, test_paths, cfg.grid, cfg.hog, cb, cfg.kernel)
    rates = classify.per_class_accuracy(np.asarray(test_labels, dtype=object),
                                        model.predict(test_x))
    return SplitResult(
        split=split,
        seed=split_seed,
        cost=model.cost,
        ridge_lambda=float(lam),
        inverter_holdout_mse=lam_scores[lam],
        per_class=rates,
        mean_rate=float(np.mean(list(rates.values()))),
        inverter=inverter,
    )


def run_experiment(corpus, cfg, shuffle_labels=False, phase_hook=None):
    """Run all splits; see the module docstring for what one split does.

    ``phase_hook``, when given, is called with "split<i>:fit" before any
    training-side work of a split and "split<i>:evaluate" before test images
    are touched; nothing from the test side is read during fit.
    """
    for cls in corpus.classes:
        if len(corpus.paths(cls)) <= cfg.experiment.train_per_class:
            raise ValueError(
                f"class {cls!r} needs more than {cfg.experiment.train_per_class} images"
            )
    splits = tuple(
        _run_split(corpus, cfg, split, shuffle_labels, phase_hook)
        for split in range(cfg.experiment.splits)
    )
    rates = np.array([s.mean_rate for s in splits])
    std = float(rates.std(ddof=1)) if rates.size > 1 else 0.0
    return ExperimentResult(splits=splits, mean_rate=float(rates.mean()),
                            std_rate=std, classes=corpus.classes)


def write_split_records(path, result):
    """One JSON record per split: seed, per-class rates, mean."""
    with open(path, "w", encoding="utf-8") as fh:
        for s in result.splits:
            fh.write(json.dumps({
                "split": s.split,
                "seed": s.seed,
                "cost": s.cost,
                "ridge_lambda": s.ridge_lambda,
                "per_class": s.per_class,
                "mean_rate": s.mean_rate,
            }, sort_keys=True) + "\n")


def format_results_table(result):
    lines = [f"{'split':>5}  {'cost':>8}  {'lambda':>8}  {'rate':>8}"]
    for s in result.splits:
        lines.append(f"{s.split:>5}  {s.cost:>8g}  {s.ridge_lambda:>8g}  {s.mean_rate:>8.4f}")
    lines.append(
        f"mean average recognition rate: {result.mean_rate:.4f} +/- {result.std_rate:.4f} "
        f"({len(result.splits)} splits)"
    )
    return "\n".join(lines) + "\n"
