"""Bag-of-visual-words pipeline with descriptor inversion.

Dense HOG extraction, k-means codebooks, hard vector quantization, a ridge
inverter that maps descriptors back to image patches, reconstruction
compositing, a chi-squared kernel-map + linear-classifier baseline, and an
HTTP service for the human scene-recognition study.
"""

from .classify import ClassifierModel, ExperimentConfig, evaluate, train_classifier
from .codebook import (
    Codebook,
    KMeansConfig,
    bow_histogram,
    kmeans_fit,
    load_codebook,
    quantization_distortion,
    quantize,
    quantize_batch,
    save_codebook,
)
from .encoding import KernelMapConfig, exact_chi2_kernel, kernel_map, l1_normalize
from .experiment import (
    ExperimentResult,
    PipelineConfig,
    SceneCorpus,
    image_features,
    run_experiment,
)
from .hog import HogConfig, compute_hog, compute_hog_batch, dense_hog
from .image import (
    GridSpec,
    PatchWindow,
    extract_patch,
    extract_patches,
    grid_positions,
    iter_windows,
    load_image,
    save_image,
)
from .inversion import (
    Inverter,
    NumericalError,
    high_freq_energy,
    invert_descriptor,
    invert_prototypes,
    load_inverter,
    reconstruct,
    save_inverter,
    select_ridge_lambda,
    train_inverter,
)

__version__ = "0.1.0"
