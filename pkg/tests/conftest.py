import json
import os

import numpy as np
import pytest

from bovw.image import save_image
from bovw.synthetic import make_texture_corpus


@pytest.fixture(scope="session")
def texture_corpus_dir(tmp_path_factory):
    """3-class oriented-grating corpus, 14 images per class."""
    root = tmp_path_factory.mktemp("textures")
    make_texture_corpus(root, n_classes=3, images_per_class=14, size=96, seed=5)
    return root


def build_fake_stimuli(root, n_classes=15, n_images=30, seed=0):
    """A fabricated stimulus directory: tiny PNGs plus manifest/examples files.

    Content is random noise; only the manifest structure matters to the
    study service.
    """
    conditions = ("original", "noquant", "k32", "k128", "k512", "k2048")
    rng = np.random.default_rng(seed)
    classes = [f"class{i:02d}" for i in range(n_classes)]
    os.makedirs(os.path.join(root, "stimuli"), exist_ok=True)
    os.makedirs(os.path.join(root, "examples"), exist_ok=True)
    with open(os.path.join(root, "manifest.jsonl"), "w", encoding="utf-8") as fh:
        for i in range(n_images):
            cls = classes[i % n_classes]
            image_id = f"{cls}/img{i:03d}"
            for cond in conditions:
                fname = f"stimuli/{cls}--img{i:03d}--{cond}.png"
                save_image(os.path.join(root, fname), rng.random((16, 16)))
                fh.write(json.dumps({
                    "file": fname,
                    "image_id": image_id,
                    "condition": cond,
                    "true_class": cls,
                }) + "\n")
    with open(os.path.join(root, "examples.jsonl"), "w", encoding="utf-8") as fh:
        for cls in classes:
            for j in range(2):
                fname = f"examples/{cls}--example{j}.png"
                save_image(os.path.join(root, fname), rng.random((16, 16)))
                fh.write(json.dumps({"class": cls, "file": fname}) + "\n")
    return classes


@pytest.fixture(scope="session")
def stimulus_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("stimuli")
    build_fake_stimuli(root, n_classes=15, n_images=30, seed=0)
    return root


@pytest.fixture(scope="session")
def big_stimulus_dir(tmp_path_factory):
    """Larger fabricated set for the random-subject statistics."""
    root = tmp_path_factory.mktemp("stimuli_big")
    build_fake_stimuli(root, n_classes=15, n_images=100, seed=1)
    return root
