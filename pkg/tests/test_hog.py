import numpy as np
import pytest

from bovw.hog import (
    DEFAULT_HOG,
    HogConfig,
    compute_hog,
    compute_hog_batch,
    dense_hog,
    load_descriptors,
    save_descriptors,
)
from bovw.image import GridSpec
from oracles import oracle_hog


class TestDescriptorShape:
    def test_default_config_is_512(self):
        d = compute_hog(np.random.default_rng(0).random((64, 64)))
        assert d.shape == (512,)

    def test_dimension_is_independent_of_patch_size(self):
        for side in (16, 32, 64, 128):
            d = compute_hog(np.random.default_rng(1).random((side, side)))
            assert d.shape == (512,)

    @pytest.mark.parametrize("cells", [1, 2, 4, 8])
    def test_dim_invariant_across_configs(self, cells):
        cfg = HogConfig(cells_per_side=cells)
        assert cfg.dim == cells * cells * 32
        patch = np.random.default_rng(2).random((cells * 4, cells * 4))
        assert compute_hog(patch, cfg).shape == (cfg.dim,)

    def test_indivisible_patch_side_rejected(self):
        with pytest.raises(ValueError, match="divisible"):
            compute_hog(np.zeros((10, 10)), HogConfig(cells_per_side=4))

    def test_bin_relation_enforced(self):
        with pytest.raises(ValueError):
            HogConfig(bins_sensitive=18, bins_insensitive=8)


class TestDescriptorValues:
    def test_constant_patch_gives_zero_descriptor(self):
        for value in (0.0, 0.5, 1.0):
            d = compute_hog(np.full((64, 64), value))
            np.testing.assert_array_equal(d, 0.0)

    def test_intensity_shift_invariance(self):
        # exact in real arithmetic; float64 rounding of (a+c)-(b+c) leaves dust
        rng = np.random.default_rng(3)
        patch = rng.random((32, 32)) * 0.5
        np.testing.assert_allclose(compute_hog(patch), compute_hog(patch + 0.3), atol=1e-10)

    def test_intensity_scale_invariance(self):
        rng = np.random.default_rng(4)
        patch = rng.random((32, 32))
        base = compute_hog(patch)
        for c in (0.5, 2.0, 7.3):
            scaled = compute_hog(patch * c)
            np.testing.assert_allclose(scaled, base, atol=1e-6)

    def test_zero_padding_channel_is_exactly_zero(self):
        rng = np.random.default_rng(5)
        d = compute_hog(rng.random((64, 64))).reshape(16, 32)
        assert np.all(d[:, 31] == 0.0)

    def test_values_bounded(self):
        rng = np.random.default_rng(6)
        for _ in range(10):
            d = compute_hog(rng.random((16, 16)))
            assert d.min() >= 0.0
            assert d.max() <= 1.0 + DEFAULT_HOG.truncation

    def test_vertical_step_edge_energy_concentrated(self):
        # gradient of a vertical edge points along +x: orientation bin 0
        patch = np.zeros((8, 8))
        patch[:, 4:] = 1.0
        sens = compute_hog(patch).reshape(16, 32)[:, :18]
        per_bin = sens.sum(axis=0)
        nearest_two = per_bin[0] + per_bin[1]
        assert nearest_two >= 0.9 * per_bin.sum()


class TestAgainstOracle:
    def test_matches_bruteforce_on_random_patches(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            patch = rng.random((8, 8))
            expected = oracle_hog(patch.tolist(), DEFAULT_HOG)
            np.testing.assert_allclose(compute_hog(patch), expected, atol=1e-5)

    def test_matches_bruteforce_on_structured_patches(self):
        patch = np.zeros((8, 8))
        patch[2:6, 2:6] = 0.8
        np.testing.assert_allclose(
            compute_hog(patch), oracle_hog(patch.tolist(), DEFAULT_HOG), atol=1e-5
        )


class TestBatchAndDense:
    def test_batch_matches_single(self):
        rng = np.random.default_rng(8)
        patches = rng.random((5, 16, 16))
        batch = compute_hog_batch(patches)
        for i in range(5):
            np.testing.assert_array_equal(batch[i], compute_hog(patches[i]))

    def test_dense_hog_shape_and_chunking(self):
        rng = np.random.default_rng(9)
        img = rng.random((40, 56))
        grid = GridSpec(16, 8)
        d1 = dense_hog(img, grid, chunk=3)
        d2 = dense_hog(img, grid, chunk=1000)
        assert d1.shape == (7 * 5, 512)
        np.testing.assert_array_equal(d1, d2)


class TestDescriptorFile:
    def test_round_trip_and_header(self, tmp_path):
        rng = np.random.default_rng(10)
        desc = rng.random((6, 512)).astype(np.float32).astype(np.float64)
        path = tmp_path / "d.desc"
        save_descriptors(path, desc)
        header = path.read_bytes().split(b"\n", 1)[0]
        assert header == b"BOWG-DESC v1 6 512"
        np.testing.assert_array_equal(load_descriptors(path), desc)
