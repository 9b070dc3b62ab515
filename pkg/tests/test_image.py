import math

import numpy as np
import pytest
from PIL import Image

from bovw.image import (
    GridSpec,
    PatchWindow,
    extract_patch,
    extract_patches,
    grid_positions,
    iter_windows,
    load_image,
    save_image,
)


def _write_rgb(path, rgb, size=(6, 4)):
    Image.new("RGB", size, rgb).save(path)


class TestLoadImage:
    def test_white_png_is_all_ones(self, tmp_path):
        path = tmp_path / "white.png"
        _write_rgb(path, (255, 255, 255))
        img = load_image(path)
        np.testing.assert_allclose(img, 1.0)

    def test_black_png_is_all_zeros(self, tmp_path):
        path = tmp_path / "black.png"
        _write_rgb(path, (0, 0, 0))
        np.testing.assert_allclose(load_image(path), 0.0)

    def test_pure_red_maps_to_luma_weight(self, tmp_path):
        path = tmp_path / "red.png"
        _write_rgb(path, (255, 0, 0))
        img = load_image(path)
        assert np.all(np.abs(img - 0.299) <= 1 / 255)

    def test_grayscale_png(self, tmp_path):
        path = tmp_path / "gray.png"
        Image.new("L", (5, 5), 128).save(path)
        np.testing.assert_allclose(load_image(path), 128 / 255)

    def test_jpeg_loads(self, tmp_path):
        path = tmp_path / "img.jpg"
        _write_rgb(path, (10, 200, 30), size=(16, 16))
        img = load_image(path)
        assert img.shape == (16, 16)
        assert 0.0 <= img.min() and img.max() <= 1.0

    def test_missing_file_raises(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_image(tmp_path / "nope.png")

    def test_garbage_file_raises_oserror(self, tmp_path):
        path = tmp_path / "junk.png"
        path.write_bytes(b"this is not an image")
        with pytest.raises(OSError):
            load_image(path)

    def test_unsupported_format_rejected(self, tmp_path):
        path = tmp_path / "img.bmp"
        Image.new("L", (4, 4), 7).save(path, format="BMP")
        with pytest.raises(ValueError, match="unsupported"):
            load_image(path)


class TestSaveImage:
    def test_round_trip_within_one_level(self, tmp_path):
        rng = np.random.default_rng(0)
        img = rng.random((12, 9))
        path = tmp_path / "rt.png"
        save_image(path, img)
        back = load_image(path)
        assert np.abs(back - img).max() <= 1 / 255

    def test_round_half_up(self, tmp_path):
        # 0.5/255 quantizes up to level 1, just below stays at 0
        img = np.array([[0.5 / 255, 0.4999 / 255]])
        path = tmp_path / "q.png"
        save_image(path, img)
        raw = np.asarray(Image.open(path))
        assert raw.tolist() == [[1, 0]]

    def test_rejects_out_of_range(self, tmp_path):
        with pytest.raises(ValueError):
            save_image(tmp_path / "bad.png", np.array([[1.5]]))


class TestGridPositions:
    def test_dense_default_grid(self):
        pos = grid_positions(256, 256, GridSpec(64, 8))
        assert pos.shape == (1024, 2)

    def test_single_window(self):
        pos = grid_positions(64, 64, GridSpec(64, 64))
        assert pos.tolist() == [[0, 0]]

    def test_one_pixel_over(self):
        pos = grid_positions(65, 64, GridSpec(64, 64))
        assert pos.tolist() == [[0, 0], [64, 0]]

    def test_row_major_order(self):
        pos = grid_positions(20, 20, GridSpec(8, 8))
        assert pos.tolist() == [[0, 0], [8, 0], [16, 0], [0, 8], [8, 8], [16, 8],
                                [0, 16], [8, 16], [16, 16]]

    def test_count_formula_small_range(self):
        grid_cache = {}
        for stride in (1, 2, 3, 5, 8, 13):
            grid_cache[stride] = GridSpec(16, stride)
        for stride, grid in grid_cache.items():
            for w in range(16, 50, 7):
                for h in range(16, 50, 5):
                    n = grid_positions(w, h, grid).shape[0]
                    assert n == math.ceil(w / stride) * math.ceil(h / stride)

    def test_rejects_empty_dims(self):
        with pytest.raises(ValueError):
            grid_positions(0, 10, GridSpec(8, 8))

    def test_iter_windows_matches_positions(self):
        grid = GridSpec(16, 8)
        windows = list(iter_windows(30, 20, grid))
        pos = grid_positions(30, 20, grid)
        assert len(windows) == pos.shape[0]
        assert all(win.size == 16 for win in windows)
        assert [(w.x0, w.y0) for w in windows] == [tuple(p) for p in pos.tolist()]


class TestGridSpec:
    def test_patch_size_must_be_power_of_two(self):
        with pytest.raises(ValueError):
            GridSpec(48, 8)

    def test_patch_size_minimum(self):
        with pytest.raises(ValueError):
            GridSpec(4, 1)

    def test_stride_cannot_exceed_patch(self):
        with pytest.raises(ValueError):
            GridSpec(16, 17)


class TestExtractPatch:
    def test_interior_copy(self):
        rng = np.random.default_rng(1)
        img = rng.random((40, 40))
        patch = extract_patch(img, PatchWindow(4, 6, 16))
        np.testing.assert_array_equal(patch, img[6:22, 4:20])

    def test_overhang_right_half_zero(self):
        img = np.ones((64, 64))
        patch = extract_patch(img, PatchWindow(32, 0, 64))
        assert np.all(patch[:, :32] == 1.0)
        assert np.all(patch[:, 32:] == 0.0)

    def test_all_zero_image(self):
        patch = extract_patch(np.zeros((10, 10)), PatchWindow(5, 5, 8))
        assert np.all(patch == 0.0)

    def test_corner_outside_rejected(self):
        with pytest.raises(IndexError):
            extract_patch(np.zeros((10, 10)), PatchWindow(10, 0, 8))

    def test_reembedding_identity(self):
        # re-embedding the patch at its window reproduces the covered pixels
        rng = np.random.default_rng(2)
        img = rng.random((24, 30))
        for window in (PatchWindow(0, 0, 16), PatchWindow(20, 10, 16), PatchWindow(29, 23, 16)):
            patch = extract_patch(img, window)
            ny = min(window.size, img.shape[0] - window.y0)
            nx = min(window.size, img.shape[1] - window.x0)
            np.testing.assert_array_equal(
                patch[:ny, :nx],
                img[window.y0:window.y0 + ny, window.x0:window.x0 + nx],
            )
            assert np.all(patch[ny:, :] == 0.0)
            assert np.all(patch[:, nx:] == 0.0)

    def test_batch_matches_single(self):
        rng = np.random.default_rng(3)
        img = rng.random((33, 47))
        grid = GridSpec(16, 8)
        corners = grid_positions(47, 33, grid)
        batch = extract_patches(img, corners, 16)
        for row, (x0, y0) in zip(batch, corners):
            np.testing.assert_array_equal(row, extract_patch(img, PatchWindow(x0, y0, 16)))
