import numpy as np
import pytest

from bovw.encoding import KernelMapConfig, exact_chi2_kernel, kernel_map, l1_normalize
from oracles import oracle_chi2


def _random_l1_pairs(rng, count, dim, sparsity=0.6):
    pairs = []
    for _ in range(count):
        x = rng.random(dim) * (rng.random(dim) < sparsity)
        y = rng.random(dim) * (rng.random(dim) < sparsity)
        pairs.append((l1_normalize(x), l1_normalize(y)))
    return pairs


class TestL1Normalize:
    def test_basic(self):
        np.testing.assert_allclose(l1_normalize([2, 1, 0]), [2 / 3, 1 / 3, 0])

    def test_zero_histogram_stays_zero(self):
        np.testing.assert_array_equal(l1_normalize([0, 0, 0, 0]), np.zeros(4))

    def test_sums_to_one(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            v = rng.integers(0, 50, size=12)
            if v.sum() > 0:
                assert np.isclose(l1_normalize(v).sum(), 1.0)


class TestExactChi2:
    def test_self_kernel_of_distribution_is_one(self):
        rng = np.random.default_rng(1)
        x = l1_normalize(rng.random(30))
        assert np.isclose(exact_chi2_kernel(x, x), 1.0)

    def test_disjoint_supports(self):
        x = np.array([1.0, 0.0, 2.0, 0.0])
        y = np.array([0.0, 3.0, 0.0, 1.0])
        assert exact_chi2_kernel(x, y) == 0.0

    def test_symmetry(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            x, y = rng.random(8), rng.random(8)
            assert exact_chi2_kernel(x, y) == exact_chi2_kernel(y, x)

    def test_matches_scalar_oracle(self):
        rng = np.random.default_rng(3)
        x, y = rng.random(40), rng.random(40)
        assert np.isclose(exact_chi2_kernel(x, y), oracle_chi2(x.tolist(), y.tolist()))

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            exact_chi2_kernel(np.zeros(3), np.zeros(4))

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            exact_chi2_kernel(np.array([-1.0]), np.array([1.0]))


class TestKernelMap:
    def test_output_dimension(self):
        v = np.zeros(512)
        assert kernel_map(v, KernelMapConfig(n=3)).shape == (3584,)

    def test_zero_vector_maps_to_zero(self):
        out = kernel_map(np.zeros(16))
        assert np.all(out == 0.0)

    def test_finite_including_exact_zeros(self):
        rng = np.random.default_rng(4)
        v = rng.random(64)
        v[::3] = 0.0
        out = kernel_map(v)
        assert np.isfinite(out).all()

    def test_negative_rejected(self):
        with pytest.raises(ValueError, match="non-negative"):
            kernel_map(np.array([0.5, -0.1]))

    def test_batch_rows_match_single(self):
        rng = np.random.default_rng(5)
        vs = rng.random((4, 10))
        batch = kernel_map(vs)
        for i in range(4):
            np.testing.assert_array_equal(batch[i], kernel_map(vs[i]))

    @pytest.mark.parametrize("gamma", [1.0, 0.5])
    def test_inner_products_approximate_chi2(self, gamma):
        cfg = KernelMapConfig(n=3, gamma=gamma, period=0.5)
        rng = np.random.default_rng(6)
        for x, y in _random_l1_pairs(rng, 100, 32):
            approx = float(kernel_map(x, cfg) @ kernel_map(y, cfg))
            exact = exact_chi2_kernel(x ** gamma, y ** gamma)
            bound = 0.02 * exact_chi2_kernel(x ** gamma, x ** gamma)
            assert abs(approx - exact) <= bound

    def test_error_non_increasing_in_order(self):
        rng = np.random.default_rng(7)
        pairs = _random_l1_pairs(rng, 100, 32)
        gamma = 0.5
        mean_errors = []
        for n in (1, 2, 3):
            cfg = KernelMapConfig(n=n, gamma=gamma, period=0.5)
            errs = [
                abs(float(kernel_map(x, cfg) @ kernel_map(y, cfg))
                    - exact_chi2_kernel(x ** gamma, y ** gamma))
                for x, y in pairs
            ]
            mean_errors.append(np.mean(errs))
        assert mean_errors[0] >= mean_errors[1] >= mean_errors[2]

    def test_config_validation(self):
        with pytest.raises(ValueError):
            KernelMapConfig(n=0)
        with pytest.raises(ValueError):
            KernelMapConfig(gamma=0.0)
        with pytest.raises(ValueError):
            KernelMapConfig(gamma=1.5)
        with pytest.raises(ValueError):
            KernelMapConfig(period=0.0)
