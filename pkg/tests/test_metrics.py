import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stereopass.errors import MetricError, ShapeError
from stereopass.imaging import ImagePlane
from stereopass.metrics import masked_loss, psnr, ssim_map, ssim_mean


def _img(arr):
    return ImagePlane(np.asarray(arr, dtype=np.float32))


def _rand(shape, seed):
    return _img(np.random.default_rng(seed).random(shape))


class TestPsnr:
    def test_identical_capped_at_99(self):
        a = _rand((8, 8, 3), 0)
        assert psnr(a, a) == 99.0

    def test_uniform_error_20db(self):
        a = _img(np.full((16, 16), 0.5))
        b = _img(np.full((16, 16), 0.6))  # MSE = 0.01
        assert psnr(a, b) == pytest.approx(20.0, abs=1e-4)

    def test_black_vs_white_0db(self):
        assert psnr(_img(np.zeros((4, 4, 3))), _img(np.ones((4, 4, 3)))) == pytest.approx(0.0, abs=1e-9)

    def test_size_mismatch(self):
        with pytest.raises(ShapeError):
            psnr(_rand((4, 4), 0), _rand((4, 5), 0))

    def test_masked_variant_ignores_masked_region(self):
        a = _img(np.full((8, 8), 0.5))
        b = np.full((8, 8), 0.5, dtype=np.float32)
        mask = np.zeros((8, 8))
        b[:2] = 1.0
        mask[:2] = 1.0
        assert psnr(a, _img(b), mask=mask) == 99.0

    def test_symmetry(self):
        a, b = _rand((8, 8, 3), 1), _rand((8, 8, 3), 2)
        assert psnr(a, b) == psnr(b, a)


class TestSsim:
    def test_identical_map_is_one(self):
        a = _rand((16, 16), 3)
        assert (ssim_map(a, a).data == pytest.approx(1.0, abs=1e-7))

    def test_anticorrelated_binary_negative(self):
        rng = np.random.default_rng(4)
        a = (rng.random((32, 32)) > 0.5).astype(np.float32)
        assert ssim_mean(_img(a), _img(1.0 - a)) < 0.0

    def test_constant_offset_matches_luminance_closed_form(self):
        c = 0.4
        a = _img(np.full((32, 32), c))
        b = _img(np.full((32, 32), c + 0.1))
        c1 = 0.01**2
        expect = (2 * c * (c + 0.1) + c1) / (c * c + (c + 0.1) ** 2 + c1)
        assert ssim_mean(a, b) == pytest.approx(expect, abs=1e-6)
        assert ssim_mean(a, b) < 1.0

    def test_matches_library_oracle(self):
        from skimage.metrics import structural_similarity

        rng = np.random.default_rng(5)
        a = rng.random((48, 64)).astype(np.float32)
        b = np.clip(a + rng.normal(0, 0.1, a.shape), 0, 1).astype(np.float32)
        _, sk = structural_similarity(
            a.astype(np.float64), b.astype(np.float64), gaussian_weights=True,
            sigma=1.5, use_sample_covariance=False, data_range=1.0, full=True,
        )
        np.testing.assert_allclose(ssim_map(_img(a), _img(b)).data, sk, atol=1e-6)

    def test_symmetry(self):
        a, b = _rand((24, 24, 3), 6), _rand((24, 24, 3), 7)
        assert ssim_mean(a, b) == pytest.approx(ssim_mean(b, a), abs=1e-9)


class TestMaskedLoss:
    def test_perfect_reconstruction_scores_minus_one(self):
        a = _rand((16, 16, 3), 8)
        zero_mask = _img(np.zeros((16, 16)))
        assert masked_loss(a, a, zero_mask) == pytest.approx(-1.0, abs=1e-7)

    def test_fully_masked_rejected(self):
        a = _rand((8, 8, 3), 9)
        with pytest.raises(MetricError):
            masked_loss(a, a, _img(np.ones((8, 8))))

    def test_invariant_to_masked_content(self):
        rng = np.random.default_rng(10)
        g = _rand((24, 24, 3), 11)
        mask = np.zeros((24, 24), dtype=np.float32)
        mask[8:14, 6:16] = 1.0
        o_clean = ImagePlane(g.data.copy())
        corrupted = g.data.copy()
        corrupted[mask > 0.5] = rng.random((int(mask.sum()), 3))
        o_dirty = ImagePlane(corrupted)
        l_clean = masked_loss(o_clean, g, _img(mask))
        l_dirty = masked_loss(o_dirty, g, _img(mask))
        assert l_dirty == l_clean == pytest.approx(-1.0, abs=1e-7)

    @given(seed=st.integers(0, 1000))
    @settings(max_examples=15, deadline=None)
    def test_loss_bounded_below_by_minus_one(self, seed):
        rng = np.random.default_rng(seed)
        o = _img(rng.random((12, 12, 3)))
        g = _img(rng.random((12, 12, 3)))
        assert masked_loss(o, g, _img(np.zeros((12, 12)))) >= -1.0
