import numpy as np
import pytest

from stereopass.disocclusion import (
    FilterConfig,
    fill_full,
    fill_partial,
    filter_target_view,
    occlusion_masks,
)
from stereopass.errors import ConfigError
from stereopass.imaging import ImagePlane, gaussian_kernel
from stereopass.rig import build_rig
from stereopass.scenes import PlaneLayer, SceneSpec, TextureSpec, render
from stereopass.splat import splat_all


def _occluder_case():
    scene = SceneSpec(
        layers=(
            PlaneLayer(
                0.55,
                TextureSpec("value_noise", 0.03, color_a=(0.9, 0.1, 0.1), color_b=(1.0, 0.9, 0.2), seed=1),
                extent=(-0.15, 0.1, -0.12, 0.12),
            ),
            PlaneLayer(2.2, TextureSpec("value_noise", 0.2, color_a=(0.05, 0.1, 0.4), color_b=(0.2, 0.6, 0.9), seed=2)),
        )
    )
    rig = build_rig(0.093, 0.015, 0.06, 0.35, 90.0, 180, 135)
    left, _ = render(scene, rig.cam_left)
    right, _ = render(scene, rig.cam_right)
    return splat_all(left, right, rig)["eye_left"]


class TestMasks:
    def test_threshold_semantics(self):
        d_l = ImagePlane(np.array([[0.05, 0.2]], dtype=np.float32))
        d_r = ImagePlane(np.array([[0.3, 0.05]], dtype=np.float32))
        masks = occlusion_masks(d_l, d_r, FilterConfig())
        assert masks.m_left.data.tolist() == [[1.0, 0.0]]
        assert masks.m_right.data.tolist() == [[0.0, 1.0]]
        assert masks.m_full.data.tolist() == [[0.0, 0.0]]

    def test_all_above_epsilon_gives_empty_masks(self):
        d = ImagePlane(np.full((3, 3), 0.5, dtype=np.float32))
        masks = occlusion_masks(d, d, FilterConfig())
        assert masks.m_left.data.sum() == 0
        assert masks.m_full.data.sum() == 0

    def test_full_requires_both(self):
        d_l = ImagePlane(np.array([[0.0]], dtype=np.float32))
        d_r = ImagePlane(np.array([[0.0]], dtype=np.float32))
        masks = occlusion_masks(d_l, d_r, FilterConfig())
        assert masks.m_full.data[0, 0] == 1.0

    def test_config_ordering_enforced(self):
        with pytest.raises(ConfigError):
            FilterConfig(epsilon=0.005, valid_floor=0.01)


class TestFillPartial:
    def test_passthrough_and_substitution(self):
        c_l = ImagePlane(np.array([[[0.1, 0.2, 0.3], [0.0, 0.0, 0.0]]], dtype=np.float32))
        c_r = ImagePlane(np.array([[[0.9, 0.9, 0.9], [0.2, 0.4, 0.6]]], dtype=np.float32))
        d_l = ImagePlane(np.array([[0.5, 0.0]], dtype=np.float32))
        d_r = ImagePlane(np.array([[0.5, 0.5]], dtype=np.float32))
        masks = occlusion_masks(d_l, d_r, FilterConfig())
        p_l, p_r = fill_partial(c_l, c_r, masks)
        np.testing.assert_allclose(p_l.data[0, 0], [0.1, 0.2, 0.3])  # unmasked
        np.testing.assert_allclose(p_l.data[0, 1], [0.2, 0.4, 0.6])  # taken from right
        np.testing.assert_allclose(p_r.data[0, 1], [0.2, 0.4, 0.6])

    def test_hole_set_shrinks_to_exactly_m_full(self):
        es = _occluder_case()
        cfg = FilterConfig()
        masks = occlusion_masks(es.from_left.inv_depth, es.from_right.inv_depth, cfg)
        p_l, _ = fill_partial(es.from_left.color, es.from_right.color, masks)
        holes_before = int((es.from_left.covered.data == 0).sum())
        # a pixel is still a hole iff it was a splat hole in both views
        still_hole = (es.from_left.covered.data == 0) & (es.from_right.covered.data == 0)
        assert masks.m_full.data.astype(bool)[still_hole].all()
        holes_after = int(still_hole.sum())
        assert 0 < holes_after < holes_before


class TestFillFull:
    def test_unmasked_pixels_copied_exactly(self):
        rng = np.random.default_rng(0)
        p = ImagePlane(rng.random((9, 9, 3)).astype(np.float32))
        d = ImagePlane(rng.uniform(0.2, 1.0, (9, 9)).astype(np.float32))
        mask = np.zeros((9, 9), dtype=np.float32)
        mask[4, 4] = 1.0
        out = fill_full(p, d, ImagePlane(mask), FilterConfig())
        keep = mask == 0
        np.testing.assert_array_equal(out.data[keep], p.data[keep])

    def test_hand_traced_background_selection(self):
        # 5x5 toy grid: neighborhood depths {0.2, 0.8}; only the 0.2 side
        # (strictly below the 0.5 midpoint) may contribute
        p = np.zeros((5, 5, 3), dtype=np.float32)
        d = np.zeros((5, 5), dtype=np.float32)
        d[:, :2] = 0.2
        p[:, :2] = (0.1, 0.5, 0.9)
        d[:, 3:] = 0.8
        p[:, 3:] = (1.0, 1.0, 1.0)
        mask = np.zeros((5, 5), dtype=np.float32)
        mask[2, 2] = 1.0
        cfg = FilterConfig()
        out = fill_full(ImagePlane(p), ImagePlane(d), ImagePlane(mask), cfg)

        kernel = gaussian_kernel(cfg.kernel_size, cfg.kernel_sigma)
        r = cfg.kernel_size // 2
        acc = np.zeros(3)
        wacc = 0.0
        for y in range(5):
            for x in range(5):
                if d[y, x] > cfg.valid_floor and d[y, x] < 0.5 * (0.2 + 0.8):
                    kw = kernel[y - 2 + r, x - 2 + r]
                    acc += kw * p[y, x]
                    wacc += kw
        np.testing.assert_allclose(out.data[2, 2], acc / wacc, rtol=1e-6)
        np.testing.assert_allclose(out.data[2, 2], [0.1, 0.5, 0.9], rtol=1e-5)

    def test_no_valid_neighbors_falls_back_to_input(self):
        p = ImagePlane(np.full((3, 3, 3), 0.25, dtype=np.float32))
        d = ImagePlane(np.zeros((3, 3), dtype=np.float32))
        mask = ImagePlane(np.ones((3, 3), dtype=np.float32))
        out = fill_full(p, d, mask, FilterConfig())
        np.testing.assert_array_equal(out.data, p.data)

    def test_uniform_depth_neighborhood_fills_from_background(self):
        # min == max: the whole (background-only) window contributes
        p = ImagePlane(np.full((5, 5, 3), 0.7, dtype=np.float32))
        d = ImagePlane(np.full((5, 5), 0.4, dtype=np.float32))
        mask = np.zeros((5, 5), dtype=np.float32)
        mask[2, 2] = 1.0
        out = fill_full(p, d, ImagePlane(mask), FilterConfig())
        np.testing.assert_allclose(out.data, p.data, rtol=1e-6)

    def test_single_pixel_image(self):
        p = ImagePlane(np.full((1, 1, 3), 0.3, dtype=np.float32))
        d = ImagePlane(np.zeros((1, 1), dtype=np.float32))
        out = fill_full(p, d, ImagePlane(np.ones((1, 1), dtype=np.float32)), FilterConfig())
        np.testing.assert_array_equal(out.data, p.data)


class TestFilterTargetView:
    def test_no_occluders_output_equals_splat_exactly(self):
        scene = SceneSpec(
            layers=(PlaneLayer(2.0, TextureSpec("value_noise", 0.18, seed=3)),)
        )
        rig = build_rig(0.093, 0.02, 0.06, 0.4, 80.0, 160, 120)
        left, _ = render(scene, rig.cam_left)
        right, _ = render(scene, rig.cam_right)
        es = splat_all(left, right, rig)["eye_left"]
        # restrict to the region covered by both views (no border holes)
        both = (es.from_left.covered.data > 0) & (es.from_right.covered.data > 0)
        fv = filter_target_view(es, FilterConfig())
        np.testing.assert_array_equal(fv.f_left.data[both], es.from_left.color.data[both])

    def test_occluder_scene_leaves_no_unprocessed_holes(self):
        es = _occluder_case()
        fv = filter_target_view(es, FilterConfig())
        m_full = fv.masks.m_full.data.astype(bool)
        assert m_full.any()
        # every fully disoccluded pixel was rewritten by the background fill
        # (the scene guarantees valid background depth nearby)
        changed = (fv.f_left.data != es.from_left.color.data).any(axis=2)
        p_l, _ = fill_partial(es.from_left.color, es.from_right.color, fv.masks)
        filled = (fv.f_left.data != p_l.data).any(axis=2)
        assert filled[m_full].all()
        assert not filled[~m_full].any()

    def test_determinism(self):
        es = _occluder_case()
        a = filter_target_view(es, FilterConfig())
        b = filter_target_view(es, FilterConfig())
        np.testing.assert_array_equal(a.f_left.data, b.f_left.data)
        np.testing.assert_array_equal(a.f_right.data, b.f_right.data)
