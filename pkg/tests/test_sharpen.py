import numpy as np
import pytest

from stereopass.errors import ConfigError
from stereopass.imaging import ImagePlane, RgbdView
from stereopass.sharpen import SharpenConfig, sharpen_rgbd


def _two_plane_view(w=8, h=8, edge_col=4, flying=True):
    """Near plane right of edge_col, far plane left, optional 1-px flying
    transition column carrying an intermediate depth."""
    inv = np.full((h, w), 0.5, dtype=np.float32)
    inv[:, edge_col + 1 :] = 2.0
    color = np.zeros((h, w, 3), dtype=np.float32)
    color[:, : edge_col + 1] = (0.2, 0.3, 0.4)
    color[:, edge_col + 1 :] = (0.8, 0.7, 0.6)
    if flying:
        inv[:, edge_col] = 1.25
        color[:, edge_col] = (0.5, 0.5, 0.5)
    return RgbdView(ImagePlane(color), ImagePlane(inv))


class TestSharpen:
    def test_constant_depth_identity(self):
        rng = np.random.default_rng(0)
        view = RgbdView(
            ImagePlane(rng.random((10, 10, 3)).astype(np.float32)),
            ImagePlane(np.full((10, 10), 1.0, dtype=np.float32)),
        )
        out = sharpen_rgbd(view, SharpenConfig())
        np.testing.assert_array_equal(out.color.data, view.color.data)
        np.testing.assert_array_equal(out.inv_depth.data, view.inv_depth.data)

    def test_flying_column_snaps_to_a_plane(self):
        # hand-constructed 8x8 case: the intermediate 1.25 depth must vanish
        view = _two_plane_view()
        out = sharpen_rgbd(view, SharpenConfig())
        assert not np.isin(1.25, out.inv_depth.data)
        assert set(np.unique(out.inv_depth.data)) <= {np.float32(0.5), np.float32(2.0)}
        # no output depth strictly between the planes anywhere
        between = (out.inv_depth.data > 0.5) & (out.inv_depth.data < 2.0)
        assert not between.any()

    def test_isolated_spike_removed(self):
        inv = np.full((9, 9), 1.0, dtype=np.float32)
        inv[4, 4] = 3.0
        color = np.full((9, 9, 3), 0.5, dtype=np.float32)
        color[4, 4] = (1.0, 0.0, 0.0)
        out = sharpen_rgbd(RgbdView(ImagePlane(color), ImagePlane(inv)), SharpenConfig())
        assert out.inv_depth.data[4, 4] == 1.0
        np.testing.assert_array_equal(out.color.data[4, 4], [0.5, 0.5, 0.5])

    def test_output_values_subset_of_input(self):
        rng = np.random.default_rng(3)
        inv = np.full((12, 12), 0.4, dtype=np.float32)
        inv[3:9, 5:] = 2.0  # one rectangular near object
        color = rng.random((12, 12, 3)).astype(np.float32)
        view = RgbdView(ImagePlane(color), ImagePlane(inv))
        out = sharpen_rgbd(view, SharpenConfig())
        assert np.isin(out.inv_depth.data, inv).all()
        flat_in = color.reshape(-1, 3)
        flat_out = out.color.data.reshape(-1, 3)
        present = (flat_out[:, None, :] == flat_in[None, :, :]).all(-1).any(1)
        assert present.all()

    def test_idempotent_on_two_plane_case(self):
        once = sharpen_rgbd(_two_plane_view(), SharpenConfig())
        twice = sharpen_rgbd(once, SharpenConfig())
        np.testing.assert_array_equal(once.inv_depth.data, twice.inv_depth.data)
        np.testing.assert_array_equal(once.color.data, twice.color.data)

    def test_bimodal_histogram_in_dilated_band(self):
        out = sharpen_rgbd(_two_plane_view(w=16, edge_col=8), SharpenConfig())
        band = out.inv_depth.data[:, 5:12]
        values = set(np.unique(band))
        assert values <= {np.float32(0.5), np.float32(2.0)}
        assert len(values) == 2

    def test_everything_edge_rejected(self):
        inv = np.indices((6, 6)).sum(0).astype(np.float32)  # steep global ramp
        view = RgbdView(ImagePlane(np.zeros((6, 6, 3), np.float32)), ImagePlane(inv))
        with pytest.raises(ConfigError):
            sharpen_rgbd(view, SharpenConfig(edge_threshold_rel=0.01))

    def test_config_validation(self):
        with pytest.raises(ConfigError):
            SharpenConfig(edge_threshold_rel=0.0)
        with pytest.raises(ConfigError):
            SharpenConfig(dilate_radius=0)
