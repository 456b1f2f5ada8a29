"""Crop/resize geometry: rounding rule, kernels, exact index maps."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coz.geometry import (
    BICUBIC,
    NEAREST,
    GeometryError,
    Rect,
    center_crop,
    resample,
    resize,
    shrink_rect,
    zoom_window,
)


class TestShrinkRect:
    def test_telescoping_512_by_4(self):
        rect = Rect(0, 0, 512, 512)
        seen = []
        for _ in range(4):
            rect = shrink_rect(rect, 4)
            seen.append(rect.as_tuple())
        assert seen == [
            (192, 192, 128, 128),
            (240, 240, 32, 32),
            (252, 252, 8, 8),
            (255, 255, 2, 2),
        ]

    def test_odd_side_floors_origin(self):
        rect = shrink_rect(Rect(10, 20, 7, 7), 2)
        assert rect.as_tuple() == (10 + 2, 20 + 2, 3, 3)

    def test_side_never_drops_below_one(self):
        rect = shrink_rect(Rect(0, 0, 3, 3), 4)
        assert (rect.w, rect.h) == (1, 1)

    def test_scale_below_two_rejected(self):
        with pytest.raises(GeometryError):
            shrink_rect(Rect(0, 0, 8, 8), 1)

    @given(
        side=st.integers(min_value=1, max_value=4096),
        s=st.integers(min_value=2, max_value=16),
        x=st.integers(min_value=0, max_value=1000),
        y=st.integers(min_value=0, max_value=1000),
    )
    @settings(max_examples=200)
    def test_contained_and_rounded(self, side, s, x, y):
        outer = Rect(x, y, side, side)
        inner = shrink_rect(outer, s)
        assert outer.contains(inner)
        assert inner.w == max(1, side // s)
        assert inner.h == inner.w


class TestNearest:
    def test_checkerboard_exact_map(self):
        board = np.array([[0.0, 1.0], [1.0, 0.0]])
        out = resample(board, 4, 4, NEAREST)
        expected = np.array(
            [
                [0.0, 0.0, 1.0, 1.0],
                [0.0, 0.0, 1.0, 1.0],
                [1.0, 1.0, 0.0, 0.0],
                [1.0, 1.0, 0.0, 0.0],
            ]
        )
        assert np.array_equal(out, expected)

    def test_upscale_makes_exact_blocks(self):
        rng = np.random.default_rng(0)
        src = rng.random((128, 128))
        out = resample(src, 512, 512, NEAREST)
        assert np.array_equal(out, np.repeat(np.repeat(src, 4, axis=0), 4, axis=1))

    def test_center_pixel_mapping_rule(self):
        # src index for output j is ((2j+1)*src_n) // (2*dst_n)
        src = np.arange(5, dtype=float).reshape(1, 5)
        out = resample(src, 1, 3, NEAREST)
        expected_cols = [((2 * j + 1) * 5) // 6 for j in range(3)]
        assert out.tolist() == [[float(c) for c in expected_cols]]

    def test_downscale_identity_composition(self):
        rng = np.random.default_rng(1)
        src = rng.random((64, 64, 3))
        up = resample(src, 256, 256, NEAREST)
        back = resample(up, 64, 64, NEAREST)
        assert np.array_equal(back, src)


class TestBicubic:
    def test_constant_stays_constant(self):
        img = np.full((32, 32), 0.37)
        out = resample(img, 128, 128, BICUBIC)
        assert np.allclose(out, 0.37, atol=1e-12)

    def test_linear_ramp_preserved_in_interior(self):
        w = 128
        ramp = np.tile(np.arange(w) / (w - 1), (16, 1))
        out = resample(ramp, 16, 512, BICUBIC)
        u = (np.arange(512) + 0.5) * (w / 512) - 0.5
        interior = (u >= 1) & (u <= w - 2)
        expected = u / (w - 1)
        assert np.max(np.abs(out[8, interior] - expected[interior])) < 1e-6

    def test_output_clamped_to_unit_range(self):
        img = np.zeros((16, 16))
        img[::2, ::2] = 1.0
        out = resample(img, 64, 64, BICUBIC)
        assert out.min() >= 0.0 and out.max() <= 1.0

    def test_identity_when_size_unchanged(self):
        rng = np.random.default_rng(2)
        img = rng.random((32, 32, 3))
        assert np.array_equal(resample(img, 32, 32, BICUBIC), img)

    def test_rgb_channels_independent(self):
        rng = np.random.default_rng(3)
        img = rng.random((24, 24, 3))
        out = resample(img, 96, 96, BICUBIC)
        for c in range(3):
            assert np.allclose(out[..., c], resample(img[..., c], 96, 96, BICUBIC))


class TestCropAndZoom:
    def test_center_crop_values(self):
        img = np.arange(16, dtype=float).reshape(4, 4) / 16.0
        out = center_crop(img, 4)
        assert out.shape == (1, 1)
        assert out[0, 0] == img[1, 1]  # offset (4 - 1) // 2 = 1

    def test_center_crop_divisibility_error(self):
        with pytest.raises(GeometryError):
            center_crop(np.zeros((10, 10)), 4)

    def test_center_crop_requires_square(self):
        with pytest.raises(GeometryError):
            center_crop(np.zeros((8, 12)), 2)

    def test_zoom_window_constant(self):
        img = np.full((512, 512, 3), 0.5)
        out = zoom_window(img, 4, NEAREST)
        assert out.shape == (512, 512, 3)
        assert np.array_equal(out, img)

    def test_zoom_window_is_crop_then_resize(self):
        rng = np.random.default_rng(4)
        img = rng.random((64, 64))
        manual = resample(center_crop(img, 4), 64, 64, BICUBIC)
        assert np.array_equal(zoom_window(img, 4, BICUBIC), manual)

    def test_resize_square_wrapper(self):
        rng = np.random.default_rng(5)
        img = rng.random((32, 32))
        assert np.array_equal(resize(img, 64, NEAREST), resample(img, 64, 64, NEAREST))

    def test_bad_kernel_rejected(self):
        with pytest.raises(GeometryError):
            resample(np.zeros((4, 4)), 8, 8, "lanczos")

    @given(
        side=st.sampled_from([8, 16, 32]),
        s=st.sampled_from([2, 4, 8]),
        kernel=st.sampled_from([NEAREST, BICUBIC]),
    )
    @settings(max_examples=30)
    def test_zoom_window_preserves_side_and_range(self, side, s, kernel):
        rng = np.random.default_rng(side * s)
        img = rng.random((side, side))
        out = zoom_window(img, s, kernel)
        assert out.shape == (side, side)
        assert out.min() >= 0.0 and out.max() <= 1.0
