"""Zoom-strip rendering: panel layout, labels, inset mapping."""

import numpy as np
import pytest

from coz.backends import NearestBackend
from coz.chain import ZoomConfig, make_initial_state, run_chain
from coz.geometry import Rect
from coz.montage import (
    GUTTER,
    LABEL_BAND,
    load_transcript_states,
    render_montage,
    save_montage,
    scale_rect_to_display,
)
from coz.prompts import NullPrompter
from coz.wire import load_png


def _transcript(side=64, n=2, s=2):
    img = np.random.default_rng(0).random((side, side, 3))
    x0 = make_initial_state(img, side)
    cfg = ZoomConfig(scale_s=s, recursions_n=n, base_resolution=side, backend_id="nearest")
    return run_chain(x0, cfg, NearestBackend(), NullPrompter(), image_id="pine")


class TestInsetMapping:
    def test_full_rect_maps_to_full_panel(self):
        out = scale_rect_to_display(Rect(0, 0, 512, 512), 512, 256)
        assert out.as_tuple() == (0, 0, 256, 256)

    def test_center_rect_scales_linearly(self):
        out = scale_rect_to_display(Rect(192, 192, 128, 128), 512, 256)
        assert out.as_tuple() == (96, 96, 64, 64)

    def test_tiny_rect_never_vanishes(self):
        out = scale_rect_to_display(Rect(255, 255, 2, 2), 512, 64)
        assert out.w >= 1 and out.h >= 1


class TestRender:
    def test_strip_dimensions_and_labels(self):
        t = _transcript(n=2)
        result = render_montage(t.states, image_id=t.image_id, panel_side=64)
        assert result.labels == ["1x", "2x", "4x"]
        expected_w = 3 * 64 + 4 * GUTTER
        expected_h = 64 + LABEL_BAND + 2 * GUTTER
        assert result.image.shape == (expected_h, expected_w, 3)
        assert result.image.dtype == np.uint8

    def test_inset_marks_final_window(self):
        t = _transcript(side=64, n=2, s=2)
        result = render_montage(t.states, panel_side=64)
        # panel side == base side here, so the rect passes through unchanged
        assert result.inset_rect_display.as_tuple() == t.states[-1].source_rect.as_tuple()

    def test_empty_states_rejected(self):
        with pytest.raises(ValueError):
            render_montage([])


class TestRoundtrip:
    def test_save_load_render(self, tmp_path):
        t = _transcript()
        t.save_json(tmp_path / "pine_transcript.json")
        t.save_images(tmp_path)
        states, image_id = load_transcript_states(tmp_path / "pine_transcript.json")
        assert image_id == "pine"
        assert len(states) == 3
        assert [s.cumulative_factor for s in states] == [1, 2, 4]
        assert states[2].source_rect.as_tuple() == t.states[2].source_rect.as_tuple()
        result = render_montage(states, image_id=image_id, panel_side=32)
        path = save_montage(result, tmp_path / "strip.png")
        assert load_png(path).shape[0] == 32 + LABEL_BAND + 2 * GUTTER

    def test_missing_step_raster_raises(self, tmp_path):
        t = _transcript()
        t.save_json(tmp_path / "pine_transcript.json")
        t.save_images(tmp_path)
        (tmp_path / "pine_step2_x4.png").unlink()
        with pytest.raises(FileNotFoundError):
            load_transcript_states(tmp_path / "pine_transcript.json")
