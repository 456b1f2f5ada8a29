"""Horizontal zoom-strip rendering from a finished chain transcript.

Panels show the input followed by each magnification state, labelled with
the cumulative factor; the input panel carries an inset rectangle marking
the region the final state depicts.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from .geometry import BICUBIC, Rect, resize
from .wire import load_png, to_uint8

PANEL_SIDE = 256
GUTTER = 8
LABEL_BAND = 20
INSET_COLOR = (255, 64, 64)


@dataclass
class MontageResult:
    image: np.ndarray  # uint8 RGB
    labels: list[str]
    inset_rect_display: Rect


def scale_rect_to_display(rect: Rect, base_side: int, panel_side: int) -> Rect:
    """Map original-image coordinates onto a panel of the given side."""
    f = panel_side / base_side
    x = int(round(rect.x * f))
    y = int(round(rect.y * f))
    w = max(1, int(round(rect.w * f)))
    h = max(1, int(round(rect.h * f)))
    return Rect(x=x, y=y, w=w, h=h)


def render_montage(
    states: list,
    image_id: str = "image",
    panel_side: int = PANEL_SIDE,
) -> MontageResult:
    """Build the strip from ScaleStates (index 0 first)."""
    if not states:
        raise ValueError("montage needs at least one state")
    base_side = states[0].side()
    labels = [f"{int(s.cumulative_factor)}x" for s in states]
    inset = scale_rect_to_display(states[-1].source_rect, base_side, panel_side)

    n = len(states)
    width = n * panel_side + (n + 1) * GUTTER
    height = panel_side + LABEL_BAND + 2 * GUTTER
    canvas = Image.new("RGB", (width, height), (24, 24, 24))
    draw = ImageDraw.Draw(canvas)
    for k, state in enumerate(states):
        panel = to_uint8(resize(state.image, panel_side, BICUBIC))
        x0 = GUTTER + k * (panel_side + GUTTER)
        canvas.paste(Image.fromarray(panel, mode="RGB"), (x0, GUTTER))
        if k == 0 and n > 1:
            draw.rectangle(
                [x0 + inset.x, GUTTER + inset.y,
                 x0 + inset.x + inset.w - 1, GUTTER + inset.y + inset.h - 1],
                outline=INSET_COLOR,
                width=1,
            )
        draw.text((x0, panel_side + GUTTER + 4), labels[k], fill=(230, 230, 230))
    return MontageResult(image=np.asarray(canvas), labels=labels, inset_rect_display=inset)


def save_montage(result: MontageResult, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(result.image, mode="RGB").save(path, format="PNG")
    return path


@dataclass
class _LoadedState:
    """Just enough of a ScaleState to render: image, rect, factor."""

    image: np.ndarray
    source_rect: Rect
    cumulative_factor: int

    def side(self) -> int:
        return int(self.image.shape[0])


def load_transcript_states(transcript_path, images_dir=None) -> tuple[list[_LoadedState], str]:
    """Rebuild renderable states from a transcript JSON plus its step PNGs."""
    transcript_path = Path(transcript_path)
    doc = json.loads(transcript_path.read_text(encoding="utf-8"))
    image_id = doc["image_id"]
    images_dir = Path(images_dir) if images_dir else transcript_path.parent
    states = []
    for step in doc["steps"]:
        factor_num, _, factor_den = str(step["cumulative_factor"]).partition("/")
        factor = int(factor_num) if not factor_den else int(factor_num) // int(factor_den)
        png = images_dir / f"{image_id}_step{step['index']}_x{factor}.png"
        if not png.exists():
            raise FileNotFoundError(f"missing step raster {png}")
        x, y, w, h = step["source_rect"]
        states.append(
            _LoadedState(
                image=load_png(png),
                source_rect=Rect(x=x, y=y, w=w, h=h),
                cumulative_factor=factor,
            )
        )
    return states, image_id
