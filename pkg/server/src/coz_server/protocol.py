"""Request parsing and the PNG payload codec for the three endpoints.

Images travel as base64 PNG, 8-bit RGB. Parsing is strict about required
fields and types but tolerates unknown extra fields, so additive client
extensions keep working.
"""

from __future__ import annotations

import base64
import binascii
import io
from dataclasses import dataclass

import numpy as np
from PIL import Image


class BadRequest(ValueError):
    """Client-side schema violation; maps to HTTP 400."""


def decode_image_b64(s: str) -> np.ndarray:
    if not isinstance(s, str) or not s:
        raise BadRequest("image_png_b64 must be a non-empty base64 string")
    try:
        data = base64.b64decode(s, validate=True)
    except (binascii.Error, ValueError) as exc:
        raise BadRequest(f"invalid base64 image payload: {exc}") from exc
    try:
        with Image.open(io.BytesIO(data)) as im:
            return np.asarray(im.convert("RGB"), dtype=np.uint8)
    except Exception as exc:
        raise BadRequest(f"image payload is not decodable PNG: {exc}") from exc


def encode_image_b64(arr: np.ndarray) -> str:
    buf = io.BytesIO()
    Image.fromarray(np.ascontiguousarray(arr, dtype=np.uint8), mode="RGB").save(
        buf, format="PNG"
    )
    return base64.b64encode(buf.getvalue()).decode("ascii")


def _require(payload: dict, key: str, kind, what: str):
    if key not in payload:
        raise BadRequest(f"missing required field {key!r}")
    val = payload[key]
    if kind is float and isinstance(val, int) and not isinstance(val, bool):
        val = float(val)
    if not isinstance(val, kind) or isinstance(val, bool) and kind is not bool:
        raise BadRequest(f"field {key!r} must be {what}")
    return val


@dataclass
class SrRequest:
    request_id: str
    image: np.ndarray
    prompt: str
    scale: int
    seed: int


def parse_sr_request(payload: dict) -> SrRequest:
    rid = _require(payload, "request_id", str, "a string")
    image = decode_image_b64(_require(payload, "image_png_b64", str, "a string"))
    prompt = _require(payload, "prompt", str, "a string")
    scale = _require(payload, "scale", int, "an integer")
    seed = _require(payload, "seed", int, "an integer")
    if scale < 1:
        raise BadRequest(f"scale must be >= 1, got {scale}")
    return SrRequest(request_id=rid, image=image, prompt=prompt, scale=scale, seed=seed)


@dataclass
class PromptRequest:
    request_id: str
    images: list[np.ndarray]
    template_id: str
    template_text: str
    description: str
    temperature: float
    max_tokens: int
    seed: int


def parse_prompt_request(payload: dict) -> PromptRequest:
    rid = _require(payload, "request_id", str, "a string")
    raw_images = _require(payload, "images_png_b64", list, "a list")
    if not 1 <= len(raw_images) <= 2:
        raise BadRequest(f"images_png_b64 must hold 1 or 2 images, got {len(raw_images)}")
    images = [decode_image_b64(s) for s in raw_images]
    template_id = _require(payload, "template_id", str, "a string")
    temperature = _require(payload, "temperature", float, "a number")
    max_tokens = _require(payload, "max_tokens", int, "an integer")
    seed = _require(payload, "seed", int, "an integer")
    if temperature < 0:
        raise BadRequest(f"temperature must be >= 0, got {temperature}")
    if max_tokens < 1:
        raise BadRequest(f"max_tokens must be >= 1, got {max_tokens}")
    template_text = payload.get("template_text", "")
    if not isinstance(template_text, str):
        raise BadRequest("field 'template_text' must be a string")
    description = payload.get("description", "")
    if not isinstance(description, str):
        raise BadRequest("field 'description' must be a string")
    return PromptRequest(
        request_id=rid,
        images=images,
        template_id=template_id,
        template_text=template_text,
        description=description,
        temperature=float(temperature),
        max_tokens=max_tokens,
        seed=seed,
    )


@dataclass
class MetricRequest:
    image: np.ndarray
    metric: str


def parse_metric_request(payload: dict) -> MetricRequest:
    image = decode_image_b64(_require(payload, "image_png_b64", str, "a string"))
    metric = _require(payload, "metric", str, "a string")
    if not metric:
        raise BadRequest("field 'metric' must be non-empty")
    return MetricRequest(image=image, metric=metric)
