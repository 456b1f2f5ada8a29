"""HTTP wire protocol: PNG codec, typed failures, and the three JSON clients.

Every remote call carries a correlation id and fails loudly with a typed
error; nothing is silently substituted at this layer.  Transport faults
(connection refused, timeout) are retried exactly once; application faults
(non-200, malformed payloads) are not retried.
"""

from __future__ import annotations

import base64
import io
import math
from pathlib import Path
from typing import Optional

import numpy as np
import requests
from PIL import Image


class WireError(RuntimeError):
    """Base for remote-call failures; carries the correlation id."""

    def __init__(self, message: str, request_id: Optional[str] = None):
        super().__init__(message)
        self.request_id = request_id


class TransportError(WireError):
    """Connection or timeout failure that persisted through one retry."""


class ApplicationError(WireError):
    """Server answered with a non-200 status."""


class ProtocolError(WireError):
    """Response arrived but violates the wire schema."""


class DimensionError(ProtocolError):
    """Returned image does not match the requested dimensions."""


# PNG payloads are 8-bit RGB: encode rounds [0,1] floats to bytes, decode
# divides by 255.  This pair is part of the golden-test contract.

def to_uint8(arr: np.ndarray) -> np.ndarray:
    a = np.asarray(arr, dtype=np.float64)
    if a.ndim == 2:
        a = np.stack([a, a, a], axis=-1)
    if a.ndim != 3 or a.shape[2] != 3:
        raise ValueError(f"expected HxW or HxWx3 raster, got shape {arr.shape}")
    return np.clip(np.rint(a * 255.0), 0, 255).astype(np.uint8)


def from_uint8(arr: np.ndarray) -> np.ndarray:
    return np.clip(np.asarray(arr, dtype=np.float64) / 255.0, 0.0, 1.0)


def encode_png(arr: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(to_uint8(arr), mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def decode_png(data: bytes) -> np.ndarray:
    with Image.open(io.BytesIO(data)) as im:
        return from_uint8(np.asarray(im.convert("RGB")))


def png_b64(arr: np.ndarray) -> str:
    return base64.b64encode(encode_png(arr)).decode("ascii")


def arr_from_png_b64(s: str) -> np.ndarray:
    return decode_png(base64.b64decode(s))


def save_png(arr: np.ndarray, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(to_uint8(arr), mode="RGB").save(path, format="PNG")
    return path


def load_png(path) -> np.ndarray:
    with Image.open(path) as im:
        return from_uint8(np.asarray(im.convert("RGB")))


class JsonHttpClient:
    """POST-JSON transport shared by the three protocol clients."""

    def __init__(self, base_url: str, timeout_s: float = 30.0, session=None):
        self.base_url = base_url.rstrip("/")
        self.timeout_s = timeout_s
        self._session = session or requests.Session()

    def post_json(self, path: str, payload: dict, request_id: Optional[str] = None) -> dict:
        url = self.base_url + path
        last_exc = None
        for _attempt in range(2):  # one initial try + exactly one retry
            try:
                resp = self._session.post(url, json=payload, timeout=self.timeout_s)
            except (requests.Timeout, requests.ConnectionError) as exc:
                last_exc = exc
                continue
            if resp.status_code != 200:
                raise ApplicationError(
                    f"POST {path} returned HTTP {resp.status_code}: {resp.text[:200]}",
                    request_id,
                )
            try:
                body = resp.json()
            except ValueError as exc:
                raise ProtocolError(f"POST {path} returned a non-JSON body", request_id) from exc
            if not isinstance(body, dict):
                raise ProtocolError(f"POST {path} returned a non-object body", request_id)
            return body
        raise TransportError(
            f"POST {path} transport failure after one retry: {last_exc}", request_id
        ) from last_exc


def _expect_str(body: dict, key: str, request_id: Optional[str]) -> str:
    val = body.get(key)
    if not isinstance(val, str):
        raise ProtocolError(f"response field {key!r} missing or not a string", request_id)
    return val


def _check_request_id(body: dict, request_id: str) -> None:
    echoed = _expect_str(body, "request_id", request_id)
    if echoed != request_id:
        raise ProtocolError(
            f"request_id mismatch: sent {request_id!r}, got {echoed!r}", request_id
        )


class SRClient(JsonHttpClient):
    """POST /v1/sr: one magnification request, image in/image out."""

    def upscale(
        self,
        image: np.ndarray,
        prompt: str,
        scale: int,
        seed: int,
        request_id: str,
    ) -> tuple[np.ndarray, dict]:
        payload = {
            "request_id": request_id,
            "image_png_b64": png_b64(image),
            "prompt": prompt,
            "scale": int(scale),
            "seed": int(seed),
        }
        body = self.post_json("/v1/sr", payload, request_id)
        _check_request_id(body, request_id)
        try:
            out = arr_from_png_b64(_expect_str(body, "image_png_b64", request_id))
        except ProtocolError:
            raise
        except Exception as exc:
            raise ProtocolError(f"undecodable image payload: {exc}", request_id) from exc
        if out.shape[:2] != image.shape[:2]:
            raise DimensionError(
                f"expected {image.shape[0]}x{image.shape[1]} output, "
                f"got {out.shape[0]}x{out.shape[1]}",
                request_id,
            )
        meta = body.get("meta")
        return out, meta if isinstance(meta, dict) else {}


class PromptClient(JsonHttpClient):
    """POST /v1/prompt: ordered images plus a template, text back."""

    def generate(
        self,
        images: list[np.ndarray],
        template_id: str,
        temperature: float,
        max_tokens: int,
        seed: int,
        request_id: str,
        template_text: Optional[str] = None,
        description: Optional[str] = None,
    ) -> str:
        if not 1 <= len(images) <= 2:
            raise ValueError(f"prompt requests carry 1 or 2 images, got {len(images)}")
        if max_tokens < 1:
            raise ValueError(f"max_tokens must be >= 1, got {max_tokens}")
        payload = {
            "request_id": request_id,
            "images_png_b64": [png_b64(im) for im in images],
            "template_id": template_id,
            "temperature": float(temperature),
            "max_tokens": int(max_tokens),
            "seed": int(seed),
        }
        if template_text is not None:
            payload["template_text"] = template_text
        if description is not None:
            payload["description"] = description
        body = self.post_json("/v1/prompt", payload, request_id)
        _check_request_id(body, request_id)
        return _expect_str(body, "text", request_id)


class MetricClient(JsonHttpClient):
    """POST /v1/metric: one image, one named metric, one float back."""

    def score(self, image: np.ndarray, metric: str) -> float:
        payload = {"image_png_b64": png_b64(image), "metric": metric}
        body = self.post_json("/v1/metric", payload)
        val = body.get("score")
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            raise ProtocolError(f"metric {metric!r} returned non-numeric score {val!r}")
        score = float(val)
        if not math.isfinite(score):
            raise ProtocolError(f"metric {metric!r} returned non-finite score {score!r}")
        return score
