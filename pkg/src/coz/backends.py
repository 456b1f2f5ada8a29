"""SR backend contract plus the built-in analytic and remote backends.

Every backend maps one base-resolution scale-state to the next: crop the
center 1/s window, bring it back to full side.  Analytic backends do this
with a fixed resampling kernel and ignore the prompt; the remote backend
performs the crop/resize locally with the shared bicubic kernel and sends
the prepared window to a model server for refinement, so the served model
always sees the already-cropped, already-resized window.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .geometry import BICUBIC, NEAREST, zoom_window
from .wire import SRClient, WireError


class BackendError(RuntimeError):
    """Backend failure; carries the correlation id for the transcript."""

    def __init__(self, message: str, request_id: Optional[str] = None):
        super().__init__(message)
        self.request_id = request_id


@dataclass(frozen=True)
class SRRequest:
    image: np.ndarray
    prompt_text: str
    scale_hint: int
    request_id: str
    seed: int = 0


@dataclass
class SRResponse:
    image: np.ndarray
    backend_meta: dict = field(default_factory=dict)


class Backend:
    """Callable request -> response; subclasses set ``identifier``."""

    identifier = "abstract"

    def __call__(self, req: SRRequest) -> SRResponse:
        raise NotImplementedError


def _validate_request(req: SRRequest) -> None:
    img = req.image
    if img.ndim not in (2, 3) or img.shape[0] != img.shape[1]:
        raise BackendError(f"request image must be square, got {img.shape}", req.request_id)
    if req.scale_hint < 2:
        raise BackendError(f"scale_hint must be >= 2, got {req.scale_hint}", req.request_id)
    if img.shape[0] % req.scale_hint != 0:
        raise BackendError(
            f"side {img.shape[0]} not divisible by scale {req.scale_hint}", req.request_id
        )


class NearestBackend(Backend):
    """Nearest-neighbor zoom of the center window; prompt ignored."""

    identifier = "nearest"

    def __call__(self, req: SRRequest) -> SRResponse:
        _validate_request(req)
        out = zoom_window(req.image, req.scale_hint, NEAREST)
        return SRResponse(image=out, backend_meta={"backend": self.identifier})


class BicubicBackend(Backend):
    """Catmull-Rom bicubic zoom of the center window; prompt ignored."""

    identifier = "bicubic"

    def __call__(self, req: SRRequest) -> SRResponse:
        _validate_request(req)
        out = zoom_window(req.image, req.scale_hint, BICUBIC)
        return SRResponse(image=out, backend_meta={"backend": self.identifier})


class RemoteSRBackend(Backend):
    """Sends the prepared zoom window to a model server over /v1/sr."""

    identifier = "remote"

    def __init__(self, client: SRClient):
        self.client = client

    def __call__(self, req: SRRequest) -> SRResponse:
        _validate_request(req)
        window = zoom_window(req.image, req.scale_hint, BICUBIC)
        try:
            out, meta = self.client.upscale(
                window,
                prompt=req.prompt_text,
                scale=req.scale_hint,
                seed=req.seed,
                request_id=req.request_id,
            )
        except WireError as exc:
            raise BackendError(str(exc), exc.request_id or req.request_id) from exc
        meta = dict(meta)
        meta.setdefault("backend", self.identifier)
        return SRResponse(image=out, backend_meta=meta)


def make_backend(backend_id: str, sr_url: Optional[str] = None, timeout_s: float = 30.0) -> Backend:
    if backend_id == "nearest":
        return NearestBackend()
    if backend_id == "bicubic":
        return BicubicBackend()
    if backend_id == "remote":
        if not sr_url:
            raise ValueError("remote backend requires an SR endpoint URL")
        return RemoteSRBackend(SRClient(sr_url, timeout_s=timeout_s))
    raise ValueError(f"unknown backend {backend_id!r}")
