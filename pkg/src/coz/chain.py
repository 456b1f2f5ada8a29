"""Scale-state sequence: per-step zoom geometry and the recursive chain driver.

A chain starts from a square base-resolution input and repeatedly asks an
SR backend for the next magnification state, threading text guidance from a
prompt source.  Each state keeps exact provenance: the rectangle of the
original image it depicts and the exact rational magnification factor.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional

import numpy as np

from .backends import Backend, BackendError, SRRequest
from .geometry import Rect, shrink_rect
from .prompts import Prompt, PromptError, Prompter, make_null_prompt

PROMPT_MODES = ("null", "tags", "vlm")


class ConfigError(ValueError):
    """Invalid run configuration; callers map this to exit code 1."""


@dataclass
class ScaleState:
    """The image at chain step ``index`` plus its provenance."""

    index: int
    image: np.ndarray
    source_rect: Rect
    cumulative_factor: Fraction

    def side(self) -> int:
        return int(self.image.shape[0])


@dataclass(frozen=True)
class ZoomConfig:
    scale_s: int
    recursions_n: int
    base_resolution: int = 512
    prompt_mode: str = "null"
    backend_id: str = "bicubic"
    seed: int = 0

    def validate(self) -> None:
        if self.scale_s < 2:
            raise ConfigError(f"scale_s must be >= 2, got {self.scale_s}")
        if self.recursions_n < 1:
            raise ConfigError(f"recursions_n must be >= 1, got {self.recursions_n}")
        if self.base_resolution % self.scale_s != 0:
            raise ConfigError(
                f"base_resolution {self.base_resolution} not divisible by scale_s {self.scale_s}"
            )
        if self.prompt_mode not in PROMPT_MODES:
            raise ConfigError(f"prompt_mode must be one of {PROMPT_MODES}, got {self.prompt_mode!r}")


@dataclass
class StepError:
    step: int
    stage: str  # "prompt" or "sr"
    kind: str
    message: str
    request_id: Optional[str] = None
    fallback: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "step": self.step,
            "stage": self.stage,
            "kind": self.kind,
            "message": self.message,
            "request_id": self.request_id,
            "fallback": self.fallback,
        }


@dataclass
class ChainTranscript:
    config: ZoomConfig
    states: list[ScaleState]
    prompts: list[Prompt]
    timings: list[float]
    backend_id: str
    image_id: str = "image"
    errors: list[StepError] = field(default_factory=list)

    @property
    def complete(self) -> bool:
        return len(self.states) == self.config.recursions_n + 1

    def content_digest(self) -> str:
        """Digest over everything reproducible (timings excluded)."""
        h = hashlib.sha256()
        h.update(repr(self.config).encode())
        for st in self.states:
            h.update(st.image.astype("<f8").tobytes())
            h.update(repr(st.source_rect.as_tuple()).encode())
            h.update(str(st.cumulative_factor).encode())
        for p in self.prompts:
            h.update(p.text.encode("utf-8"))
            h.update(repr(p.conditioning_indices).encode())
        return h.hexdigest()

    def to_dict(self) -> dict:
        steps = []
        for st in self.states:
            prompt = None
            if st.index >= 1 and st.index - 1 < len(self.prompts):
                p = self.prompts[st.index - 1]
                prompt = {
                    "text": p.text,
                    "mode": p.mode,
                    "conditioning_indices": list(p.conditioning_indices),
                }
            steps.append(
                {
                    "index": st.index,
                    "source_rect": list(st.source_rect.as_tuple()),
                    "cumulative_factor": str(st.cumulative_factor),
                    "prompt": prompt,
                    "timing_s": self.timings[st.index - 1] if st.index >= 1 else None,
                }
            )
        return {
            "image_id": self.image_id,
            "backend_id": self.backend_id,
            "config": {
                "scale_s": self.config.scale_s,
                "recursions_n": self.config.recursions_n,
                "base_resolution": self.config.base_resolution,
                "prompt_mode": self.config.prompt_mode,
                "backend_id": self.config.backend_id,
                "seed": self.config.seed,
            },
            "steps": steps,
            "errors": [e.to_dict() for e in self.errors],
        }

    def save_json(self, path: str | Path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")
        return path

    def save_images(self, out_dir: str | Path) -> list[Path]:
        """Write each state as ``<image-id>_step<i>_x<factor>.png``."""
        from .wire import save_png

        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        written = []
        for st in self.states:
            factor = int(st.cumulative_factor)
            p = out_dir / f"{self.image_id}_step{st.index}_x{factor}.png"
            save_png(st.image, p)
            written.append(p)
        return written


def make_initial_state(image: np.ndarray, base_resolution: int) -> ScaleState:
    if image.shape[0] != base_resolution or image.shape[1] != base_resolution:
        raise ConfigError(
            f"input must be {base_resolution}x{base_resolution}, got {image.shape[0]}x{image.shape[1]}"
        )
    rect = Rect(0, 0, base_resolution, base_resolution)
    return ScaleState(index=0, image=image, source_rect=rect, cumulative_factor=Fraction(1))


def _next_state(prev: ScaleState, image: np.ndarray, s: int) -> ScaleState:
    return ScaleState(
        index=prev.index + 1,
        image=image,
        source_rect=shrink_rect(prev.source_rect, s),
        cumulative_factor=prev.cumulative_factor * s,
    )


def run_chain(
    x0: ScaleState,
    config: ZoomConfig,
    backend: Backend,
    prompter: Prompter,
    image_id: str = "image",
) -> ChainTranscript:
    """Recursively generate states 1..n from ``x0``.

    Step i asks the prompt source for guidance conditioned on x_{i-1} alone
    when i = 1 and on (x_{i-2}, x_{i-1}) when i >= 2, then hands the previous
    state and the prompt to the backend.  Prompt failures fall back to the
    null prompt (recorded); backend failures truncate the chain (recorded).
    """
    config.validate()
    if x0.side() != config.base_resolution:
        raise ConfigError(
            f"x0 side {x0.side()} does not match base_resolution {config.base_resolution}"
        )
    states = [x0]
    prompts: list[Prompt] = []
    timings: list[float] = []
    errors: list[StepError] = []
    for i in range(1, config.recursions_n + 1):
        request_id = f"{image_id}-step{i}"
        t0 = time.perf_counter()
        try:
            prompt = prompter.make(i, states, request_id=request_id)
        except PromptError as exc:
            errors.append(
                StepError(
                    step=i,
                    stage="prompt",
                    kind=type(exc).__name__,
                    message=str(exc),
                    request_id=request_id,
                    fallback="null_prompt",
                )
            )
            prompt = make_null_prompt()
        req = SRRequest(
            image=states[-1].image,
            prompt_text=prompt.text,
            scale_hint=config.scale_s,
            request_id=request_id,
            seed=config.seed + i,
        )
        try:
            resp = backend(req)
        except BackendError as exc:
            errors.append(
                StepError(
                    step=i,
                    stage="sr",
                    kind=type(exc).__name__,
                    message=str(exc),
                    request_id=exc.request_id or request_id,
                )
            )
            break
        prompts.append(prompt)
        timings.append(time.perf_counter() - t0)
        states.append(_next_state(states[-1], resp.image, config.scale_s))
    return ChainTranscript(
        config=config,
        states=states,
        prompts=prompts,
        timings=timings,
        backend_id=backend.identifier,
        image_id=image_id,
        errors=errors,
    )


def run_direct(
    x0: ScaleState,
    total_factor: int,
    backend: Backend,
    scale_s: int,
    seed: int = 0,
    image_id: str = "image",
) -> ScaleState:
    """One-shot magnification to ``total_factor`` (must be a power of scale_s).

    A single backend application targets the same final window as a k-step
    chain: crop once by s^k about the center, resize once, one call.
    """
    k = _power_of(total_factor, scale_s)
    if k is None:
        raise ConfigError(f"total_factor {total_factor} is not a power of scale_s {scale_s}")
    if x0.side() % total_factor != 0:
        raise ConfigError(f"side {x0.side()} not divisible by total_factor {total_factor}")
    req = SRRequest(
        image=x0.image,
        prompt_text="",
        scale_hint=total_factor,
        request_id=f"{image_id}-direct-x{total_factor}",
        seed=seed,
    )
    resp = backend(req)
    return ScaleState(
        index=k,
        image=resp.image,
        source_rect=shrink_rect(x0.source_rect, total_factor),
        cumulative_factor=x0.cumulative_factor * total_factor,
    )


def _power_of(value: int, base: int) -> Optional[int]:
    if value < base or base < 2:
        return None
    k = 0
    v = value
    while v > 1:
        if v % base != 0:
            return None
        v //= base
        k += 1
    return k
