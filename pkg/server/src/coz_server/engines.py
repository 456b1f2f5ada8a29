"""Role engines: deterministic stubs here, optional model-backed ones in hf.py.

An engine owns one role's computation; the HTTP layer owns schemas, role
routing, and concurrency. Stub engines are pure functions of their inputs so
two identical requests always produce byte-identical responses.
"""

from __future__ import annotations

from typing import Protocol

import numpy as np


class SREngine(Protocol):
    def upscale(self, image: np.ndarray, prompt: str, scale: int, seed: int
                ) -> tuple[np.ndarray, dict]: ...


class PromptEngine(Protocol):
    def generate(self, images: list[np.ndarray], template_id: str, template_text: str,
                 description: str, temperature: float, max_tokens: int, seed: int) -> str: ...


class MetricEngine(Protocol):
    def score(self, image: np.ndarray, metric: str) -> float: ...


class EchoSR:
    """Returns the received window unchanged; the orchestrator already zoomed it."""

    def upscale(self, image, prompt, scale, seed):
        return image, {"engine": "stub-echo"}


class CannedPrompt:
    """Fixed reply per template family; the critic reply is raw text the
    caller parses, mirroring how a real model's reply would arrive."""

    def __init__(self, prompt_text: str = "fur", critic_text: str = "87"):
        self.prompt_text = prompt_text
        self.critic_text = critic_text

    def generate(self, images, template_id, template_text, description,
                 temperature, max_tokens, seed):
        if template_id == "critic":
            return self.critic_text
        return self.prompt_text


class ConstantMetric:
    """Configured score per metric name, shared default otherwise."""

    def __init__(self, values: dict[str, float] | None = None, default: float = 3.0):
        self.values = {k.lower(): float(v) for k, v in (values or {}).items()}
        self.default = float(default)

    def score(self, image, metric):
        return self.values.get(metric.lower(), self.default)
