"""Prompt sources: null, static tags, and remote VLM with fixed templates.

Guidance for step i conditions on the previous state alone at i = 1 and on
the previous two states (coarser first) from i = 2 on.  The two-image
template is a pinned byte sequence; requests carry it verbatim.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass
from typing import Optional, Protocol

from .wire import PromptClient, WireError

TWO_IMAGE_TEMPLATE = (
    "The second image is a zoom-in of the first image. "
    "Based on this knowledge, what is in the second image? Give me a set of words."
)
SINGLE_IMAGE_TEMPLATE = "what is in the image? Give me a set of words."
ZOOM_SENTENCE = "The second image is a zoom-in of the first image."

CRITIC_TEMPLATE = (
    "First Image: <image>\n"
    "Second Image: <image>\n"
    "The second image is a zoom-in of the first image. "
    "Please rate the quality of the following description on how well it describes "
    "the second image. Output only a single score between 0 and 100.\n"
    "Description: {description}\n"
    "Rating (0-100):"
)

TEMPLATE_ID_BASE = "base_vlm"
TEMPLATE_ID_CRITIC = "critic"

DEFAULT_TEMPERATURE = 0.7
DEFAULT_MAX_TOKENS = 128


class PromptError(RuntimeError):
    """Prompt source failed at run time; chains fall back to the null prompt."""


def tokenize(text: str) -> list[str]:
    """Split on Unicode whitespace, strip trailing punctuation, drop empties."""
    tokens = []
    for raw in text.split():
        tok = raw
        while tok and unicodedata.category(tok[-1]).startswith("P"):
            tok = tok[:-1]
        if tok:
            tokens.append(tok)
    return tokens


@dataclass(frozen=True)
class Prompt:
    text: str
    mode: str
    conditioning_indices: tuple[int, ...] = ()

    @property
    def tokens(self) -> list[str]:
        return tokenize(self.text)

    @property
    def length(self) -> int:
        return len(self.tokens)


def make_null_prompt() -> Prompt:
    return Prompt(text="", mode="null", conditioning_indices=())


def make_tag_prompt(tags: list[str], conditioning_indices: tuple[int, ...] = ()) -> Prompt:
    if not tags:
        raise ValueError("tag prompt requires at least one tag")
    if any(not isinstance(t, str) or not t.strip() for t in tags):
        raise ValueError(f"tags must be nonempty strings, got {tags!r}")
    return Prompt(text=", ".join(tags), mode="tags", conditioning_indices=conditioning_indices)


def conditioning_indices_for_step(index: int) -> tuple[int, ...]:
    """Step 1 sees state 0 only; later steps see the previous two states."""
    if index < 1:
        raise ValueError(f"chain step index must be >= 1, got {index}")
    if index == 1:
        return (0,)
    return (index - 2, index - 1)


def template_for(num_images: int) -> str:
    if num_images == 2:
        return TWO_IMAGE_TEMPLATE
    if num_images == 1:
        return SINGLE_IMAGE_TEMPLATE
    raise ValueError(f"prompt requests carry 1 or 2 images, got {num_images}")


class Prompter(Protocol):
    mode: str

    def make(self, index: int, states, request_id: Optional[str] = None) -> Prompt: ...


class NullPrompter:
    mode = "null"

    def make(self, index: int, states, request_id: Optional[str] = None) -> Prompt:
        return make_null_prompt()


class TagPrompter:
    """Serves one fixed tag list every step (tags come from an external extractor)."""

    mode = "tags"

    def __init__(self, tags: list[str]):
        self._probe = make_tag_prompt(tags)  # validates eagerly
        self.tags = list(tags)

    def make(self, index: int, states, request_id: Optional[str] = None) -> Prompt:
        return make_tag_prompt(self.tags, conditioning_indices_for_step(index))


class VlmPrompter:
    """Asks a remote VLM to describe the newest state given its coarser context."""

    mode = "vlm"

    def __init__(
        self,
        client: PromptClient,
        temperature: float = DEFAULT_TEMPERATURE,
        max_tokens: int = DEFAULT_MAX_TOKENS,
        seed: int = 0,
    ):
        self.client = client
        self.temperature = temperature
        self.max_tokens = max_tokens
        self.seed = seed

    def make(self, index: int, states, request_id: Optional[str] = None) -> Prompt:
        idx = conditioning_indices_for_step(index)
        if idx[-1] >= len(states):
            raise PromptError(
                f"step {index} needs state {idx[-1]} but only {len(states)} states exist"
            )
        images = [states[j].image for j in idx]  # ascending index = coarser first
        template = template_for(len(images))
        rid = request_id or f"prompt-step{index}"
        try:
            text = self.client.generate(
                images=images,
                template_id=TEMPLATE_ID_BASE,
                temperature=self.temperature,
                max_tokens=self.max_tokens,
                seed=self.seed + index,
                request_id=rid,
                template_text=template,
            )
        except WireError as exc:
            raise PromptError(f"prompt service failure: {exc}") from exc
        if not text.strip():
            raise PromptError("prompt service returned empty output")
        return Prompt(text=text, mode="vlm", conditioning_indices=idx)


def render_critic_template(description: str) -> str:
    return CRITIC_TEMPLATE.format(description=description)
