"""Composite prompt reward: critic preference, phrase exclusion, repetition.

Three pure components combine as a weighted sum.  The critic piece parses a
judge model's free-text rating into [0,1]; the other two need only the
prompt text.  Defaults follow the reference weighting (1.0, 0.5, 0.5), so
totals live in [-0.5, 1.5].
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Optional

from .prompts import (
    TEMPLATE_ID_CRITIC,
    PromptError,
    render_critic_template,
    tokenize,
)
from .wire import PromptClient, WireError

DEFAULT_BLACKLIST = ("first image", "second image", "the image", "zoom-in")
DEFAULT_NGRAM_N = 3

RATING_SCAFFOLD = "Rating (0-100):"
_NUMERAL = re.compile(r"\d+(?:\.\d+)?")


class CriticParseError(ValueError):
    """No numeral found in a critic reply; caller scores the sample 0."""


@dataclass(frozen=True)
class RewardWeights:
    w_critic: float = 1.0
    w_phrase: float = 0.5
    w_rep: float = 0.5

    def __post_init__(self):
        if self.w_critic < 0 or self.w_phrase < 0 or self.w_rep < 0:
            raise ValueError(f"reward weights must be nonnegative, got {self}")


@dataclass(frozen=True)
class RewardBreakdown:
    r_critic: float
    r_phrase: float
    r_rep: float
    total: float

    def to_dict(self) -> dict:
        return {
            "r_critic": self.r_critic,
            "r_phrase": self.r_phrase,
            "r_rep": self.r_rep,
            "total": self.total,
        }


@dataclass(frozen=True)
class PhraseBlacklist:
    phrases: tuple[str, ...] = DEFAULT_BLACKLIST

    def __post_init__(self):
        if not self.phrases:
            raise ValueError("blacklist must be nonempty")
        if any(not p for p in self.phrases):
            raise ValueError("blacklist phrases must be nonempty")
        object.__setattr__(self, "phrases", tuple(p.lower() for p in self.phrases))

    def matches(self, text: str) -> bool:
        low = text.lower()
        return any(p in low for p in self.phrases)


def critic_reward(raw_score: float) -> float:
    """Rescale a 0-100 rating to [0,1]; out-of-range ratings clamp."""
    return min(max(raw_score / 100.0, 0.0), 1.0)


def parse_critic_reply(reply_text: str) -> float:
    """First numeral in the reply, clamped to [0,100].

    Replies that echo the rating scaffold are read after its last occurrence
    so the scaffold's own digits never win.
    """
    pos = reply_text.rfind(RATING_SCAFFOLD)
    tail = reply_text[pos + len(RATING_SCAFFOLD):] if pos >= 0 else reply_text
    m = _NUMERAL.search(tail)
    if m is None:
        raise CriticParseError(f"no numeral in critic reply {reply_text!r}")
    return min(max(float(m.group()), 0.0), 100.0)


def phrase_exclusion_reward(prompt_text: str, blacklist: Optional[PhraseBlacklist] = None) -> int:
    bl = blacklist or PhraseBlacklist()
    return 0 if bl.matches(prompt_text) else 1


def repetition_penalty(prompt_text: str, n: int = DEFAULT_NGRAM_N) -> float:
    """Negative fraction of repeated word n-grams, in [-1, 0]."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    tokens = tokenize(prompt_text)
    total = len(tokens) - n + 1
    if total <= 0:
        return 0.0
    grams = set()
    for i in range(total):
        grams.add(tuple(tokens[i:i + n]))
    return -(1.0 - len(grams) / total)


def total_reward(
    r_critic: float,
    r_phrase: float,
    r_rep: float,
    weights: Optional[RewardWeights] = None,
) -> RewardBreakdown:
    w = weights or RewardWeights()
    total = w.w_critic * r_critic + w.w_phrase * r_phrase + w.w_rep * r_rep
    return RewardBreakdown(r_critic=r_critic, r_phrase=r_phrase, r_rep=r_rep, total=total)


def offline_breakdown(
    prompt_text: str,
    weights: Optional[RewardWeights] = None,
    blacklist: Optional[PhraseBlacklist] = None,
    n: int = DEFAULT_NGRAM_N,
    critic_fn: Optional[Callable[[str], float]] = None,
) -> RewardBreakdown:
    """Score a prompt without remote calls; critic_fn maps text to [0,100]."""
    raw = critic_fn(prompt_text) if critic_fn is not None else 0.0
    return total_reward(
        r_critic=critic_reward(raw),
        r_phrase=float(phrase_exclusion_reward(prompt_text, blacklist)),
        r_rep=repetition_penalty(prompt_text, n),
        weights=weights,
    )


def remote_critic_score(
    client: PromptClient,
    images,
    description: str,
    request_id: str,
    temperature: float = 0.0,
    max_tokens: int = 16,
    seed: int = 0,
) -> tuple[float, str]:
    """Ask a judge model to rate a description; returns (r_critic, raw reply).

    Parse failures score 0 by contract; transport or protocol failures raise.
    """
    try:
        reply = client.generate(
            images=list(images),
            template_id=TEMPLATE_ID_CRITIC,
            temperature=temperature,
            max_tokens=max_tokens,
            seed=seed,
            request_id=request_id,
            template_text=render_critic_template(description),
            description=description,
        )
    except WireError as exc:
        raise PromptError(f"critic service failure: {exc}") from exc
    try:
        raw = parse_critic_reply(reply)
    except CriticParseError:
        return 0.0, reply
    return critic_reward(raw), reply
