"""Recursive zoom super-resolution: chain driver, rewards, and evaluation."""

from .backends import Backend, BackendError, BicubicBackend, NearestBackend, RemoteSRBackend, SRRequest, SRResponse
from .chain import ChainTranscript, ConfigError, ScaleState, ZoomConfig, make_initial_state, run_chain, run_direct
from .geometry import BICUBIC, NEAREST, GeometryError, Rect, center_crop, resample, resize, shrink_rect, zoom_window
from .prompts import Prompt, PromptError, make_null_prompt, make_tag_prompt, tokenize
from .rewards import (
    RewardBreakdown,
    RewardWeights,
    critic_reward,
    parse_critic_reply,
    phrase_exclusion_reward,
    repetition_penalty,
    total_reward,
)

__version__ = "0.1.0"

__all__ = [
    "BICUBIC",
    "NEAREST",
    "Backend",
    "BackendError",
    "BicubicBackend",
    "ChainTranscript",
    "ConfigError",
    "GeometryError",
    "NearestBackend",
    "Prompt",
    "PromptError",
    "Rect",
    "RemoteSRBackend",
    "RewardBreakdown",
    "RewardWeights",
    "SRRequest",
    "SRResponse",
    "ScaleState",
    "ZoomConfig",
    "center_crop",
    "critic_reward",
    "make_initial_state",
    "make_null_prompt",
    "make_tag_prompt",
    "parse_critic_reply",
    "phrase_exclusion_reward",
    "repetition_penalty",
    "resample",
    "resize",
    "run_chain",
    "run_direct",
    "shrink_rect",
    "tokenize",
    "total_reward",
    "zoom_window",
    "__version__",
]
