"""Group-relative policy optimization on a desk-scale categorical policy.

Each iteration samples a group of candidate prompts, scores them with the
rewards module, subtracts the group mean to form advantages, and ascends
the REINFORCE gradient of the softmax policy.  The real use case updates a
VLM's weights; here a small categorical policy over a fixed vocabulary makes
the loop executable and checkable, and scored batches can be exported as
JSONL for an external trainer.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .prompts import Prompt
from .rewards import RewardBreakdown

MAX_VOCABULARY = 64


@dataclass
class GroupSample:
    prompt: Prompt
    breakdown: RewardBreakdown
    logprob_under_policy: float
    candidate_index: int
    advantage: float = 0.0

    def to_dict(self) -> dict:
        return {
            "prompt_text": self.prompt.text,
            "conditioning_indices": list(self.prompt.conditioning_indices),
            "breakdown": self.breakdown.to_dict(),
            "logprob_under_policy": self.logprob_under_policy,
            "candidate_index": self.candidate_index,
            "advantage": self.advantage,
        }


@dataclass
class AdvantageGroup:
    samples: list[GroupSample]
    advantages: list[float]

    def __post_init__(self):
        if len(self.samples) != len(self.advantages):
            raise ValueError("one advantage per sample required")
        if abs(sum(self.advantages)) > 1e-9:
            raise ValueError(f"advantages must sum to 0, got {sum(self.advantages)!r}")


def group_advantages(
    rewards: list[float],
    n_gen: Optional[int] = None,
    normalize_std: bool = False,
    eps: float = 1e-8,
) -> list[float]:
    """Reward minus group mean; optional std normalization behind a flag."""
    if n_gen is None:
        n_gen = len(rewards)
    if n_gen < 2:
        raise ValueError(f"group size must be >= 2, got {n_gen}")
    if len(rewards) != n_gen:
        raise ValueError(f"expected {n_gen} rewards, got {len(rewards)}")
    arr = np.asarray(rewards, dtype=np.float64)
    adv = arr - arr.mean()
    if normalize_std:
        adv = adv / (arr.std() + eps)
    return [float(a) for a in adv]


@dataclass
class ToyPromptPolicy:
    vocabulary: tuple[str, ...]
    logits: np.ndarray
    learning_rate: float = 0.1

    def __post_init__(self):
        if not self.vocabulary:
            raise ValueError("vocabulary must be nonempty")
        if len(self.vocabulary) > MAX_VOCABULARY:
            raise ValueError(f"vocabulary capped at {MAX_VOCABULARY} candidates")
        self.logits = np.asarray(self.logits, dtype=np.float64)
        if self.logits.shape != (len(self.vocabulary),):
            raise ValueError("one logit per candidate required")
        if self.learning_rate < 0:
            raise ValueError(f"learning_rate must be >= 0, got {self.learning_rate}")

    @classmethod
    def uniform(cls, vocabulary, learning_rate: float = 0.1) -> "ToyPromptPolicy":
        vocab = tuple(vocabulary)
        return cls(vocabulary=vocab, logits=np.zeros(len(vocab)), learning_rate=learning_rate)

    def probs(self) -> np.ndarray:
        return softmax(self.logits)


def softmax(logits: np.ndarray) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def surrogate_objective(logits: np.ndarray, sampled: list[int], advantages: list[float]) -> float:
    """Sum of advantage-weighted log-probs with advantages held fixed."""
    logp = np.log(softmax(logits))
    return float(sum(a * logp[g] for g, a in zip(sampled, advantages)))


def policy_gradient(logits: np.ndarray, sampled: list[int], advantages: list[float]) -> np.ndarray:
    """Exact gradient of the surrogate: sum_g A_g (onehot_g - softmax)."""
    probs = softmax(logits)
    grad = np.zeros_like(probs)
    for g, a in zip(sampled, advantages):
        grad -= a * probs
        grad[g] += a
    return grad


def kl_divergence(logits: np.ndarray, ref_logits: np.ndarray) -> float:
    p = softmax(logits)
    logp = np.log(p)
    logr = np.log(softmax(ref_logits))
    return float(np.sum(p * (logp - logr)))


def kl_gradient(logits: np.ndarray, ref_logits: np.ndarray) -> np.ndarray:
    """Gradient of KL(pi || ref) with respect to the logits."""
    p = softmax(logits)
    diff = np.log(p) - np.log(softmax(ref_logits))
    kl = float(np.sum(p * diff))
    return p * (diff - kl)


@dataclass
class GroupLog:
    group: AdvantageGroup
    expected_reward: float
    mean_components: dict = field(default_factory=dict)


Scorer = Callable[[str], RewardBreakdown]


def grpo_step(
    policy: ToyPromptPolicy,
    scorer: Scorer,
    n_gen: int = 2,
    rng: Optional[np.random.Generator] = None,
    normalize_std: bool = False,
    kl_coeff: float = 0.0,
    ref_logits: Optional[np.ndarray] = None,
) -> GroupLog:
    """One sample-score-update iteration; mutates the policy logits in place."""
    if n_gen < 2:
        raise ValueError(f"group size must be >= 2, got {n_gen}")
    if kl_coeff > 0 and ref_logits is None:
        raise ValueError("kl_coeff > 0 requires ref_logits")
    rng = rng or np.random.default_rng(0)
    probs = policy.probs()
    sampled = [int(g) for g in rng.choice(len(probs), size=n_gen, p=probs)]
    logp = np.log(probs)
    samples = []
    for g in sampled:
        text = policy.vocabulary[g]
        breakdown = scorer(text)
        samples.append(
            GroupSample(
                prompt=Prompt(text=text, mode="tags"),
                breakdown=breakdown,
                logprob_under_policy=float(logp[g]),
                candidate_index=g,
            )
        )
    rewards = [s.breakdown.total for s in samples]
    advantages = group_advantages(rewards, n_gen, normalize_std=normalize_std)
    for s, a in zip(samples, advantages):
        s.advantage = a
    grad = policy_gradient(policy.logits, sampled, advantages)
    if kl_coeff > 0:
        grad = grad - kl_coeff * kl_gradient(policy.logits, ref_logits)
    policy.logits = policy.logits + policy.learning_rate * grad
    new_probs = policy.probs()
    reward_vector = np.array([scorer(v).total for v in policy.vocabulary])
    return GroupLog(
        group=AdvantageGroup(samples=samples, advantages=advantages),
        expected_reward=float(new_probs @ reward_vector),
        mean_components={
            "r_critic": float(np.mean([s.breakdown.r_critic for s in samples])),
            "r_phrase": float(np.mean([s.breakdown.r_phrase for s in samples])),
            "r_rep": float(np.mean([s.breakdown.r_rep for s in samples])),
        },
    )


def train_toy(
    policy: ToyPromptPolicy,
    scorer: Scorer,
    iterations: int,
    n_gen: int = 2,
    seed: int = 0,
    normalize_std: bool = False,
    kl_coeff: float = 0.0,
) -> list[dict]:
    """Run the loop; returns one curve row per iteration (plus row 0)."""
    if iterations < 0:
        raise ValueError(f"iterations must be >= 0, got {iterations}")
    rng = np.random.default_rng(seed)
    ref_logits = policy.logits.copy() if kl_coeff > 0 else None
    reward_vector = np.array([scorer(v).total for v in policy.vocabulary])

    def curve_row(iteration: int, log: Optional[GroupLog]) -> dict:
        expected = float(policy.probs() @ reward_vector)
        comps = log.mean_components if log else {"r_critic": 0.0, "r_phrase": 0.0, "r_rep": 0.0}
        return {
            "iteration": iteration,
            "expected_reward": expected,
            "r_critic_mean": comps["r_critic"],
            "r_phrase_mean": comps["r_phrase"],
            "r_rep_mean": comps["r_rep"],
        }

    curve = [curve_row(0, None)]
    for t in range(1, iterations + 1):
        log = grpo_step(
            policy,
            scorer,
            n_gen=n_gen,
            rng=rng,
            normalize_std=normalize_std,
            kl_coeff=kl_coeff,
            ref_logits=ref_logits,
        )
        curve.append(curve_row(t, log))
    return curve


def save_curve_csv(curve: list[dict], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fields = ["iteration", "expected_reward", "r_critic_mean", "r_phrase_mean", "r_rep_mean"]
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for row in curve:
            writer.writerow({k: row[k] for k in fields})
    return path


def export_reward_batch(samples: list[GroupSample], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for s in samples:
            fh.write(json.dumps(s.to_dict(), sort_keys=True) + "\n")
    return path


def load_reward_batch(path) -> list[dict]:
    rows = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            rows.append(json.loads(line))
    return rows
