"""Metric registry: native NIQE plus remote deep metrics, with substitution.

Reports never drop an image: when a metric computation fails, the score cell
receives the worst possible value (100.0 for NIQE, 0.0 for everything else)
and the failure is flagged, so dataset means stay comparable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .niqe import NiqeError, NiqeModel
from .niqe import niqe as niqe_score
from .wire import MetricClient, WireError

LOWER_BETTER = frozenset({"niqe"})
KNOWN_REMOTE = ("musiq", "maniqa", "clipiqa")

NIQE_WORST = 100.0
DEFAULT_WORST = 0.0


def worst_value(metric: str) -> float:
    return NIQE_WORST if metric.lower() == "niqe" else DEFAULT_WORST


def higher_is_better(metric: str) -> bool:
    return metric.lower() not in LOWER_BETTER


@dataclass
class MetricReport:
    """Scores for one image; every requested metric has a populated cell."""

    image_id: str
    scores: dict[str, float] = field(default_factory=dict)
    failures: dict[str, str] = field(default_factory=dict)

    def record(self, metric: str, score: float) -> None:
        self.scores[metric] = float(score)

    def record_failure(self, metric: str, reason: str) -> None:
        self.scores[metric] = worst_value(metric)
        self.failures[metric] = reason

    def to_dict(self) -> dict:
        return {"image_id": self.image_id, "scores": dict(self.scores),
                "failures": dict(self.failures)}


class MetricEngine:
    """Scores images against a metric list, substituting on failure."""

    def __init__(self, niqe_model: Optional[NiqeModel] = None,
                 client: Optional[MetricClient] = None):
        self.niqe_model = niqe_model
        self.client = client

    def score_one(self, image: np.ndarray, metric: str) -> float:
        name = metric.lower()
        if name == "niqe":
            if self.niqe_model is None:
                raise NiqeError("no NIQE model configured")
            return niqe_score(image, self.niqe_model)
        if self.client is None:
            raise WireError(f"metric {metric!r} requires a remote metric endpoint")
        return self.client.score(image, name)

    def report(self, image_id: str, image: Optional[np.ndarray],
               metrics: list[str]) -> MetricReport:
        rep = MetricReport(image_id=image_id)
        for metric in metrics:
            if image is None:
                rep.record_failure(metric, "image missing")
                continue
            try:
                rep.record(metric, self.score_one(image, metric))
            except (NiqeError, WireError, ValueError) as exc:
                rep.record_failure(metric, str(exc))
        return rep
