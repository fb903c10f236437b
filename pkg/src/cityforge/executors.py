"""Online executors behind the annotation jobs.

Two algorithms cover every scalar-stream annotation case the system targets:
a 1-D nearest-centroid classifier with a distance-ratio confidence, and a
streaming anomaly scorer combining a z-score test against trained statistics
with a flatline (stuck-sensor) window check.  Both train from plain
``(tag, value)`` samples and evaluate one reading at a time, so alternative
algorithms can be swapped in behind the same train/evaluate surface.
"""

from __future__ import annotations

import math
import sys
from collections import deque
from dataclasses import dataclass, field
from typing import Deque, Iterable, Sequence

from .errors import ValidationError

KIND_CLASSIFICATION = "classification"
KIND_ANOMALY = "anomalyDetection"

REASON_ZSCORE = "zscore"
REASON_FLATLINE = "flatline"
REASON_NONE = "none"

# Sentinel score for a reading off a zero-variance model: the largest finite
# float, kept finite so results stay JSON-serializable.
MAX_SCORE = sys.float_info.max


@dataclass
class ExecutorConfig:
    kind: str
    z_threshold: float = 3.0
    flatline_window: int = 12
    flatline_epsilon: float = 1e-12
    online_adaptation: bool = False

    def __post_init__(self) -> None:
        if self.kind not in (KIND_CLASSIFICATION, KIND_ANOMALY):
            raise ValidationError(f"unknown executor kind: {self.kind!r}")
        if not self.z_threshold > 0:
            raise ValidationError("z_threshold must be > 0")
        if self.flatline_window < 2:
            raise ValidationError("flatline_window must be >= 2")
        if self.flatline_epsilon < 0:
            raise ValidationError("flatline_epsilon must be >= 0")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "zThreshold": self.z_threshold,
            "flatlineWindow": self.flatline_window,
            "flatlineEpsilon": self.flatline_epsilon,
            "onlineAdaptation": self.online_adaptation,
        }

    @classmethod
    def from_dict(cls, kind: str, data: dict | None) -> "ExecutorConfig":
        data = data or {}
        return cls(
            kind=data.get("kind", kind),
            z_threshold=data.get("zThreshold", 3.0),
            flatline_window=data.get("flatlineWindow", 12),
            flatline_epsilon=data.get("flatlineEpsilon", 1e-12),
            online_adaptation=data.get("onlineAdaptation", False),
        )


@dataclass
class Classification:
    tag: str
    confidence: float


@dataclass
class AnomalyScore:
    score: float
    anomalous: bool
    reason: str


@dataclass
class ClassifierModel:
    """One centroid per tag; centroid = mean of that tag's training values."""

    centroids: dict[str, tuple[float, int]]

    def copy(self) -> "ClassifierModel":
        return ClassifierModel(centroids=dict(self.centroids))

    def to_dict(self) -> dict:
        return {
            "centroids": {
                tag: {"centroid": c, "sampleCount": n}
                for tag, (c, n) in self.centroids.items()
            }
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ClassifierModel":
        return cls(
            centroids={
                tag: (entry["centroid"], entry["sampleCount"])
                for tag, entry in data["centroids"].items()
            }
        )


@dataclass
class AnomalyModel:
    """Trained population statistics plus the streaming flatline window.

    ``m2`` is the running sum of squared deviations (Welford), carried so
    online adaptation stays exact against batch recomputation.  The recent
    window is streaming state only and is not persisted.
    """

    mean: float
    std_dev: float
    count: int
    m2: float
    config: ExecutorConfig
    recent: Deque[float] = field(default_factory=deque)

    def copy(self) -> "AnomalyModel":
        clone = AnomalyModel(
            mean=self.mean,
            std_dev=self.std_dev,
            count=self.count,
            m2=self.m2,
            config=self.config,
        )
        clone.recent = deque(self.recent, maxlen=self.config.flatline_window)
        return clone

    def to_dict(self) -> dict:
        return {
            "mean": self.mean,
            "stdDev": self.std_dev,
            "count": self.count,
            "m2": self.m2,
            "config": self.config.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "AnomalyModel":
        config = ExecutorConfig.from_dict(KIND_ANOMALY, data["config"])
        model = cls(
            mean=data["mean"],
            std_dev=data["stdDev"],
            count=data["count"],
            m2=data["m2"],
            config=config,
        )
        model.recent = deque(maxlen=config.flatline_window)
        return model


def _check_values(values: Sequence[float]) -> None:
    for v in values:
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise ValidationError(f"training value must be a finite number, got {v!r}")


def train_classifier(samples: Iterable[tuple[str, float]]) -> ClassifierModel:
    """Build one centroid per distinct tag as the mean of its values."""
    grouped: dict[str, list[float]] = {}
    for tag, value in samples:
        grouped.setdefault(tag, []).append(value)
    if not grouped:
        raise ValidationError("classification training set is empty")
    for values in grouped.values():
        _check_values(values)
    centroids = {
        tag: (math.fsum(values) / len(values), len(values))
        for tag, values in grouped.items()
    }
    return ClassifierModel(centroids=centroids)


def classify(model: ClassifierModel, x: float) -> Classification:
    """Nearest centroid by absolute distance.

    Ties go to the greater centroid value, then to the lexicographically
    smallest tag.  Confidence is d2/(d1+d2) over the two smallest distances,
    1.0 for a single centroid or an exact double hit.
    """
    if not math.isfinite(x):
        raise ValidationError(f"value must be finite, got {x!r}")
    if not model.centroids:
        raise ValidationError("classifier has no centroids")
    best_tag = min(
        model.centroids,
        key=lambda tag: (abs(x - model.centroids[tag][0]), -model.centroids[tag][0], tag),
    )
    distances = sorted(abs(x - c) for c, _ in model.centroids.values())
    if len(distances) == 1:
        return Classification(tag=best_tag, confidence=1.0)
    d1, d2 = distances[0], distances[1]
    confidence = 1.0 if d1 == d2 == 0.0 else d2 / (d1 + d2)
    return Classification(tag=best_tag, confidence=confidence)


def train_anomaly(values: Sequence[float], config: ExecutorConfig | None = None) -> AnomalyModel:
    """Fit population mean/std from the training set; streaming state starts empty."""
    config = config or ExecutorConfig(kind=KIND_ANOMALY)
    values = list(values)
    if len(values) < 2:
        raise ValidationError("anomaly training needs at least 2 samples")
    _check_values(values)
    mean = math.fsum(values) / len(values)
    m2 = math.fsum((v - mean) ** 2 for v in values)
    model = AnomalyModel(
        mean=mean,
        std_dev=math.sqrt(m2 / len(values)),
        count=len(values),
        m2=m2,
        config=config,
    )
    model.recent = deque(maxlen=config.flatline_window)
    return model


def score_anomaly(model: AnomalyModel, x: float) -> AnomalyScore:
    """Score one reading; mutates the model's flatline window (and, with
    online adaptation, its statistics)."""
    if not math.isfinite(x):
        raise ValidationError(f"value must be finite, got {x!r}")
    if model.std_dev > 0:
        score = abs(x - model.mean) / model.std_dev
    else:
        score = 0.0 if x == model.mean else MAX_SCORE
    z_fired = score > model.config.z_threshold

    if model.recent.maxlen != model.config.flatline_window:
        model.recent = deque(model.recent, maxlen=model.config.flatline_window)
    model.recent.append(x)
    flat_fired = (
        len(model.recent) == model.config.flatline_window
        and max(model.recent) - min(model.recent) <= model.config.flatline_epsilon
    )

    anomalous = z_fired or flat_fired
    reason = REASON_FLATLINE if flat_fired else (REASON_ZSCORE if z_fired else REASON_NONE)

    if model.config.online_adaptation and not anomalous:
        model.count += 1
        delta = x - model.mean
        model.mean += delta / model.count
        model.m2 += delta * (x - model.mean)
        model.std_dev = math.sqrt(max(model.m2, 0.0) / model.count)

    return AnomalyScore(score=score, anomalous=anomalous, reason=reason)
