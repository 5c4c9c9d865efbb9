"""Safety levels and the confusion-matrix stand-in for the vision classifier.

A safety level ``mu`` lies in [-1, 0]; ``mu = prob_neg - 1`` where
``prob_neg`` is the classifier's probability that the behavior is safe.
Values at or below -0.5 correspond to an "unsafe" (positive) prediction.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

import numpy as np

from .behaviors import MERGE_KINDS, Behavior
from .errors import DegenerateBaseRate, OutOfRange, ValidationError
from .lane_map import Pose

POSITIVE_INTERVAL = (-1.0, -0.5)
NEGATIVE_INTERVAL = (-0.5, 0.0)
CELLS = ("TP", "FN", "TN", "FP")


@dataclass(frozen=True)
class SafetyLevel:
    mu: float

    def __post_init__(self) -> None:
        if not -1.0 <= self.mu <= 0.0:
            raise OutOfRange(f"safety level {self.mu} outside [-1, 0]")

    @property
    def unsafe(self) -> bool:
        return self.mu <= -0.5


@dataclass(frozen=True)
class GroundTruth:
    unsafe: bool


def mu_from_prob(prob_neg: float) -> SafetyLevel:
    if not 0.0 <= prob_neg <= 1.0:
        raise OutOfRange(f"probability {prob_neg} outside [0, 1]")
    return SafetyLevel(prob_neg - 1.0)


def derive_fpr(precision: float, recall: float, base_rate: float) -> float:
    """False-positive rate implied by precision, recall and the positive base rate."""
    for name, v in (("precision", precision), ("recall", recall), ("base_rate", base_rate)):
        if not 0.0 < v <= 1.0:
            raise OutOfRange(f"{name}={v} must lie in (0, 1]")
    if base_rate == 1.0:
        raise DegenerateBaseRate("base rate of 1 leaves no negatives")
    fpr = (1.0 - precision) / precision * recall * base_rate / (1.0 - base_rate)
    return min(max(fpr, 0.0), 1.0)


@dataclass(frozen=True)
class MuDistribution:
    """Piecewise-uniform distribution over histogram bins."""

    bins: tuple[tuple[float, float, float], ...]  # (low, high, weight)

    def __post_init__(self) -> None:
        if not self.bins or sum(w for *_, w in self.bins) <= 0:
            raise ValidationError("a mu distribution needs positive total weight")
        if any(w < 0 or hi < lo for lo, hi, w in self.bins):
            raise ValidationError("histogram bins need low <= high and non-negative weight")

    @classmethod
    def uniform(cls, low: float, high: float) -> MuDistribution:
        return cls(((low, high, 1.0),))

    @classmethod
    def point(cls, value: float) -> MuDistribution:
        return cls(((value, value, 1.0),))

    @property
    def support(self) -> tuple[float, float]:
        live = [(lo, hi) for lo, hi, w in self.bins if w > 0]
        return min(lo for lo, _ in live), max(hi for _, hi in live)

    def sample(self, rng: np.random.Generator) -> float:
        if len(self.bins) == 1:
            lo, hi, _ = self.bins[0]
        else:
            weights = np.array([w for *_, w in self.bins])
            lo, hi, _ = self.bins[rng.choice(len(self.bins), p=weights / weights.sum())]
        return hi - (hi - lo) * rng.random()  # (lo, hi]


def _negative_default() -> MuDistribution:
    return MuDistribution.uniform(*NEGATIVE_INTERVAL)


def _positive_default() -> MuDistribution:
    return MuDistribution.uniform(*POSITIVE_INTERVAL)


@dataclass(frozen=True)
class SensorModel:
    recall: float = 0.85
    precision: float = 0.84
    base_rate: float = 0.465
    mu_positive: MuDistribution = field(default_factory=_positive_default)
    mu_negative: MuDistribution = field(default_factory=_negative_default)
    fpr_override: float | None = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.recall <= 1.0:
            raise OutOfRange("recall must lie in [0, 1]")
        lo, hi = self.mu_positive.support
        if lo < -1.0 or hi > -0.5:
            raise ValidationError("positive mu distribution must stay within [-1, -0.5]")
        lo, hi = self.mu_negative.support
        if lo < -0.5 or hi > 0.0 or any(h <= -0.5 and w > 0 for _, h, w in self.mu_negative.bins):
            raise ValidationError("negative mu distribution must stay within (-0.5, 0]")
        if self.fpr_override is not None and not 0.0 <= self.fpr_override <= 1.0:
            raise OutOfRange("fpr must lie in [0, 1]")

    @property
    def fpr(self) -> float:
        if self.fpr_override is not None:
            return self.fpr_override
        return derive_fpr(self.precision, self.recall, self.base_rate)

    @property
    def f1(self) -> float:
        return 2 * self.precision * self.recall / (self.precision + self.recall)

    @classmethod
    def perfect(cls) -> SensorModel:
        """Never wrong, and certain: -1 for unsafe, 0 for safe."""
        return cls(
            recall=1.0,
            precision=1.0,
            mu_positive=MuDistribution.point(-1.0),
            mu_negative=MuDistribution.point(0.0),
        )

    def with_histogram(self, path: str | Path) -> SensorModel:
        pos, neg = load_mu_histogram(path)
        return SensorModel(
            self.recall, self.precision, self.base_rate, pos or self.mu_positive, neg or self.mu_negative,
            self.fpr_override,
        )


def sample_estimate(model: SensorModel, truth: GroundTruth, rng: np.random.Generator) -> SafetyLevel:
    """Draw a confusion-matrix cell for ``truth``, then a mu from that cell's distribution."""
    p_positive = model.recall if truth.unsafe else model.fpr
    dist = model.mu_positive if rng.random() < p_positive else model.mu_negative
    return SafetyLevel(min(0.0, max(-1.0, dist.sample(rng))))


def load_mu_histogram(path: str | Path) -> tuple[MuDistribution | None, MuDistribution | None]:
    """Read ``cell,bin_low,bin_high,weight`` rows into positive/negative distributions.

    TP and FP rows share the positive distribution; FN and TN rows the negative.
    """
    rows: dict[str, list[tuple[float, float, float]]] = {"pos": [], "neg": []}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            cell = row["cell"].strip().upper()
            if cell not in CELLS:
                raise ValidationError(f"unknown confusion cell {cell!r}")
            side = "pos" if cell in ("TP", "FP") else "neg"
            rows[side].append((float(row["bin_low"]), float(row["bin_high"]), float(row["weight"])))
    return (
        MuDistribution(tuple(rows["pos"])) if rows["pos"] else None,
        MuDistribution(tuple(rows["neg"])) if rows["neg"] else None,
    )


@dataclass(frozen=True)
class EstimationContext:
    """What the estimator sees before a behavior: where, what, and the world's hidden truth."""

    pose: Pose
    behavior: Behavior
    truth: GroundTruth
    rng: np.random.Generator


class SafetyEstimator(Protocol):
    kinds: frozenset[str]

    def estimate(self, context: EstimationContext) -> SafetyLevel: ...


@dataclass
class SensorEstimator:
    """Abstract classifier: samples mu through the sensor model's confusion matrix."""

    model: SensorModel = field(default_factory=SensorModel)
    kinds: frozenset[str] = MERGE_KINDS
    calls: int = 0

    def estimate(self, context: EstimationContext) -> SafetyLevel:
        self.calls += 1
        return sample_estimate(self.model, context.truth, context.rng)


@dataclass
class TableEstimator:
    """Deterministic estimator for tests: mu looked up by (pose key, behavior)."""

    table: dict = field(default_factory=dict)
    default: float = 0.0
    kinds: frozenset[str] = MERGE_KINDS
    calls: int = 0

    def estimate(self, context: EstimationContext) -> SafetyLevel:
        self.calls += 1
        return SafetyLevel(self.table.get((context.pose.key(), context.behavior), self.default))
