"""Per-topic developer skill scores from fix history.

For the reports of topic k fixed by developer d (one "bucket"):

* severity  -- mean severity weight, divided by the largest weight so a
  bucket of blockers scores 1.0
* component -- distinct components in the bucket / all training components
* time      -- ``1 - min(median_fix_days, cap) / cap``; faster is better

and the skill is ``a1 * severity + a2 * component + a3 * time``.
"""

from __future__ import annotations

import csv
import json
import statistics
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from ._io import atomic_open
from .corpus import BugReport, Severity

DEFAULT_SEVERITY_WEIGHTS = {
    Severity.BLOCKER: 0.29,
    Severity.CRITICAL: 0.21,
    Severity.MAJOR: 0.16,
    Severity.NORMAL: 0.11,
    Severity.MINOR: 0.09,
    Severity.TRIVIAL: 0.07,
    Severity.REGRESSION: 0.05,
    Severity.ENHANCEMENT: 0.02,
}

WEIGHT_FLOOR = 1e-4
EMPTY_RULES = ("zero", "topic_mean")


class ScoringError(ValueError):
    pass


@dataclass(frozen=True)
class SeverityWeights:
    weights: Mapping[Severity, float] = field(default_factory=lambda: dict(DEFAULT_SEVERITY_WEIGHTS))

    def __post_init__(self):
        if set(self.weights) != set(Severity):
            raise ScoringError("severity weights must cover exactly the 8 levels")
        if any(w <= 0 for w in self.weights.values()):
            raise ScoringError("severity weights must be positive")

    def __getitem__(self, level: Severity) -> float:
        return self.weights[level]

    @property
    def top(self) -> float:
        return max(self.weights.values())


@dataclass(frozen=True)
class WeightVector:
    a1: float
    a2: float
    a3: float

    def __post_init__(self):
        vals = (self.a1, self.a2, self.a3)
        if abs(sum(vals) - 1.0) > 1e-9:
            raise ScoringError(f"weights must sum to 1, got {sum(vals)!r}")
        if min(vals) < WEIGHT_FLOOR - 1e-12:
            raise ScoringError(f"every weight must be >= {WEIGHT_FLOOR}")

    def as_array(self) -> np.ndarray:
        return np.array([self.a1, self.a2, self.a3])

    @classmethod
    def uniform(cls) -> "WeightVector":
        return cls(1 / 3, 1 / 3, 1 - 2 / 3)

    def to_list(self) -> list[float]:
        return [self.a1, self.a2, self.a3]


def history_partition(reports: Sequence[BugReport], labels: Mapping[str, int]) -> dict[tuple[str, int], list[BugReport]]:
    buckets: dict[tuple[str, int], list[BugReport]] = defaultdict(list)
    for r in reports:
        buckets[(r.assignee, labels[r.bug_id])].append(r)
    return dict(buckets)


def _require(bucket):
    if not bucket:
        raise ScoringError("empty bucket; apply the empty-history rule instead")


def severity_score(bucket: Sequence[BugReport], weights: SeverityWeights = SeverityWeights()) -> float:
    _require(bucket)
    raw = sum(weights[r.severity] for r in bucket) / len(bucket)
    return raw / weights.top


def component_score(bucket: Sequence[BugReport], all_components) -> float:
    _require(bucket)
    if not all_components:
        raise ScoringError("no component types in the training set")
    return len({r.component for r in bucket}) / len(all_components)


def median_fix_days(bucket: Sequence[BugReport]) -> float:
    _require(bucket)
    return float(statistics.median(r.fix_time_days for r in bucket))


def time_score(bucket: Sequence[BugReport], time_cap: float) -> float:
    if time_cap <= 0:
        raise ScoringError("time_cap must be positive")
    med = median_fix_days(bucket)
    return 1.0 - min(med, time_cap) / time_cap


def default_time_cap(reports: Sequence[BugReport], q: float = 95.0) -> float:
    """95th percentile of fix times; 1 day if that percentile is 0."""
    cap = float(np.percentile([r.fix_time_days for r in reports], q))
    return cap if cap > 0 else 1.0


@dataclass
class FactorMatrices:
    """Weight-independent part of the score matrix, reused across DE fitness calls."""

    developers: tuple[str, ...]
    K: int
    severity: np.ndarray
    component: np.ndarray
    time: np.ndarray
    has_history: np.ndarray
    medians: np.ndarray  # developer x topic median fix days, NaN without history
    topic_medians: np.ndarray  # NaN for topics with no training report
    global_median: float
    time_cap: float

    def combine(self, weights: WeightVector, empty_rule: str = "zero") -> np.ndarray:
        a = weights.as_array()
        s = a[0] * self.severity + a[1] * self.component + a[2] * self.time
        s = np.where(self.has_history, s, 0.0)
        if empty_rule == "topic_mean":
            with np.errstate(invalid="ignore"):
                n = self.has_history.sum(axis=0)
                mean = np.where(n > 0, s.sum(axis=0) / np.maximum(n, 1), 0.0)
            s = np.where(self.has_history, s, mean[None, :])
        elif empty_rule != "zero":
            raise ScoringError(f"unknown empty-history rule {empty_rule!r}")
        return s

    def expected_days(self, dev_index: int, topic: int) -> float:
        """Median fix days with fallback: developer-topic, topic-wide, global."""
        m = self.medians[dev_index, topic]
        if not np.isnan(m):
            return float(m)
        t = self.topic_medians[topic] if 0 <= topic < self.K else np.nan
        return float(t) if not np.isnan(t) else self.global_median


def factor_matrices(
    train: Sequence[BugReport],
    labels: Mapping[str, int],
    developers: Sequence[str],
    K: int,
    sev_weights: SeverityWeights = SeverityWeights(),
    time_cap: Optional[float] = None,
) -> FactorMatrices:
    if not train:
        raise ScoringError("no training reports")
    developers = tuple(developers)
    dev_index = {d: i for i, d in enumerate(developers)}
    cap = default_time_cap(train) if time_cap is None else float(time_cap)
    components = {r.component for r in train}
    shape = (len(developers), K)
    sev, com, tim = np.zeros(shape), np.zeros(shape), np.zeros(shape)
    med = np.full(shape, np.nan)
    hist = np.zeros(shape, dtype=bool)
    for (dev, k), bucket in history_partition(train, labels).items():
        if dev not in dev_index:
            continue
        i = dev_index[dev]
        sev[i, k] = severity_score(bucket, sev_weights)
        com[i, k] = component_score(bucket, components)
        tim[i, k] = time_score(bucket, cap)
        med[i, k] = median_fix_days(bucket)
        hist[i, k] = True
    by_topic: dict[int, list[int]] = defaultdict(list)
    for r in train:
        by_topic[labels[r.bug_id]].append(r.fix_time_days)
    topic_med = np.array([statistics.median(by_topic[k]) if by_topic.get(k) else np.nan for k in range(K)], dtype=float)
    global_med = float(statistics.median(r.fix_time_days for r in train))
    return FactorMatrices(developers, K, sev, com, tim, hist, med, topic_med, global_med, cap)


@dataclass
class DeveloperScoreMatrix:
    factors: FactorMatrices
    weights: WeightVector
    scores: np.ndarray
    empty_rule: str = "zero"

    @property
    def developers(self) -> tuple[str, ...]:
        return self.factors.developers

    @property
    def K(self) -> int:
        return self.factors.K

    def sidecar(self) -> dict:
        f = self.factors
        return {
            "weights": self.weights.to_list(),
            "empty_rule": self.empty_rule,
            "time_cap": f.time_cap,
            "global_median": f.global_median,
            "topic_medians": [None if np.isnan(x) else float(x) for x in f.topic_medians],
            "developer_topic_medians": [[None if np.isnan(x) else float(x) for x in row] for row in f.medians],
            "developers": list(f.developers),
        }


def build_score_matrix(
    train: Sequence[BugReport],
    labels: Mapping[str, int],
    weights: WeightVector,
    developers: Sequence[str],
    K: int,
    sev_weights: SeverityWeights = SeverityWeights(),
    empty_rule: str = "zero",
    time_cap: Optional[float] = None,
) -> DeveloperScoreMatrix:
    f = factor_matrices(train, labels, developers, K, sev_weights, time_cap)
    return DeveloperScoreMatrix(f, weights, f.combine(weights, empty_rule), empty_rule)


def write_score_matrix(matrix: DeveloperScoreMatrix, csv_path, json_path) -> None:
    with atomic_open(csv_path, newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["developer"] + [f"topic_{k}" for k in range(matrix.K)])
        for dev, row in zip(matrix.developers, matrix.scores):
            w.writerow([dev] + [repr(float(x)) for x in row])
    with atomic_open(json_path) as fh:
        json.dump(matrix.sidecar(), fh, indent=1, sort_keys=True)
        fh.write("\n")


@dataclass
class LoadedScores:
    developers: tuple[str, ...]
    scores: np.ndarray
    sidecar: dict

    def factors_for_estimates(self) -> FactorMatrices:
        """Median tables only; factor arrays are not stored on disk."""
        sc = self.sidecar
        K = self.scores.shape[1]
        nan = lambda v: np.nan if v is None else v  # noqa: E731
        med = np.array([[nan(x) for x in row] for row in sc["developer_topic_medians"]], dtype=float).reshape(-1, K)
        zeros = np.zeros_like(self.scores)
        return FactorMatrices(
            self.developers, K, zeros, zeros, zeros, ~np.isnan(med), med,
            np.array([nan(x) for x in sc["topic_medians"]], dtype=float),
            float(sc["global_median"]), float(sc["time_cap"]),
        )


def read_score_matrix(csv_path, json_path) -> LoadedScores:
    with open(csv_path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    devs = tuple(r[0] for r in rows[1:])
    scores = np.array([[float(x) for x in r[1:]] for r in rows[1:]], dtype=float)
    with open(json_path, encoding="utf-8") as fh:
        sidecar = json.load(fh)
    return LoadedScores(devs, scores, sidecar)
