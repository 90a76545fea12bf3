"""Neighbor-based permission recommendation.

Apps are compared by Euclidean distance between their topic-probability
vectors; similarity is 1 / (1 + distance). Training apps above a similarity
threshold vote for the permissions they declare, weighted by similarity, and
an adaptive relative-gap cutoff truncates the ranked result.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np


class NoNeighborsError(RuntimeError):
    """No training app exceeded the similarity threshold."""

    def __init__(self, threshold: float):
        super().__init__(f"no training app with similarity > {threshold}")
        self.threshold = threshold


def distance(x: np.ndarray, y: np.ndarray) -> float:
    """Euclidean distance between two topic-probability vectors."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"vector length mismatch: {x.shape} vs {y.shape}")
    return float(np.sqrt(((x - y) ** 2).sum()))


def similarity(x: np.ndarray, y: np.ndarray) -> float:
    """1 / (1 + distance); always in (0, 1]."""
    return 1.0 / (1.0 + distance(x, y))


@dataclass(frozen=True)
class Neighbor:
    app_id: str
    similarity: float


@dataclass
class TrainingSet:
    """Immutable view of training apps: ids, topic vectors and permission sets.

    An inverted topic index (topic -> apps whose probability for that topic
    exceeds a relevance floor) prunes candidates for high thresholds; pruning
    is exact, so indexed and exhaustive selection always agree.
    """

    ids: list[str]
    func: np.ndarray
    declared: list[frozenset[str]]
    relevance_floor: float = 0.05

    def __post_init__(self) -> None:
        if len(self.ids) != self.func.shape[0] or len(self.ids) != len(self.declared):
            raise ValueError("ids, func rows and declared sets must align")

    def __len__(self) -> int:
        return len(self.ids)

    def declared_by_id(self) -> dict[str, frozenset[str]]:
        return dict(zip(self.ids, self.declared))

    @cached_property
    def _topic_index(self) -> list[np.ndarray]:
        return [
            np.flatnonzero(self.func[:, t] > self.relevance_floor)
            for t in range(self.func.shape[1])
        ]

    def _select(self, target: np.ndarray, threshold: float, rows: np.ndarray | None) -> list[Neighbor]:
        func = self.func if rows is None else self.func[rows]
        if func.shape[0] == 0:
            return []
        dists = np.sqrt(((func - target) ** 2).sum(axis=1))
        sims = 1.0 / (1.0 + dists)
        picked = []
        for local in np.flatnonzero(sims > threshold):
            row = int(local) if rows is None else int(rows[local])
            picked.append((self.ids[row], float(sims[local])))
        # canonical order: ascending app id, so downstream sums are reproducible
        picked.sort()
        return [Neighbor(app_id=a, similarity=s) for a, s in picked]

    def neighbors(self, target: np.ndarray, threshold: float, use_index: bool = True) -> list[Neighbor]:
        """All training apps with similarity strictly above the threshold."""
        if not 0 < threshold < 1:
            raise ValueError(f"threshold must be in (0, 1), got {threshold}")
        target = np.asarray(target, dtype=np.float64)
        if target.shape[0] != self.func.shape[1]:
            raise ValueError("target vector length does not match training vectors")
        if not use_index or len(self.ids) == 0:
            return self._select(target, threshold, None)
        # sim > T  <=>  dist < 1/T - 1 =: radius; any neighbor then satisfies
        # |target_t - y_t| < radius for every topic t, so a topic with
        # target_t - radius > floor is guaranteed to list every neighbor.
        radius = 1.0 / threshold - 1.0
        t_best = int(np.argmax(target))
        if target[t_best] - radius > self.relevance_floor:
            rows = self._topic_index[t_best]
            return self._select(target, threshold, rows)
        return self._select(target, threshold, None)


def recommend_values(
    neighbors: list[Neighbor], declared: dict[str, frozenset[str]]
) -> dict[str, float]:
    """Similarity-weighted fraction of neighbors declaring each permission."""
    if not neighbors:
        raise NoNeighborsError(float("nan"))
    denom = 0.0
    sums: dict[str, float] = {}
    for nb in neighbors:
        denom += nb.similarity
        for perm in sorted(declared[nb.app_id]):
            sums[perm] = sums.get(perm, 0.0) + nb.similarity
    return {perm: value / denom for perm, value in sums.items()}


def rank_values(values: dict[str, float]) -> list[tuple[str, float]]:
    """Sort by value descending, ties broken by permission name ascending."""
    return sorted(values.items(), key=lambda kv: (-kv[1], kv[0]))


def adaptive_cutoff(values: dict[str, float], stop_ratio: float = 0.5) -> list[tuple[str, float]]:
    """Keep the head of the ranking up to the largest relative gap.

    The ranked list is repeatedly cut at the largest relative gap
    (v[i] - v[i+1]) / v[i] within the currently kept head, until no gap of at
    least stop_ratio remains; a list with no such gap is kept whole.
    """
    if not values:
        raise ValueError("no values to cut")
    ranked = rank_values(values)
    end = len(ranked)
    while end > 1:
        gaps = [
            (ranked[i][1] - ranked[i + 1][1]) / ranked[i][1]
            for i in range(end - 1)
        ]
        best = max(range(len(gaps)), key=lambda i: gaps[i])
        if gaps[best] < stop_ratio:
            break
        end = best + 1
    return ranked[:end]


@dataclass(frozen=True)
class Recommendation:
    """Full permission ranking plus the adaptive-cutoff prefix length."""

    ranked: tuple[tuple[str, float], ...]
    truncated_at: int

    @property
    def truncated(self) -> tuple[tuple[str, float], ...]:
        return self.ranked[: self.truncated_at]

    @property
    def permissions(self) -> frozenset[str]:
        """Permission set of the truncated list."""
        return frozenset(p for p, _ in self.truncated)

    def ranking(self) -> list[str]:
        return [p for p, _ in self.ranked]


def recommend(
    target: np.ndarray,
    training: TrainingSet,
    threshold: float,
    stop_ratio: float = 0.5,
    use_index: bool = True,
    relax_threshold: bool = False,
) -> Recommendation:
    """Select neighbors, weight their permissions and apply the adaptive cutoff.

    With relax_threshold the threshold is lowered in 0.05 steps until at least
    one neighbor qualifies; otherwise an empty neighbor set raises
    NoNeighborsError (a target must never be silently 'recommended nothing').
    """
    neighbors = training.neighbors(target, threshold, use_index=use_index)
    if not neighbors and relax_threshold:
        t = threshold - 0.05
        while t > 0 and not neighbors:
            neighbors = training.neighbors(target, t, use_index=use_index)
            t -= 0.05
    if not neighbors:
        raise NoNeighborsError(threshold)
    values = recommend_values(neighbors, training.declared_by_id())
    ranked = rank_values(values)
    truncated = adaptive_cutoff(values, stop_ratio=stop_ratio)
    return Recommendation(ranked=tuple(ranked), truncated_at=len(truncated))
