"""Over-declared permission removal and the iterative minimum-set procedure.

A target app gets two recommendations, one from benign training apps and one
from malicious training apps; declared permissions that only the malicious
side recommends are over-declared and removed. Benign apps are minimized
fold-by-fold, with updated permission sets fed back into later folds, until a
whole pass removes nothing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import AppRecord, partition
from .recommender import NoNeighborsError, TrainingSet, recommend


@dataclass(frozen=True)
class OverDeclaredReport:
    """Result of one over-declaration check: removed/kept split of the declared set."""

    app_id: str
    removed: frozenset[str]
    kept: frozenset[str]
    status: str  # "ok" or "no-neighbors"


def over_declared(
    app_id: str,
    declared: frozenset[str],
    target: np.ndarray,
    benign_train: TrainingSet,
    malicious_train: TrainingSet,
    t_b: float,
    t_m: float,
    stop_ratio: float = 0.5,
    use_index: bool = True,
) -> OverDeclaredReport:
    """Remove declared permissions recommended by the malicious side only.

    If either side has no neighbor above its threshold nothing is removed and
    the report is flagged "no-neighbors".
    """
    try:
        rp_b = recommend(target, benign_train, t_b, stop_ratio=stop_ratio, use_index=use_index).permissions
        rp_m = recommend(target, malicious_train, t_m, stop_ratio=stop_ratio, use_index=use_index).permissions
    except NoNeighborsError:
        return OverDeclaredReport(app_id=app_id, removed=frozenset(), kept=declared, status="no-neighbors")
    removed = (rp_m - rp_b) & declared
    return OverDeclaredReport(app_id=app_id, removed=removed, kept=declared - removed, status="ok")


@dataclass(frozen=True)
class RemovalEvent:
    iteration: int
    app_id: str
    removed: tuple[str, ...]

    def to_row(self) -> dict:
        return {"iteration": self.iteration, "app_id": self.app_id, "removed": list(self.removed)}


@dataclass
class MinsetResult:
    """Fixed-point permission sets per benign app plus the removal log."""

    minsets: dict[str, frozenset[str]]
    events: list[RemovalEvent]
    iterations: int
    converged: bool

    def rows(self) -> list[dict]:
        return [
            {"app_id": app_id, "min_perms": sorted(perms)}
            for app_id, perms in sorted(self.minsets.items())
        ]


def iterate_minset(
    benign: list[AppRecord],
    benign_func: dict[str, np.ndarray],
    malicious_train: TrainingSet,
    n_folds: int,
    t_b: float,
    t_m: float,
    max_iterations: int,
    seed: int,
    stop_ratio: float = 0.5,
    use_index: bool = True,
) -> MinsetResult:
    """Minimize benign permission sets fold-wise until nothing changes.

    Each pass walks the folds in index order; fold k's apps are the targets
    and every other fold (with any permissions already removed this or earlier
    passes) forms the benign training side. The malicious side is fixed
    throughout. Sets only ever shrink, so a fixed point is guaranteed.
    """
    if max_iterations < 1:
        raise ValueError(f"max_iterations must be >= 1, got {max_iterations}")
    if not benign:
        raise ValueError("benign training set is empty")
    folds = partition(benign, n_folds, seed)
    current: dict[str, frozenset[str]] = {r.id: r.declared for r in benign}

    events: list[RemovalEvent] = []
    converged = False
    iterations = 0
    for iteration in range(1, max_iterations + 1):
        iterations = iteration
        changed = False
        for fold in folds:
            fold_ids = {r.id for r in fold}
            rest = [r for r in benign if r.id not in fold_ids]
            training = TrainingSet(
                ids=[r.id for r in rest],
                func=np.stack([benign_func[r.id] for r in rest]),
                declared=[current[r.id] for r in rest],
            )
            for record in sorted(fold, key=lambda r: r.id):
                report = over_declared(
                    record.id,
                    current[record.id],
                    benign_func[record.id],
                    training,
                    malicious_train,
                    t_b,
                    t_m,
                    stop_ratio=stop_ratio,
                    use_index=use_index,
                )
                if report.removed:
                    current[record.id] = report.kept
                    events.append(
                        RemovalEvent(iteration=iteration, app_id=record.id, removed=tuple(sorted(report.removed)))
                    )
                    changed = True
        if not changed:
            converged = True
            break
    return MinsetResult(minsets=current, events=events, iterations=iterations, converged=converged)
