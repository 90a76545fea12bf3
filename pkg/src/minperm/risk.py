"""Permission-based risk evaluation for a target app.

Unexpected permissions are declared but not benign-recommended; risk
permissions are malicious-recommended but not benign-recommended. An app is
risky when the two sets intersect, and its risk value sums the protection
scores of the intersection (1 normal, 2 dangerous).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import PermissionRegistry
from .recommender import NoNeighborsError, Recommendation, TrainingSet, recommend


def unexpected(declared: frozenset[str], rp_b: frozenset[str]) -> frozenset[str]:
    """Declared permissions the benign side did not recommend."""
    return declared - rp_b


def risk_permissions(rp_m: frozenset[str], rp_b: frozenset[str]) -> frozenset[str]:
    """Permissions only the malicious side recommends."""
    return rp_m - rp_b


def risk_value(flagged: frozenset[str], registry: PermissionRegistry) -> int:
    """Sum of protection-level scores over the flagged permissions."""
    return sum(registry.score(p) for p in flagged)


@dataclass(frozen=True)
class RiskReport:
    """Per-app risk assessment with all intermediate sets."""

    app_id: str
    status: str  # "ok" or "unassessable"
    unexpected: frozenset[str]
    risk_perms: frozenset[str]
    flagged: frozenset[str]
    risky: bool | None
    risk_value: int
    benign_ranking: tuple[str, ...] = ()

    def to_row(self) -> dict:
        return {
            "app_id": self.app_id,
            "status": self.status,
            "unexpected": sorted(self.unexpected),
            "risk_perms": sorted(self.risk_perms),
            "flagged": sorted(self.flagged),
            "risky": self.risky,
            "risk_value": self.risk_value,
        }

    @classmethod
    def unassessable(cls, app_id: str) -> "RiskReport":
        return cls(
            app_id=app_id,
            status="unassessable",
            unexpected=frozenset(),
            risk_perms=frozenset(),
            flagged=frozenset(),
            risky=None,
            risk_value=0,
        )


def assess(
    app_id: str,
    declared: frozenset[str],
    target: np.ndarray,
    benign_train: TrainingSet,
    malicious_train: TrainingSet,
    t_b: float,
    t_m: float,
    registry: PermissionRegistry,
    stop_ratio: float = 0.5,
    use_index: bool = True,
    relax_threshold: bool = False,
) -> RiskReport:
    """Recommend from both sides and score the target's extra privileges.

    A target with no neighbors on either side is reported "unassessable"
    rather than silently non-risky.
    """
    try:
        rec_b: Recommendation = recommend(
            target, benign_train, t_b,
            stop_ratio=stop_ratio, use_index=use_index, relax_threshold=relax_threshold,
        )
        rec_m: Recommendation = recommend(
            target, malicious_train, t_m,
            stop_ratio=stop_ratio, use_index=use_index, relax_threshold=relax_threshold,
        )
    except NoNeighborsError:
        return RiskReport.unassessable(app_id)
    up = unexpected(declared, rec_b.permissions)
    rip = risk_permissions(rec_m.permissions, rec_b.permissions)
    flagged = up & rip
    return RiskReport(
        app_id=app_id,
        status="ok",
        unexpected=up,
        risk_perms=rip,
        flagged=flagged,
        risky=bool(flagged),
        risk_value=risk_value(flagged, registry),
        benign_ranking=tuple(rec_b.ranking()),
    )
