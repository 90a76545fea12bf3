"""Topic-permission support mining and low-support filtering.

For each topic, a permission's support degree is the topic mass of the apps
holding it divided by the topic mass of all apps. Per-app scores aggregate
each topic's top permissions weighted by the app's topic probabilities; the
initial minimum set is then stripped of permissions whose score stays below
the support threshold in both the declared-based and code-based tables.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .util import dump_json, load_json

log = logging.getLogger(__name__)

SOURCES = ("declared", "code")


@dataclass
class SupportTable:
    """Per-topic permission support degrees, all in [0, 1]."""

    source: str
    rows: list[dict[str, float]]
    model_fingerprint: str = ""

    def __post_init__(self) -> None:
        if self.source not in SOURCES:
            raise ValueError(f"source must be one of {SOURCES}, got {self.source!r}")

    @property
    def n_topics(self) -> int:
        return len(self.rows)

    def known_permissions(self) -> frozenset[str]:
        out: set[str] = set()
        for row in self.rows:
            out.update(row)
        return frozenset(out)

    def save(self, path: str | Path) -> None:
        dump_json(
            {
                "source": self.source,
                "model_fingerprint": self.model_fingerprint,
                "topics": {str(i): row for i, row in enumerate(self.rows)},
            },
            path,
        )

    @classmethod
    def load(cls, path: str | Path) -> "SupportTable":
        d = load_json(path)
        topics = d["topics"]
        rows = [dict(sorted(topics[str(i)].items())) for i in range(len(topics))]
        return cls(source=d["source"], rows=rows, model_fingerprint=d.get("model_fingerprint", ""))


def mine_support(
    func: np.ndarray,
    perm_sets: list[frozenset[str]],
    source: str,
    model_fingerprint: str = "",
) -> SupportTable:
    """Mine a topic -> permission -> support table from one permission source.

    support(topic, perm) = sum of the topic probability over apps holding perm
    divided by the sum over all apps; a topic with zero total mass gets an
    empty row.
    """
    if func.shape[0] != len(perm_sets):
        raise ValueError("func rows and permission sets must align")
    n_topics = func.shape[1]
    denom = func.sum(axis=0)

    all_perms = sorted(set().union(*perm_sets)) if perm_sets else []
    holders = {
        perm: np.fromiter((perm in s for s in perm_sets), dtype=bool, count=len(perm_sets))
        for perm in all_perms
    }
    rows: list[dict[str, float]] = []
    for t in range(n_topics):
        if denom[t] <= 0.0:
            log.warning("topic %d has zero probability mass; empty support row", t)
            rows.append({})
            continue
        row: dict[str, float] = {}
        for perm in all_perms:
            numer = float(func[holders[perm], t].sum())
            if numer > 0.0:
                row[perm] = numer / float(denom[t])
        rows.append(row)
    return SupportTable(source=source, rows=rows, model_fingerprint=model_fingerprint)


def topic_perm_scores(
    func_vec: np.ndarray, table: SupportTable, top_t: int
) -> dict[str, float]:
    """Aggregate each topic's top-``top_t`` permissions, weighted by topic probability."""
    if top_t < 1:
        raise ValueError(f"top_t must be >= 1, got {top_t}")
    if func_vec.shape[0] != table.n_topics:
        raise ValueError("topic vector length does not match the support table")
    scores: dict[str, float] = {}
    for t, row in enumerate(table.rows):
        weight = float(func_vec[t])
        if not row or weight <= 0.0:
            continue
        top = sorted(row.items(), key=lambda kv: (-kv[1], kv[0]))[:top_t]
        for perm, support in top:
            scores[perm] = scores.get(perm, 0.0) + support * weight
    return scores


def final_minset(
    initial: frozenset[str],
    func_vec: np.ndarray,
    declared_table: SupportTable,
    code_table: SupportTable,
    theta_support: float,
    top_t: int,
) -> frozenset[str]:
    """Drop initial permissions whose support score is below threshold everywhere.

    A permission passes if its aggregated score reaches theta_support in the
    declared-based table or in the code-based table (union rule). Permissions
    absent from both tables are retained: unknown is not the same as
    low-support.
    """
    declared_scores = topic_perm_scores(func_vec, declared_table, top_t)
    code_scores = topic_perm_scores(func_vec, code_table, top_t)
    known = declared_table.known_permissions() | code_table.known_permissions()
    kept = {
        perm
        for perm in initial
        if perm not in known
        or declared_scores.get(perm, 0.0) >= theta_support
        or code_scores.get(perm, 0.0) >= theta_support
    }
    return frozenset(kept)
