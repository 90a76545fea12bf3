"""Corpus-level evaluation metrics over a test set.

map_metric scores ranking precision against the declared sets; aupr/rar/arisk
summarize the risk reports; nr/trr measure recall of the necessary permission
sets. Apps without an assessment (no neighbors) count toward M in aupr/rar
but are excluded from the averaged metrics.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .risk import RiskReport


def average_precision(ranking: list[str], declared: frozenset[str]) -> float:
    """Mean of R_l / l over ranked positions holding declared permissions."""
    if not ranking:
        raise ValueError("empty ranking")
    hits = 0
    total = 0.0
    for pos, perm in enumerate(ranking, start=1):
        if perm in declared:
            hits += 1
            total += hits / pos
    return total / len(ranking)


def map_metric(rankings: dict[str, list[str]], declared: dict[str, frozenset[str]]) -> float:
    if not rankings:
        return 0.0
    return sum(average_precision(r, declared[a]) for a, r in rankings.items()) / len(rankings)


def aupr(reports: list[RiskReport]) -> float:
    """Fraction of apps with at least one unexpected permission."""
    if not reports:
        return 0.0
    return sum(1 for r in reports if len(r.unexpected) > 0) / len(reports)


def rar(reports: list[RiskReport]) -> float:
    """Fraction of apps flagged risky."""
    if not reports:
        return 0.0
    return sum(1 for r in reports if r.risky) / len(reports)


def arisk(reports: list[RiskReport]) -> float:
    """Mean risk value over assessable apps."""
    assessable = [r for r in reports if r.status == "ok"]
    if not assessable:
        return 0.0
    return sum(r.risk_value for r in assessable) / len(assessable)


def necessary_recall(ranking: list[str], necessary: frozenset[str]) -> float:
    """Share of the necessary permissions found in the top-n, n = |necessary|."""
    if not necessary:
        raise ValueError("empty necessary set")
    top = set(ranking[: len(necessary)])
    return len(top & necessary) / len(necessary)


def nr(rankings: dict[str, list[str]], necessary: dict[str, frozenset[str]]) -> float:
    apps = [a for a in rankings if necessary.get(a)]
    if not apps:
        return 0.0
    return sum(necessary_recall(rankings[a], necessary[a]) for a in apps) / len(apps)


def total_recall_ratio(ranking: list[str], necessary: frozenset[str], n_all: int) -> float:
    """Prefix length needed for total recall per necessary permission.

    If the ranking never covers the necessary set, the prefix length is
    penalized to n_all (every permission the training set can recommend).
    """
    if not necessary:
        raise ValueError("empty necessary set")
    remaining = set(necessary)
    n_min = 0
    for pos, perm in enumerate(ranking, start=1):
        if perm in remaining:
            remaining.discard(perm)
            if not remaining:
                n_min = pos
                break
    if remaining:
        return n_all / len(necessary)
    return n_min / len(necessary)


def trr(rankings: dict[str, list[str]], necessary: dict[str, frozenset[str]], n_all: int) -> float:
    apps = [a for a in rankings if necessary.get(a)]
    if not apps:
        return 0.0
    return sum(total_recall_ratio(rankings[a], necessary[a], n_all) for a in apps) / len(apps)


COLUMNS = ("AUPR", "RAR", "ARISK", "MAP", "NR", "TRR")


@dataclass
class EvalReport:
    """One test set's metric values plus the parameters that produced them."""

    map_score: float
    aupr: float
    rar: float
    arisk: float
    nr: float
    trr: float
    m: int
    unassessable_count: int
    parameters: dict = field(default_factory=dict)

    def column_values(self) -> tuple[float, ...]:
        return (self.aupr, self.rar, self.arisk, self.map_score, self.nr, self.trr)

    def to_dict(self) -> dict:
        return {
            "map": self.map_score,
            "aupr": self.aupr,
            "rar": self.rar,
            "arisk": self.arisk,
            "nr": self.nr,
            "trr": self.trr,
            "m": self.m,
            "unassessable_count": self.unassessable_count,
            "parameters": self.parameters,
        }


def evaluate_reports(
    reports: list[RiskReport],
    rankings: dict[str, list[str]],
    declared: dict[str, frozenset[str]],
    necessary: dict[str, frozenset[str]],
    n_all: int,
    parameters: dict | None = None,
) -> EvalReport:
    """Assemble the full metric set for one test corpus."""
    assessable = {a: r for a, r in rankings.items() if r}
    return EvalReport(
        map_score=map_metric(assessable, declared),
        aupr=aupr(reports),
        rar=rar(reports),
        arisk=arisk(reports),
        nr=nr(assessable, necessary),
        trr=trr(assessable, necessary, n_all),
        m=len(reports),
        unassessable_count=sum(1 for r in reports if r.status != "ok"),
        parameters=parameters or {},
    )


def format_table(rows: dict[str, EvalReport]) -> str:
    """Plain-text table, one row per test set, columns AUPR RAR ARISK MAP NR TRR."""
    header = f"{'test set':<12}" + "".join(f"{c:>9}" for c in COLUMNS)
    lines = [header]
    for name, report in rows.items():
        cells = "".join(f"{v:>9.3f}" for v in report.column_values())
        lines.append(f"{name:<12}{cells}")
    return "\n".join(lines)
