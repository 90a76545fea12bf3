import random

import pytest

from minperm import metrics
from minperm.risk import RiskReport


def report(app_id, unexpected=(), flagged=(), value=0, status="ok"):
    flagged = frozenset(flagged)
    return RiskReport(
        app_id=app_id,
        status=status,
        unexpected=frozenset(unexpected) | flagged,
        risk_perms=flagged,
        flagged=flagged,
        risky=bool(flagged) if status == "ok" else None,
        risk_value=value,
    )


# ---- independent straight-from-formula evaluators ----

def formula_map(rankings, declared):
    total = 0.0
    for app_id, ranking in rankings.items():
        n_k = len(ranking)
        inner = 0.0
        for l in range(1, n_k + 1):
            r_l = len(set(ranking[:l]) & declared[app_id])
            i_l = 1 if ranking[l - 1] in declared[app_id] else 0
            inner += (r_l / l) * i_l
        total += inner / n_k
    return total / len(rankings)


def formula_nr(rankings, necessary):
    values = []
    for app_id, ranking in rankings.items():
        aps = necessary[app_id]
        if not aps:
            continue
        values.append(len([p for p in ranking[: len(aps)] if p in aps]) / len(aps))
    return sum(values) / len(values)


def formula_trr(rankings, necessary, n_all):
    values = []
    for app_id, ranking in rankings.items():
        aps = necessary[app_id]
        if not aps:
            continue
        n_min = None
        for l in range(1, len(ranking) + 1):
            if aps <= set(ranking[:l]):
                n_min = l
                break
        values.append((n_min if n_min is not None else n_all) / len(aps))
    return sum(values) / len(values)


def random_rankings(rng, n_apps, universe):
    rankings, declared, necessary = {}, {}, {}
    for i in range(n_apps):
        perms = rng.sample(universe, rng.randint(1, len(universe)))
        rankings[f"a{i}"] = perms
        declared[f"a{i}"] = frozenset(p for p in universe if rng.random() < 0.5)
        necessary[f"a{i}"] = frozenset(rng.sample(universe, rng.randint(1, 3)))
    return rankings, declared, necessary


class TestMap:
    def test_hand_fixture(self):
        assert metrics.map_metric({"a": ["p1", "p2"]}, {"a": frozenset({"p1"})}) == pytest.approx(0.5, abs=1e-12)

    def test_perfect_ranking_any_order(self):
        declared = frozenset({"x", "y", "z"})
        for ranking in (["x", "y", "z"], ["z", "x", "y"]):
            assert metrics.map_metric({"a": ranking}, {"a": declared}) == pytest.approx(1.0, abs=1e-12)

    def test_empty_ranking_rejected(self):
        with pytest.raises(ValueError):
            metrics.average_precision([], frozenset({"a"}))

    def test_matches_formula_on_random_inputs(self):
        rng = random.Random(0)
        universe = [f"P{i}" for i in range(8)]
        for _ in range(200):
            rankings, declared, _ = random_rankings(rng, rng.randint(1, 10), universe)
            got = metrics.map_metric(rankings, declared)
            assert got == pytest.approx(formula_map(rankings, declared), abs=1e-12)

    def test_permutation_invariant(self):
        rng = random.Random(1)
        universe = [f"P{i}" for i in range(6)]
        rankings, declared, _ = random_rankings(rng, 6, universe)
        items = list(rankings.items())
        rng.shuffle(items)
        assert metrics.map_metric(dict(items), declared) == pytest.approx(
            metrics.map_metric(rankings, declared), abs=1e-12
        )


class TestCounts:
    def test_aupr(self):
        reports = [report("a", unexpected={"X"}), report("b"), report("c"), report("d")]
        assert metrics.aupr(reports) == pytest.approx(0.25, abs=1e-12)
        assert metrics.aupr([report("a"), report("b")]) == 0.0

    def test_rar(self):
        reports = [report(f"x{i}", flagged={"X"} if i < 2 else ()) for i in range(10)]
        assert metrics.rar(reports) == pytest.approx(0.2, abs=1e-12)
        assert metrics.rar([report("a")]) == 0.0

    def test_arisk(self):
        reports = [report("a", flagged={"X"}, value=2), report("b"), report("c", flagged={"Y"}, value=4)]
        assert metrics.arisk(reports) == pytest.approx(2.0, abs=1e-12)
        assert metrics.arisk([report("a"), report("b")]) == 0.0

    def test_unassessable_counts_in_denominator_but_not_arisk(self):
        reports = [report("a", flagged={"X"}, value=2), report("b", status="unassessable")]
        assert metrics.rar(reports) == pytest.approx(0.5, abs=1e-12)
        assert metrics.aupr(reports) == pytest.approx(0.5, abs=1e-12)
        assert metrics.arisk(reports) == pytest.approx(2.0, abs=1e-12)


class TestRecall:
    def test_nr_fixtures(self):
        assert metrics.necessary_recall(["A", "B"], frozenset({"A", "B"})) == 1.0
        assert metrics.necessary_recall(["A", "C"], frozenset({"A", "B"})) == 0.5

    def test_trr_fixtures(self):
        assert metrics.total_recall_ratio(["A", "X"], frozenset({"A"}), n_all=10) == 1.0
        assert metrics.total_recall_ratio(["A", "C", "B"], frozenset({"A", "B"}), n_all=10) == pytest.approx(1.5, abs=1e-12)

    def test_trr_penalizes_missing_total_recall(self):
        assert metrics.total_recall_ratio(["A"], frozenset({"A", "B"}), n_all=10) == pytest.approx(5.0, abs=1e-12)

    def test_match_formula_on_random_inputs(self):
        rng = random.Random(2)
        universe = [f"P{i}" for i in range(8)]
        for _ in range(200):
            rankings, _, necessary = random_rankings(rng, rng.randint(1, 10), universe)
            n_all = len(universe)
            assert metrics.nr(rankings, necessary) == pytest.approx(
                formula_nr(rankings, necessary), abs=1e-12
            )
            assert metrics.trr(rankings, necessary, n_all) == pytest.approx(
                formula_trr(rankings, necessary, n_all), abs=1e-12
            )

    def test_trr_at_least_one_when_total_recall(self):
        rng = random.Random(3)
        universe = [f"P{i}" for i in range(8)]
        for _ in range(100):
            ranking = rng.sample(universe, len(universe))
            necessary = frozenset(rng.sample(universe, rng.randint(1, 4)))
            assert metrics.total_recall_ratio(ranking, necessary, 8) >= 1.0


class TestEvalReport:
    def test_table_column_order(self):
        r = metrics.EvalReport(map_score=0.9, aupr=0.3, rar=0.1, arisk=0.4,
                               nr=0.8, trr=1.2, m=10, unassessable_count=0)
        table = metrics.format_table({"benign": r})
        header, row = table.splitlines()
        assert header.split() == ["test", "set", "AUPR", "RAR", "ARISK", "MAP", "NR", "TRR"]
        assert row.split() == ["benign", "0.300", "0.100", "0.400", "0.900", "0.800", "1.200"]

    def test_evaluate_reports_assembly(self):
        reports = [report("a", unexpected={"X"}, flagged={"X"}, value=2),
                   report("b"), report("c", status="unassessable")]
        rankings = {"a": ["X", "Y"], "b": ["Y"], "c": []}
        declared = {"a": frozenset({"X"}), "b": frozenset({"Y"}), "c": frozenset()}
        necessary = {"a": frozenset({"X"}), "b": frozenset({"Y"}), "c": frozenset()}
        result = metrics.evaluate_reports(reports, rankings, declared, necessary, n_all=5,
                                          parameters={"seed": 1})
        assert result.m == 3
        assert result.unassessable_count == 1
        assert result.aupr == pytest.approx(1 / 3, abs=1e-12)
        assert result.rar == pytest.approx(1 / 3, abs=1e-12)
        assert result.arisk == pytest.approx(1.0, abs=1e-12)
        # app a: ranking [X, Y] vs declared {X} gives 0.5; app b is perfect
        assert result.map_score == pytest.approx((0.5 + 1.0) / 2, abs=1e-12)
        assert result.parameters == {"seed": 1}
