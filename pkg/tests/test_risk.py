import random

import numpy as np
import pytest

from minperm.corpus import CorpusError
from minperm.recommender import TrainingSet
from minperm.risk import assess, risk_permissions, risk_value, unexpected
from conftest import random_perm_subset


def make_training(ids, vecs, perms):
    return TrainingSet(ids=list(ids), func=np.array(vecs), declared=[frozenset(p) for p in perms])


class TestSetOperations:
    def test_unexpected_examples(self):
        assert unexpected(frozenset({"A", "B"}), frozenset({"A"})) == {"B"}
        assert unexpected(frozenset({"A"}), frozenset({"A", "B"})) == frozenset()
        assert unexpected(frozenset(), frozenset({"A"})) == frozenset()

    def test_risk_permission_examples(self):
        assert risk_permissions(frozenset({"A", "C"}), frozenset({"A"})) == {"C"}
        assert risk_permissions(frozenset({"A"}), frozenset({"A"})) == frozenset()
        assert risk_permissions(frozenset(), frozenset({"A"})) == frozenset()

    def test_identities_match_simplified_forms(self):
        # DP - (RP_B intersect DP) == DP - RP_B and RP_M - (RP_M intersect RP_B) == RP_M - RP_B
        rng = random.Random(0)
        universe = [f"P{i}" for i in range(8)]
        for _ in range(200):
            dp = random_perm_subset(rng, universe)
            rp_b = random_perm_subset(rng, universe)
            rp_m = random_perm_subset(rng, universe)
            assert unexpected(dp, rp_b) == dp - (rp_b & dp)
            assert risk_permissions(rp_m, rp_b) == rp_m - (rp_m & rp_b)


class TestRiskValue:
    def test_empty(self, registry):
        assert risk_value(frozenset(), registry) == 0

    def test_one_dangerous(self, registry):
        assert risk_value(frozenset({"SEND_SMS"}), registry) == 2

    def test_normal_plus_dangerous(self, registry):
        assert risk_value(frozenset({"INTERNET", "SEND_SMS"}), registry) == 3

    def test_additive_and_monotone(self, registry):
        rng = random.Random(1)
        names = registry.names()
        for _ in range(50):
            a = frozenset(rng.sample(names, 4))
            b = frozenset(rng.sample(names, 4)) - a
            assert risk_value(a | b, registry) == risk_value(a, registry) + risk_value(b, registry)
            assert risk_value(a | b, registry) >= risk_value(a, registry)

    def test_unknown_permission_rejected(self, registry):
        with pytest.raises(CorpusError):
            risk_value(frozenset({"NOT_REAL"}), registry)


class TestAssess:
    def _world(self):
        vec = np.array([0.9, 0.05, 0.05])
        benign_ts = make_training(
            ["b1", "b2"], [vec, vec], [{"INTERNET", "ACCESS_NETWORK_STATE"}] * 2
        )
        malicious_ts = make_training(
            ["m1", "m2"], [vec, vec], [{"INTERNET", "SEND_SMS", "READ_LOGS"}] * 2
        )
        return vec, benign_ts, malicious_ts

    def test_flagged_intersection_drives_risky(self, registry):
        vec, benign_ts, malicious_ts = self._world()
        declared = frozenset({"INTERNET", "ACCESS_NETWORK_STATE", "SEND_SMS"})
        report = assess("t", declared, vec, benign_ts, malicious_ts, 0.6, 0.4, registry)
        assert report.status == "ok"
        assert report.unexpected == {"SEND_SMS"}
        assert report.risk_perms == {"SEND_SMS", "READ_LOGS"}
        assert report.flagged == {"SEND_SMS"}
        assert report.risky is True
        assert report.risk_value == 2

    def test_fully_covered_app_not_risky(self, registry):
        vec, benign_ts, malicious_ts = self._world()
        declared = frozenset({"INTERNET", "ACCESS_NETWORK_STATE"})
        report = assess("t", declared, vec, benign_ts, malicious_ts, 0.6, 0.4, registry)
        assert report.risky is False
        assert report.risk_value == 0
        assert report.unexpected == frozenset()

    def test_invariants(self, registry):
        vec, benign_ts, malicious_ts = self._world()
        rng = random.Random(2)
        universe = ["INTERNET", "ACCESS_NETWORK_STATE", "SEND_SMS", "READ_LOGS", "CAMERA"]
        for _ in range(50):
            declared = random_perm_subset(rng, universe)
            report = assess("t", declared, vec, benign_ts, malicious_ts, 0.6, 0.4, registry)
            assert report.flagged <= report.unexpected
            assert report.flagged <= report.risk_perms
            assert report.risky == bool(report.flagged)
            assert (report.risk_value == 0) == (not report.risky)

    def test_risky_monotone_in_declared(self, registry):
        vec, benign_ts, malicious_ts = self._world()
        rng = random.Random(3)
        universe = ["INTERNET", "ACCESS_NETWORK_STATE", "SEND_SMS", "READ_LOGS", "CAMERA"]
        for _ in range(50):
            declared = random_perm_subset(rng, universe)
            extra = frozenset(rng.sample(universe, 2))
            small = assess("t", declared, vec, benign_ts, malicious_ts, 0.6, 0.4, registry)
            large = assess("t", declared | extra, vec, benign_ts, malicious_ts, 0.6, 0.4, registry)
            if small.risky:
                assert large.risky

    def test_unassessable_not_false_negative(self, registry):
        vec, benign_ts, malicious_ts = self._world()
        far = np.array([0.05, 0.05, 0.9])
        report = assess("t", frozenset({"SEND_SMS"}), far, benign_ts, malicious_ts,
                        0.95, 0.95, registry)
        assert report.status == "unassessable"
        assert report.risky is None
        assert report.risk_value == 0

    def test_report_row_shape(self, registry):
        vec, benign_ts, malicious_ts = self._world()
        report = assess("t", frozenset({"SEND_SMS"}), vec, benign_ts, malicious_ts,
                        0.6, 0.4, registry)
        row = report.to_row()
        assert set(row) == {"app_id", "status", "unexpected", "risk_perms", "flagged",
                            "risky", "risk_value"}
        assert row["unexpected"] == sorted(report.unexpected)
