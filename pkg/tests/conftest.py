import random

import numpy as np
import pytest

from minperm.corpus import AppRecord, Corpus, PermissionRegistry


@pytest.fixture(scope="session")
def registry() -> PermissionRegistry:
    return PermissionRegistry.bundled()


def make_record(app_id, declared=(), label="benign", description="app words here",
                code_perms=None, api_calls=()):
    declared = frozenset(declared)
    return AppRecord(
        id=app_id,
        description=description,
        declared=declared,
        api_calls=tuple(api_calls),
        code_perms=frozenset(code_perms) if code_perms is not None else declared,
        label=label,
    )


def make_corpus(registry, records):
    return Corpus(records=list(records), registry=registry)


def random_prob_vector(rng: random.Random, k: int) -> np.ndarray:
    raw = np.array([rng.random() + 1e-3 for _ in range(k)])
    return raw / raw.sum()


def random_perm_subset(rng: random.Random, universe: list[str]) -> frozenset[str]:
    return frozenset(p for p in universe if rng.random() < 0.5)
