"""Synthetic corpus generator with planted ground truth.

Each generated topic owns a vocabulary slice and a small permission set; a
benign app describes one topic and declares that topic's permissions (plus a
couple of corpus-wide common ones). Overprivileged benign apps add extras
drawn from a risk pool; malicious apps declare their topic's permissions plus
most of the risk pool. The ground-truth file records every app's true minimum
set and its planted extras, which is what the removal and risk stages are
measured against.

Generated description words are built from vowel-terminated syllables so they
survive tokenization (stemming included) unchanged.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import AppRecord, Corpus, PermissionRegistry
from .util import dump_jsonl, subseed

_SYLLABLES = (
    "ba", "co", "di", "fu", "go", "ki", "lo", "mu",
    "na", "po", "ru", "su", "ta", "vi", "wo", "zu",
)


def synth_word(index: int) -> str:
    """Deterministic pronounceable word for a vocabulary index."""
    first, second = divmod(index, len(_SYLLABLES))
    if first >= len(_SYLLABLES):
        third, first = divmod(first, len(_SYLLABLES))
        return _SYLLABLES[third] + _SYLLABLES[first] + _SYLLABLES[second]
    return _SYLLABLES[first] + _SYLLABLES[second]


@dataclass(frozen=True)
class SynthSpec:
    """Parameters of the generated corpus."""

    n_benign: int = 200
    n_malicious: int = 40
    n_topics: int = 6
    vocab_size: int = 240
    perms_per_topic: int = 5
    overprivilege_rate: float = 0.4
    extras_per_app: int = 2
    seed: int = 0
    risk_pool_size: int = 8
    n_common_perms: int = 2
    doc_len: int = 40
    malicious_pool_rate: float = 0.85

    def __post_init__(self) -> None:
        for name in ("n_benign", "n_malicious", "n_topics", "vocab_size",
                     "perms_per_topic", "extras_per_app", "risk_pool_size", "doc_len"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not 0.0 <= self.overprivilege_rate <= 1.0:
            raise ValueError("overprivilege_rate must be in [0, 1]")
        if self.vocab_size < self.n_topics:
            raise ValueError("vocab_size must be at least n_topics")

    def permissions_needed(self) -> int:
        return self.n_topics * self.perms_per_topic + self.risk_pool_size + self.n_common_perms


@dataclass
class GroundTruth:
    """True minimum sets and planted extras per app id."""

    true_min: dict[str, frozenset[str]] = field(default_factory=dict)
    planted_extras: dict[str, frozenset[str]] = field(default_factory=dict)
    risk_pool: frozenset[str] = frozenset()

    def rows(self) -> list[dict]:
        return [
            {
                "app_id": app_id,
                "true_min": sorted(self.true_min[app_id]),
                "planted_extras": sorted(self.planted_extras[app_id]),
            }
            for app_id in sorted(self.true_min)
        ]

    def save(self, path: str | Path) -> None:
        dump_jsonl(self.rows(), path)


def generate(spec: SynthSpec, registry: PermissionRegistry | None = None) -> tuple[Corpus, GroundTruth]:
    """Build a corpus and its ground truth; identical spec gives identical output."""
    if registry is None:
        registry = PermissionRegistry.bundled()
    if spec.permissions_needed() > len(registry):
        raise ValueError(
            f"spec needs {spec.permissions_needed()} permissions "
            f"but the registry has only {len(registry)}"
        )

    names = registry.names()
    random.Random(subseed(spec.seed, "perm-pools")).shuffle(names)
    cursor = 0

    def take(n: int) -> list[str]:
        nonlocal cursor
        out = names[cursor:cursor + n]
        cursor += n
        return out

    common = frozenset(take(spec.n_common_perms))
    topic_perms = [frozenset(take(spec.perms_per_topic)) for _ in range(spec.n_topics)]
    risk_pool = sorted(take(spec.risk_pool_size))

    vocab = [synth_word(i) for i in range(spec.vocab_size)]
    slice_size = spec.vocab_size // spec.n_topics
    topic_words = [
        vocab[t * slice_size: (t + 1) * slice_size] if t < spec.n_topics - 1
        else vocab[t * slice_size:]
        for t in range(spec.n_topics)
    ]

    def description(app_id: str, topic: int) -> str:
        rng = random.Random(subseed(spec.seed, "desc", app_id))
        return " ".join(rng.choice(topic_words[topic]) for _ in range(spec.doc_len))

    truth = GroundTruth(risk_pool=frozenset(risk_pool))
    records: list[AppRecord] = []

    for i in range(spec.n_benign):
        app_id = f"b{i:05d}"
        topic = i % spec.n_topics
        true_min = topic_perms[topic] | common
        rng = random.Random(subseed(spec.seed, "perms", app_id))
        extras: frozenset[str] = frozenset()
        if rng.random() < spec.overprivilege_rate:
            n_extras = min(spec.extras_per_app, len(risk_pool))
            extras = frozenset(rng.sample(risk_pool, n_extras))
        records.append(
            AppRecord(
                id=app_id,
                description=description(app_id, topic),
                declared=true_min | extras,
                api_calls=(),
                code_perms=true_min,
                label="benign",
            )
        )
        truth.true_min[app_id] = true_min
        truth.planted_extras[app_id] = extras

    for j in range(spec.n_malicious):
        app_id = f"m{j:05d}"
        topic = j % spec.n_topics
        true_min = topic_perms[topic] | common
        rng = random.Random(subseed(spec.seed, "perms", app_id))
        pool_perms = frozenset(p for p in risk_pool if rng.random() < spec.malicious_pool_rate)
        if not pool_perms:
            pool_perms = frozenset(rng.sample(risk_pool, 1))
        records.append(
            AppRecord(
                id=app_id,
                description=description(app_id, topic),
                declared=true_min | pool_perms,
                api_calls=(),
                code_perms=true_min | pool_perms,
                label="malicious",
            )
        )
        truth.true_min[app_id] = true_min
        truth.planted_extras[app_id] = pool_perms

    records.sort(key=lambda r: r.id)
    return Corpus(records=records, registry=registry), truth


def load_truth(path: str | Path) -> GroundTruth:
    from .util import load_jsonl

    truth = GroundTruth()
    for _, row in load_jsonl(path):
        truth.true_min[row["app_id"]] = frozenset(row["true_min"])
        truth.planted_extras[row["app_id"]] = frozenset(row["planted_extras"])
    return truth
