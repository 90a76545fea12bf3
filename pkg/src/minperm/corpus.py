"""App corpus data model: permission registry, app records, loading and splits.

Corpus files are JSON Lines, one app per line; the permission registry is a
JSON array of {"name", "level"}. Permission names are canonicalized to their
short form (the "android.permission." prefix is stripped) at load time.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .util import DataError, dump_jsonl, load_json, load_jsonl

PERMISSION_PREFIX = "android.permission."
LEVELS = ("normal", "dangerous")
LABELS = ("benign", "malicious")

_SCORE = {"normal": 1, "dangerous": 2}


class CorpusError(DataError):
    """Raised for malformed corpus/registry/map files or invariant violations."""


def canonical_permission(name: str) -> str:
    name = name.strip()
    if name.startswith(PERMISSION_PREFIX):
        name = name[len(PERMISSION_PREFIX):]
    return name


@dataclass(frozen=True)
class PermissionRegistry:
    """Known system permissions and their (two-level) protection levels."""

    levels: dict[str, str]

    def __post_init__(self) -> None:
        for name, level in self.levels.items():
            if not name:
                raise CorpusError("registry contains an empty permission name")
            if level not in LEVELS:
                raise CorpusError(f"registry permission {name!r}: bad level {level!r}")

    def __contains__(self, name: str) -> bool:
        return name in self.levels

    def __len__(self) -> int:
        return len(self.levels)

    def score(self, name: str) -> int:
        """Risk score: 1 for normal, 2 for dangerous."""
        try:
            return _SCORE[self.levels[name]]
        except KeyError:
            raise CorpusError(f"permission {name!r} not in registry") from None

    def names(self) -> list[str]:
        return sorted(self.levels)

    @classmethod
    def load(cls, path: str | Path) -> "PermissionRegistry":
        rows = load_json(path)
        if not isinstance(rows, list):
            raise CorpusError(f"{path}: registry must be a JSON array")
        levels: dict[str, str] = {}
        for row in rows:
            name = canonical_permission(str(row["name"]))
            if name in levels:
                raise CorpusError(f"{path}: duplicate registry permission {name!r}")
            levels[name] = row["level"]
        return cls(levels=levels)

    @classmethod
    def bundled(cls) -> "PermissionRegistry":
        """The registry of 285 system permissions shipped with the package."""
        with resources.as_file(resources.files("minperm.data") / "registry.json") as p:
            return cls.load(p)


@dataclass(frozen=True)
class ApiPermissionMap:
    """API signature -> permission set; unmapped APIs resolve to the empty set."""

    entries: dict[str, frozenset[str]]

    def lookup(self, api: str) -> frozenset[str]:
        return self.entries.get(api, frozenset())

    @classmethod
    def load(cls, path: str | Path, registry: PermissionRegistry) -> "ApiPermissionMap":
        raw = load_json(path)
        if not isinstance(raw, dict):
            raise CorpusError(f"{path}: API map must be a JSON object")
        entries: dict[str, frozenset[str]] = {}
        for api, perms in raw.items():
            canon = frozenset(canonical_permission(p) for p in perms)
            unknown = sorted(p for p in canon if p not in registry)
            if unknown:
                raise CorpusError(f"{path}: API {api!r} maps to unknown permissions {unknown}")
            entries[api] = canon
        return cls(entries=entries)

    @classmethod
    def empty(cls) -> "ApiPermissionMap":
        return cls(entries={})


def derive_code_permissions(api_calls: list[str], api_map: ApiPermissionMap) -> frozenset[str]:
    """Union of mapped permissions over the API call list; unmapped calls add nothing."""
    out: set[str] = set()
    for api in api_calls:
        out |= api_map.lookup(api)
    return frozenset(out)


@dataclass(frozen=True)
class AppRecord:
    """One app: description text, declared and code permissions, label."""

    id: str
    description: str
    declared: frozenset[str]
    api_calls: tuple[str, ...]
    code_perms: frozenset[str]
    label: str

    def to_row(self) -> dict:
        return {
            "id": self.id,
            "description": self.description,
            "declared": sorted(self.declared),
            "api_calls": list(self.api_calls),
            "code_perms": sorted(self.code_perms),
            "label": self.label,
        }


@dataclass
class Corpus:
    records: list[AppRecord]
    registry: PermissionRegistry

    def __len__(self) -> int:
        return len(self.records)

    def by_id(self) -> dict[str, AppRecord]:
        return {r.id: r for r in self.records}

    def benign(self) -> list[AppRecord]:
        return [r for r in self.records if r.label == "benign"]

    def malicious(self) -> list[AppRecord]:
        return [r for r in self.records if r.label == "malicious"]

    def subset(self, records: list[AppRecord]) -> "Corpus":
        return Corpus(records=list(records), registry=self.registry)

    def save(self, path: str | Path) -> None:
        dump_jsonl((r.to_row() for r in self.records), path)


def _canonical_perm_set(
    raw: list, *, registry: PermissionRegistry, app_id: str, on_unknown: str, warnings: list[str]
) -> frozenset[str]:
    perms = {canonical_permission(str(p)) for p in raw}
    unknown = sorted(p for p in perms if p not in registry)
    if unknown:
        if on_unknown == "error":
            raise CorpusError(f"app {app_id!r}: unknown permissions {unknown}")
        warnings.append(f"app {app_id!r}: dropped unknown permissions {unknown}")
        perms -= set(unknown)
    return frozenset(perms)


def load_corpus(
    path: str | Path,
    registry: PermissionRegistry,
    api_map: ApiPermissionMap | None = None,
    on_unknown: str = "error",
    warnings: list[str] | None = None,
) -> Corpus:
    """Load and validate a JSONL corpus.

    ``code_perms`` is taken from the file when present, otherwise derived from
    ``api_calls`` through ``api_map``. ``on_unknown`` controls whether
    non-registry permissions abort the load ("error") or are dropped with a
    warning ("warn").
    """
    if on_unknown not in ("error", "warn"):
        raise ValueError(f"on_unknown must be 'error' or 'warn', got {on_unknown!r}")
    if api_map is None:
        api_map = ApiPermissionMap.empty()
    if warnings is None:
        warnings = []

    records: list[AppRecord] = []
    seen: set[str] = set()
    for lineno, row in load_jsonl(path):
        try:
            app_id = str(row["id"])
            description = str(row.get("description", ""))
            label = str(row["label"])
            declared_raw = row.get("declared", [])
            api_calls = tuple(str(a) for a in row.get("api_calls", []))
        except KeyError as exc:
            raise CorpusError(f"{path}:{lineno}: missing field {exc}") from None
        if label not in LABELS:
            raise CorpusError(f"{path}:{lineno}: app {app_id!r}: bad label {label!r}")
        if app_id in seen:
            raise CorpusError(f"{path}:{lineno}: duplicate app id {app_id!r}")
        seen.add(app_id)

        declared = _canonical_perm_set(
            declared_raw, registry=registry, app_id=app_id, on_unknown=on_unknown, warnings=warnings
        )
        if "code_perms" in row:
            code = _canonical_perm_set(
                row["code_perms"], registry=registry, app_id=app_id,
                on_unknown=on_unknown, warnings=warnings,
            )
        else:
            code = derive_code_permissions(list(api_calls), api_map)
        records.append(
            AppRecord(
                id=app_id,
                description=description,
                declared=declared,
                api_calls=api_calls,
                code_perms=code,
                label=label,
            )
        )
    return Corpus(records=records, registry=registry)


def load_demo_corpus() -> Corpus:
    """The 30-app walkthrough corpus shipped with the package.

    A wallpaper app ("bollywood_live") over-declares three permissions that
    only malicious apps exhibit plus three that its own description cannot
    support; the rest of the corpus provides the benign/malicious context to
    remove them in the two stages.
    """
    registry = PermissionRegistry.bundled()
    with resources.as_file(resources.files("minperm.data") / "demo_corpus.jsonl") as p:
        return load_corpus(p, registry)


def split(corpus: Corpus, test_ratio: float, seed: int) -> tuple[Corpus, Corpus]:
    """Stratified train/test split: each label is split independently.

    Deterministic for a fixed seed and independent of record order in the file.
    """
    if not 0 < test_ratio < 1:
        raise ValueError(f"test_ratio must be in (0, 1), got {test_ratio}")
    train: list[AppRecord] = []
    test: list[AppRecord] = []
    for label in LABELS:
        group = sorted((r for r in corpus.records if r.label == label), key=lambda r: r.id)
        if not group:
            continue
        rng = random.Random(f"{seed}/split/{label}")
        rng.shuffle(group)
        n_test = int(len(group) * test_ratio)
        test.extend(group[:n_test])
        train.extend(group[n_test:])
    train.sort(key=lambda r: r.id)
    test.sort(key=lambda r: r.id)
    return corpus.subset(train), corpus.subset(test)


def partition(records: list[AppRecord], n_folds: int, seed: int) -> list[list[AppRecord]]:
    """Split records into n_folds disjoint folds with sizes differing by at most one."""
    if n_folds < 2:
        raise ValueError(f"n_folds must be >= 2, got {n_folds}")
    if n_folds > len(records):
        raise ValueError(f"n_folds={n_folds} exceeds record count {len(records)}")
    shuffled = sorted(records, key=lambda r: r.id)
    rng = random.Random(f"{seed}/folds")
    rng.shuffle(shuffled)
    base, rem = divmod(len(shuffled), n_folds)
    folds: list[list[AppRecord]] = []
    start = 0
    for k in range(n_folds):
        size = base + (1 if k < rem else 0)
        folds.append(shuffled[start:start + size])
        start += size
    return folds
