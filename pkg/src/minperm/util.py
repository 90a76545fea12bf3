"""Shared helpers: stable seed derivation and JSON/JSONL round-tripping.

Every randomized stage derives its own stream from (run seed, string tags)
so that results never depend on Python hash randomization or on the order
in which unrelated stages consume randomness.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Any, Iterable, Iterator


class DataError(ValueError):
    """A data file failed to parse or validate (distinct from bad configuration)."""


def subseed(seed: int, *tags: str) -> int:
    """Derive a stable 64-bit child seed from a root seed and string tags."""
    h = hashlib.sha256()
    h.update(str(int(seed)).encode("utf-8"))
    for tag in tags:
        h.update(b"\x00")
        h.update(str(tag).encode("utf-8"))
    return int.from_bytes(h.digest()[:8], "big")


def dump_json(obj: Any, path: str | Path) -> None:
    """Write canonical JSON (sorted keys, fixed separators, trailing newline)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(obj, f, sort_keys=True, indent=1)
        f.write("\n")


def load_json(path: str | Path) -> Any:
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def dump_jsonl(rows: Iterable[dict], path: str | Path) -> None:
    """Write one canonical JSON object per line."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        for row in rows:
            f.write(json.dumps(row, sort_keys=True, separators=(",", ":")))
            f.write("\n")


def load_jsonl(path: str | Path) -> Iterator[tuple[int, dict]]:
    """Yield (1-based line number, parsed object); raise with the line number on bad JSON."""
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                yield lineno, json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: malformed JSON line: {exc}") from exc
