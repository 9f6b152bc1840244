"""Small shared helpers: deterministic hashing, JSON dumping, thread mapping."""

from __future__ import annotations

import hashlib
import json
import os
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

THREADS_ENV_VAR = "AFFLABEL_THREADS"


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def canonical_json(obj) -> str:
    """Serialize with sorted keys and no whitespace so hashes are stable."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def json_sha256(obj) -> str:
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()


def write_json(path, obj) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def default_workers() -> int:
    """Parallelism degree from the environment, 1 when unset or invalid."""
    raw = os.environ.get(THREADS_ENV_VAR, "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def thread_map(fn, items, workers: int = 1) -> list:
    """Apply fn to each item, in parallel when workers > 1.

    Results come back in input order regardless of completion order, and
    each call of fn must be independent of the others, so the output is
    identical to the sequential run at any worker count.
    """
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
