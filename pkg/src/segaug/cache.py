"""Content-addressed stage cache: one JSON file per (document, stage, parameters)."""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Optional

import numpy as np


class Stage(str, Enum):
    SEGMENT = "segment"
    ALIGN = "align"
    TRANSLATE = "translate"


def _feed(h, obj) -> None:
    if isinstance(obj, np.ndarray):
        h.update(f"nd:{obj.dtype.str}:{obj.shape}:".encode())
        h.update(np.ascontiguousarray(obj).tobytes())
    elif isinstance(obj, dict):
        h.update(b"{")
        for k in sorted(obj):
            h.update(json.dumps(str(k)).encode())
            _feed(h, obj[k])
        h.update(b"}")
    elif isinstance(obj, (list, tuple)):
        h.update(b"[")
        for x in obj:
            _feed(h, x)
        h.update(b"]")
    elif isinstance(obj, Enum):
        _feed(h, obj.value)
    else:
        h.update(json.dumps(obj, sort_keys=True).encode())
        h.update(b";")


def digest(**parts: Any) -> str:
    """Stable SHA-256 over nested dicts/lists/scalars/numpy arrays."""
    h = hashlib.sha256()
    _feed(h, parts)
    return h.hexdigest()


@dataclass(frozen=True)
class CacheKey:
    doc_id: str
    stage: Stage
    param_digest: str

    @property
    def filename(self) -> str:
        name = hashlib.sha256(f"{self.doc_id}\0{self.stage.value}\0{self.param_digest}".encode()).hexdigest()
        return f"{self.stage.value}-{name}.json"


class StageCache:
    """Directory of cache entries. ``root=None`` disables caching (every lookup misses).

    Writes go to a temp file that is hard-linked into place, so the first
    writer wins and readers never see a partial entry.
    """

    def __init__(self, root: Optional[os.PathLike] = None):
        self.root = Path(root) if root is not None else None
        if self.root is not None:
            self.root.mkdir(parents=True, exist_ok=True)
        self.events: Counter = Counter()

    def get(self, key: CacheKey):
        if self.root is None:
            self.events[(key.stage.value, "miss")] += 1
            return None
        path = self.root / key.filename
        try:
            with open(path, encoding="utf-8") as fh:
                value = json.load(fh)
        except (FileNotFoundError, json.JSONDecodeError):
            self.events[(key.stage.value, "miss")] += 1
            return None
        self.events[(key.stage.value, "hit")] += 1
        return value

    def put(self, key: CacheKey, value) -> None:
        if self.root is None:
            return
        path = self.root / key.filename
        if path.exists():
            return
        fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=self.root)
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                json.dump(value, fh, ensure_ascii=False)
            try:
                os.link(tmp, path)
            except FileExistsError:
                pass
        finally:
            os.unlink(tmp)


def summarize_events(events: Counter) -> dict[str, dict]:
    out = {}
    for stage in Stage:
        hits = events.get((stage.value, "hit"), 0)
        misses = events.get((stage.value, "miss"), 0)
        total = hits + misses
        out[stage.value] = {"hits": hits, "misses": misses, "hit_rate": (hits / total if total else None)}
    return out
