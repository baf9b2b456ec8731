"""Flat-file result cache with a versioned, hashed header, plus scan checkpoints."""

from __future__ import annotations

import hashlib
import json
import logging
import os
from pathlib import Path
from typing import Any

log = logging.getLogger(__name__)

CACHE_VERSION = 1
CACHE_ENV = "R2CS_CACHE_DIR"


class CacheError(RuntimeError):
    """A cache file whose header or body does not check out."""


def default_cache_dir() -> Path:
    env = os.environ.get(CACHE_ENV)
    if env:
        return Path(env)
    return Path(os.environ.get("XDG_CACHE_HOME", Path.home() / ".cache")) / "r2cs"


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def digest(obj: Any) -> str:
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()


def make_header(kind: str, field: dict, extra: dict | None = None) -> dict:
    header = {"version": CACHE_VERSION, "kind": kind, "field": field}
    if extra:
        header.update(extra)
    return header


class Cache:
    """``<dir>/<kind>-<header hash>.json``; each file stores header, body and body hash."""

    def __init__(self, directory: str | os.PathLike | None = None, enabled: bool = True):
        self.dir = Path(directory) if directory is not None else default_cache_dir()
        self.enabled = enabled

    def path(self, header: dict, suffix: str = "json") -> Path:
        return self.dir / f"{header['kind']}-{digest(header)[:16]}.{suffix}"

    def load(self, header: dict) -> Any | None:
        if not self.enabled:
            return None
        p = self.path(header)
        if not p.exists():
            return None
        try:
            doc = json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise CacheError(f"{p}: unreadable cache file") from exc
        if doc.get("header") != header:
            raise CacheError(f"{p}: header mismatch")
        if doc.get("body_hash") != digest(doc.get("body")):
            raise CacheError(f"{p}: body hash mismatch")
        return doc["body"]

    def store(self, header: dict, body: Any) -> Path | None:
        if not self.enabled:
            return None
        self.dir.mkdir(parents=True, exist_ok=True)
        p = self.path(header)
        doc = {"header": header, "body": body, "body_hash": digest(body)}
        _atomic_write(p, canonical_json(doc))
        return p

    # checkpoints live next to the final file and are removed once it exists

    def load_checkpoint(self, header: dict) -> dict | None:
        if not self.enabled:
            return None
        p = self.path(header, "partial.json")
        if not p.exists():
            return None
        doc = json.loads(p.read_text())
        if doc.get("header") != header:
            raise CacheError(f"{p}: checkpoint header mismatch")
        return doc["state"]

    def store_checkpoint(self, header: dict, state: dict) -> None:
        if not self.enabled:
            return
        self.dir.mkdir(parents=True, exist_ok=True)
        _atomic_write(self.path(header, "partial.json"),
                      canonical_json({"header": header, "state": state}))

    def clear_checkpoint(self, header: dict) -> None:
        p = self.path(header, "partial.json")
        if p.exists():
            p.unlink()


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)
