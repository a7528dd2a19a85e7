"""Hashing and canonical JSON helpers.

Artifacts are hashed over a canonical JSON encoding (sorted keys, compact
separators, shortest-round-trip floats), so equal payloads hash equally
regardless of dict construction order, and reruns with the same seeds
produce byte-identical files.
"""

from __future__ import annotations

import hashlib
import json


def canonical_dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def payload_hash(obj) -> str:
    return hashlib.sha256(canonical_dumps(obj).encode()).hexdigest()


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def write_json(path, obj) -> None:
    """Canonical dump plus trailing newline; stable byte-for-byte."""
    with open(path, "w") as fh:
        fh.write(canonical_dumps(obj))
        fh.write("\n")


def read_json(path) -> dict:
    with open(path) as fh:
        return json.load(fh)
