"""Append-only per-node message logs and their on-disk form.

Each node gets one file of length-prefixed records (4-byte big-endian length,
then canonical JSON). A separate ``public`` log holds what every node sees:
run setup, published centers and aggregates, and the obfuscated shares fed to
the averaging step.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Any, Iterator

PUBLIC_FILE = "public.bin"
_LEN = struct.Struct(">I")


class TranscriptError(RuntimeError):
    pass


def node_file(i: int) -> str:
    return f"node_{i:04d}.bin"


def _dump(record: dict[str, Any]) -> bytes:
    return json.dumps(record, sort_keys=True, separators=(",", ":")).encode()


class TranscriptStore:
    def __init__(self, n: int):
        self.n = n
        self._nodes: list[list[dict[str, Any]]] = [[] for _ in range(n)]
        self._public: list[dict[str, Any]] = []
        self._frozen = False

    @property
    def frozen(self) -> bool:
        return self._frozen

    def freeze(self) -> "TranscriptStore":
        self._frozen = True
        return self

    def _guard(self) -> None:
        if self._frozen:
            raise TranscriptError("transcript is frozen")

    def record(self, node: int, kind: str, t: int, **payload: Any) -> None:
        self._guard()
        self._nodes[node].append({"kind": kind, "t": t, **payload})

    def publish(self, kind: str, t: int, **payload: Any) -> None:
        self._guard()
        self._public.append({"kind": kind, "t": t, **payload})

    def node_records(self, i: int, kind: str | None = None) -> list[dict[str, Any]]:
        recs = self._nodes[i]
        return [dict(r) for r in recs if kind is None or r["kind"] == kind]

    def public_records(self, kind: str | None = None) -> list[dict[str, Any]]:
        return [dict(r) for r in self._public if kind is None or r["kind"] == kind]

    def setup(self) -> dict[str, Any]:
        recs = self.public_records("setup")
        if len(recs) != 1:
            raise TranscriptError("transcript lacks a unique setup record")
        return recs[0]

    def iterations(self) -> list[int]:
        return sorted({r["t"] for r in self._public if r["kind"] == "shares"})

    def save(self, directory: str | Path) -> None:
        out = Path(directory)
        out.mkdir(parents=True, exist_ok=True)
        _write_log(out / PUBLIC_FILE, self._public)
        for i, recs in enumerate(self._nodes):
            _write_log(out / node_file(i), recs)

    @classmethod
    def load(cls, directory: str | Path, nodes: set[int] | None = None) -> "TranscriptStore":
        """Read a persisted run; ``nodes`` restricts which node logs are loaded."""
        src = Path(directory)
        public = list(_read_log(src / PUBLIC_FILE))
        setups = [r for r in public if r["kind"] == "setup"]
        if len(setups) != 1:
            raise TranscriptError(f"{src / PUBLIC_FILE}: missing setup record")
        store = cls(setups[0]["n"])
        store._public = public
        for i in range(store.n):
            if nodes is not None and i not in nodes:
                continue
            path = src / node_file(i)
            if not path.exists():
                raise TranscriptError(f"missing transcript {path}")
            store._nodes[i] = list(_read_log(path))
        return store.freeze()


def _write_log(path: Path, records: list[dict[str, Any]]) -> None:
    with open(path, "wb") as fh:
        for rec in records:
            blob = _dump(rec)
            fh.write(_LEN.pack(len(blob)))
            fh.write(blob)


def _read_log(path: Path) -> Iterator[dict[str, Any]]:
    data = path.read_bytes()
    pos = 0
    while pos < len(data):
        if pos + _LEN.size > len(data):
            raise TranscriptError(f"{path}: truncated length prefix at byte {pos}")
        (size,) = _LEN.unpack_from(data, pos)
        pos += _LEN.size
        if pos + size > len(data):
            raise TranscriptError(f"{path}: truncated record at byte {pos}")
        yield json.loads(data[pos : pos + size])
        pos += size
