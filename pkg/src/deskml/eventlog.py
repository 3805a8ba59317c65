"""Append-only event log: the single serialization point for all state.

One JSON object per line: {"seq", "kind", "id", "ts", "payload"}. Sequence
numbers are gapless and strictly increasing. Snapshots are a single JSON
object embedding the max sequence they cover.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterator, Optional

from .errors import CorruptLogError, PersistenceError


@dataclass(frozen=True)
class Record:
    seq: int
    kind: str
    entity_id: str
    ts: int
    payload: dict[str, Any]

    def to_json(self) -> str:
        return json.dumps(
            {"seq": self.seq, "kind": self.kind, "id": self.entity_id,
             "ts": self.ts, "payload": self.payload},
            sort_keys=True,
        )

    @classmethod
    def from_obj(cls, obj: dict[str, Any]) -> "Record":
        return cls(seq=obj["seq"], kind=obj["kind"], entity_id=obj["id"],
                   ts=obj["ts"], payload=obj["payload"])


class EventLog:
    """In-memory record list, optionally mirrored to a line-delimited file.

    Appends are mutually exclusive; reads take a snapshot under the same lock
    and can then be consumed concurrently.
    """

    def __init__(self, path: Optional[Path] = None):
        self._lock = threading.Lock()
        self._records: list[Record] = []
        self._path = Path(path) if path else None
        self._fh = None
        if self._path:
            self._path.parent.mkdir(parents=True, exist_ok=True)
            if self._path.exists():
                self._records = list(replay_file(self._path))
            self._fh = open(self._path, "a", encoding="utf-8")

    @property
    def max_seq(self) -> int:
        with self._lock:
            return self._records[-1].seq if self._records else 0

    def append(self, kind: str, entity_id: str, ts: int, payload: dict[str, Any]) -> Record:
        with self._lock:
            seq = (self._records[-1].seq if self._records else 0) + 1
            record = Record(seq=seq, kind=kind, entity_id=entity_id, ts=ts, payload=payload)
            if self._fh is not None:
                try:
                    self._fh.write(record.to_json() + "\n")
                    self._fh.flush()
                except OSError as exc:
                    raise PersistenceError(f"append failed: {exc}") from exc
            self._records.append(record)
            return record

    def append_record(self, record: Record) -> None:
        """Adopt a record produced elsewhere (replication). Seq must be next."""
        with self._lock:
            expected = (self._records[-1].seq if self._records else 0) + 1
            if record.seq != expected:
                raise PersistenceError(
                    f"replicated record out of order: got seq {record.seq}, expected {expected}"
                )
            if self._fh is not None:
                try:
                    self._fh.write(record.to_json() + "\n")
                    self._fh.flush()
                except OSError as exc:
                    raise PersistenceError(f"append failed: {exc}") from exc
            self._records.append(record)

    def records(self, from_seq: int = 1, to_seq: Optional[int] = None) -> list[Record]:
        if from_seq < 1:
            raise ValueError("from_seq must be >= 1")
        with self._lock:
            hi = to_seq if to_seq is not None else len(self._records)
            return self._records[from_seq - 1 : hi]

    def truncate_to(self, seq: int) -> None:
        """Drop records beyond seq (used when a deposed primary resyncs)."""
        with self._lock:
            self._records = self._records[:seq]
            if self._fh is not None:
                self._fh.close()
                with open(self._path, "w", encoding="utf-8") as fh:
                    for rec in self._records:
                        fh.write(rec.to_json() + "\n")
                self._fh = open(self._path, "a", encoding="utf-8")

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None


def replay_file(path: Path, from_seq: int = 1) -> Iterator[Record]:
    """Stream records from a log file, halting loudly on corruption."""
    expected = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = Record.from_obj(json.loads(line))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise CorruptLogError(f"undecodable record: {exc}", lineno) from exc
            if expected is not None and record.seq != expected:
                raise CorruptLogError(
                    f"sequence gap: got {record.seq}, expected {expected}", lineno
                )
            expected = record.seq + 1
            if record.seq >= from_seq:
                yield record


def write_snapshot(path: Path, state_dict: dict[str, Any], max_seq: int) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump({"max_seq": max_seq, "state": state_dict}, fh, sort_keys=True)
    tmp.replace(path)


def load_snapshot(path: Path) -> tuple[int, dict[str, Any]]:
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    return obj["max_seq"], obj["state"]
