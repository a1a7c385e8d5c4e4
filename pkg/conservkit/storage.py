"""Proof log: one JSON line ``{"ts", "summary", "meta"}`` per checked identity."""

from __future__ import annotations

import json
import threading
from contextlib import contextmanager
from contextvars import ContextVar
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterable, Iterator, List, Optional


def utc_timestamp() -> str:
    return datetime.now(timezone.utc).isoformat()


def log_entry(summary: str, metadata: Dict[str, Any] | None = None) -> Dict[str, Any]:
    return {"ts": utc_timestamp(), "summary": summary, "meta": metadata or {}}


def append_entries(log_path: Path, entries: Iterable[Dict[str, Any]]) -> Path:
    log_path.parent.mkdir(parents=True, exist_ok=True)
    with log_path.open("a", encoding="utf-8") as f:
        for entry in entries:
            f.write(json.dumps(entry) + "\n")
    return log_path


@dataclass
class ProofLog:
    """Identities checked during one run, in the order they were decided."""

    entries: List[Dict[str, Any]] = field(default_factory=list)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def record(self, label: str, witness: str, method: str, verdict: bool) -> None:
        self.note(label, {"witness": witness, "method": method, "verdict": verdict})

    def note(self, summary: str, metadata: Dict[str, Any] | None = None) -> None:
        entry = log_entry(summary, metadata)
        with self._lock:
            self.entries.append(entry)

    def extend(self, other: "ProofLog") -> None:
        with self._lock:
            self.entries.extend(other.entries)

    def write(self, log_path: Path) -> Path:
        with self._lock:
            entries = list(self.entries)
        return append_entries(log_path, entries)

    def __len__(self) -> int:
        return len(self.entries)


_CURRENT: ContextVar[Optional[ProofLog]] = ContextVar("conservkit_proof_log", default=None)


def current_log() -> Optional[ProofLog]:
    return _CURRENT.get()


@contextmanager
def proof_log(log: Optional[ProofLog] = None) -> Iterator[ProofLog]:
    active = log if log is not None else ProofLog()
    token = _CURRENT.set(active)
    try:
        yield active
    finally:
        _CURRENT.reset(token)


def record_identity(label: str, witness: str, method: str, verdict: bool) -> None:
    log = _CURRENT.get()
    if log is not None:
        log.record(label, witness, method, verdict)


def snapshot_report(snapshot_dir: Path, report: Dict[str, Any], command: str) -> Path:
    snapshot_dir.mkdir(parents=True, exist_ok=True)
    path = snapshot_dir / f"{command}-{datetime.now(timezone.utc).strftime('%Y%m%dT%H%M%SZ')}.json"
    path.write_text(json.dumps(report, indent=2))
    return path
