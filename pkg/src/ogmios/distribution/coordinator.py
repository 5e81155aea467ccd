"""Work-unit state machine for distributed annotation.

Units move ``queued -> leased -> done``; a failed or expired lease sends the
unit back to ``queued`` with its attempt counter raised, until
``max_attempts`` is reached and the unit becomes ``failed-permanent``.  All
transitions happen under one lock and are appended to an optional journal,
so a restarted coordinator resumes where it stopped.
"""
from __future__ import annotations

import base64
import hashlib
import json
import logging
import os
import threading
import time
from collections import deque
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Iterable, Optional

from ..model import ValidationError, deserialize
from ..pipeline import write_atomic

log = logging.getLogger(__name__)

QUEUED = "queued"
LEASED = "leased"
DONE = "done"
FAILED = "failed-permanent"
STATES = (QUEUED, LEASED, DONE, FAILED)

# submit_result outcomes
ACCEPTED = "accepted"
REQUEUED = "requeued"
FAILED_PERMANENTLY = "failed"
DISCARDED = "discarded"

DEFAULT_LEASE_SECONDS = 300.0
DEFAULT_MAX_ATTEMPTS = 3


class UnknownWorker(Exception):
    pass


class UnknownUnit(Exception):
    pass


class DuplicateDocument(ValueError):
    def __init__(self, doc_id: str):
        self.doc_id = doc_id
        super().__init__(f"duplicate document id {doc_id!r}")


@dataclass
class WorkUnit:
    unit_id: str
    doc_id: str
    fmt: str = "text"
    payload: Optional[bytes] = None
    source: Optional[str] = None
    attempt: int = 1
    state: str = QUEUED
    lease_deadline: Optional[float] = None
    worker: Optional[str] = None

    def read_payload(self) -> bytes:
        if self.payload is not None:
            return self.payload
        return Path(self.source).read_bytes()


@dataclass(frozen=True)
class WorkResult:
    unit_id: str
    attempt: int
    worker_id: str
    ok: bool
    document: Optional[bytes] = None
    step: Optional[str] = None
    message: Optional[str] = None
    timings: tuple = ()


class DirectoryStore:
    """Persists accepted outputs as ``<out_dir>/<doc_id>.xml``."""

    def __init__(self, out_dir):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)

    def __call__(self, unit: WorkUnit, data: bytes) -> None:
        write_atomic(self.out_dir / f"{unit.doc_id}.xml", data)


class Journal:
    """Append-only JSON-lines log of state transitions."""

    def __init__(self, path, fsync: bool = False):
        self.path = Path(path)
        self.fsync = fsync
        self._fh = open(self.path, "a", encoding="utf-8")

    def write(self, record: dict) -> None:
        self._fh.write(json.dumps(record, sort_keys=True, ensure_ascii=False) + "\n")
        self._fh.flush()
        if self.fsync:
            os.fsync(self._fh.fileno())

    def close(self) -> None:
        self._fh.close()

    @staticmethod
    def read(path) -> list:
        records = []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    records.append(json.loads(line))
                except json.JSONDecodeError:
                    # a torn final line from a crash is dropped
                    log.warning("%s:%d: ignoring unreadable journal line", path, lineno)
        return records


class Coordinator:
    def __init__(self, lease_seconds: float = DEFAULT_LEASE_SECONDS, max_attempts: int = DEFAULT_MAX_ATTEMPTS,
                 clock: Callable[[], float] = time.monotonic, journal: Optional[Journal] = None,
                 store: Optional[Callable[[WorkUnit, bytes], None]] = None, validate_results: bool = True):
        if max_attempts < 1:
            raise ValueError("max_attempts must be at least 1")
        self.lease_seconds = lease_seconds
        self.max_attempts = max_attempts
        self.clock = clock
        self.journal = journal
        self.store = store
        self.validate_results = validate_results
        self.units: dict = {}
        self._doc_ids: set = set()
        self._queue: deque = deque()
        self._leased: dict = {}
        self._counts = dict.fromkeys(STATES, 0)
        self.workers: set = set()
        self.persisted: dict = {}  # unit id -> sha256 of the stored output
        self._lock = threading.RLock()

    # -- bookkeeping ------------------------------------------------------

    def _log(self, **record) -> None:
        if self.journal is not None:
            self.journal.write(record)

    def _set_state(self, unit: WorkUnit, state: str) -> None:
        self._counts[unit.state] -= 1
        self._counts[state] += 1
        unit.state = state
        if state == LEASED:
            self._leased[unit.unit_id] = unit
        else:
            self._leased.pop(unit.unit_id, None)
            unit.lease_deadline = None
        if state == QUEUED:
            self._queue.append(unit.unit_id)

    def _retry_or_fail(self, unit: WorkUnit, step: Optional[str], message: Optional[str]) -> str:
        if unit.attempt >= self.max_attempts:
            self._set_state(unit, FAILED)
            self._log(op="failed", unit=unit.unit_id, attempt=unit.attempt, step=step, message=message)
            return FAILED_PERMANENTLY
        unit.attempt += 1
        self._set_state(unit, QUEUED)
        self._log(op="requeue", unit=unit.unit_id, attempt=unit.attempt, step=step, message=message)
        return REQUEUED

    # -- operations --------------------------------------------------------

    def hello(self, worker_id: str) -> None:
        if not worker_id:
            raise UnknownWorker("empty worker id")
        with self._lock:
            self.workers.add(worker_id)

    def enqueue(self, docs: Iterable) -> int:
        """Queue ``(doc_id, payload_or_path, fmt)`` items; a ``Path`` payload is
        read lazily at dispatch time.  Rejects the whole batch on a duplicate id.
        """
        batch = []
        seen = set()
        for doc_id, data, fmt in docs:
            if doc_id in seen or doc_id in self._doc_ids:
                raise DuplicateDocument(doc_id)
            seen.add(doc_id)
            batch.append((doc_id, data, fmt))
        with self._lock:
            if seen & self._doc_ids:
                raise DuplicateDocument(sorted(seen & self._doc_ids)[0])
            for doc_id, data, fmt in batch:
                unit_id = f"u{len(self.units) + 1:06d}"
                if isinstance(data, (bytes, bytearray)):
                    unit = WorkUnit(unit_id, doc_id, fmt, payload=bytes(data))
                    inline = base64.b64encode(unit.payload).decode("ascii")
                    self._log(op="enqueue", unit=unit_id, doc=doc_id, fmt=fmt, source=None, payload=inline)
                else:
                    unit = WorkUnit(unit_id, doc_id, fmt, source=str(data))
                    self._log(op="enqueue", unit=unit_id, doc=doc_id, fmt=fmt, source=unit.source, payload=None)
                self.units[unit_id] = unit
                self._doc_ids.add(doc_id)
                self._counts[QUEUED] += 1
                self._queue.append(unit_id)
        return len(batch)

    def expire(self) -> int:
        """Requeue (or fail) every lease past its deadline."""
        now = self.clock()
        n = 0
        with self._lock:
            for unit in [u for u in self._leased.values() if u.lease_deadline <= now]:
                log.info("lease on %s (attempt %d, worker %s) expired", unit.unit_id, unit.attempt, unit.worker)
                self._retry_or_fail(unit, None, f"lease held by {unit.worker} expired")
                n += 1
        return n

    def dispatch(self, worker_id: str) -> Optional[WorkUnit]:
        """Lease the next queued unit to ``worker_id``; None when nothing is queued.

        Returns a snapshot; the caller must not mutate coordinator state through it.
        """
        with self._lock:
            if worker_id not in self.workers:
                raise UnknownWorker(worker_id)
            self.expire()
            while self._queue:
                unit = self.units[self._queue.popleft()]
                if unit.state != QUEUED:
                    continue  # finished by a late result while waiting
                unit.worker = worker_id
                unit.lease_deadline = self.clock() + self.lease_seconds
                self._set_state(unit, LEASED)
                self._log(op="lease", unit=unit.unit_id, attempt=unit.attempt, worker=worker_id)
                return replace(unit)
            return None

    def submit(self, result: WorkResult) -> str:
        """Apply a worker's result; returns one of accepted/requeued/failed/discarded.

        The first ok result for a unit wins; anything arriving after the unit
        is done or permanently failed is discarded.
        """
        with self._lock:
            unit = self.units.get(result.unit_id)
            if unit is None:
                raise UnknownUnit(result.unit_id)
            if unit.state in (DONE, FAILED):
                return DISCARDED
            if result.ok:
                problem = self._check_output(unit, result.document)
                if problem is None:
                    digest = hashlib.sha256(result.document).hexdigest()
                    if self.store is not None:
                        self.store(unit, result.document)
                    self.persisted[unit.unit_id] = digest
                    self._set_state(unit, DONE)
                    self._log(op="done", unit=unit.unit_id, attempt=result.attempt, worker=result.worker_id,
                              sha256=digest)
                    return ACCEPTED
                result = replace(result, ok=False, step="validate", message=problem)
            if unit.state == LEASED and unit.attempt == result.attempt:
                return self._retry_or_fail(unit, result.step, result.message)
            return DISCARDED

    def _check_output(self, unit: WorkUnit, data: Optional[bytes]) -> Optional[str]:
        if data is None:
            return "ok result without a document"
        if not self.validate_results:
            return None
        try:
            doc = deserialize(data)
        except (ValueError, ValidationError) as exc:
            return f"invalid output: {exc}"
        if doc.doc_id != unit.doc_id:
            return f"output is for document {doc.doc_id!r}"
        return None

    # -- inspection --------------------------------------------------------

    def counts(self) -> dict:
        with self._lock:
            return dict(self._counts)

    def census(self) -> dict:
        """State counts recomputed from the units themselves."""
        with self._lock:
            out = dict.fromkeys(STATES, 0)
            for unit in self.units.values():
                out[unit.state] += 1
            return out

    @property
    def total(self) -> int:
        return len(self.units)

    def drained(self) -> bool:
        with self._lock:
            return self._counts[QUEUED] == 0 and self._counts[LEASED] == 0

    def failed_units(self) -> list:
        with self._lock:
            return [u for u in self.units.values() if u.state == FAILED]

    # -- recovery ----------------------------------------------------------

    @classmethod
    def resume(cls, journal_path, **kwargs) -> "Coordinator":
        """Rebuild state from a journal and keep appending to it.

        Units leased at the time of the stop are queued again without
        consuming an attempt.
        """
        records = Journal.read(journal_path) if Path(journal_path).exists() else []
        coord = cls(**kwargs)
        for rec in records:
            op = rec.get("op")
            if op == "enqueue":
                payload = base64.b64decode(rec["payload"]) if rec.get("payload") is not None else None
                unit = WorkUnit(rec["unit"], rec["doc"], rec.get("fmt", "text"), payload, rec.get("source"))
                coord.units[unit.unit_id] = unit
                coord._doc_ids.add(unit.doc_id)
                continue
            unit = coord.units.get(rec.get("unit"))
            if unit is None:
                continue
            if op == "lease":
                unit.state, unit.attempt, unit.worker = LEASED, rec["attempt"], rec.get("worker")
            elif op == "requeue":
                unit.state, unit.attempt = QUEUED, rec["attempt"]
            elif op == "done":
                unit.state = DONE
                coord.persisted[unit.unit_id] = rec.get("sha256")
            elif op == "failed":
                unit.state = FAILED
        for unit in coord.units.values():
            if unit.state == LEASED:
                unit.state, unit.worker = QUEUED, None
            coord._counts[unit.state] += 1
            if unit.state == QUEUED:
                coord._queue.append(unit.unit_id)
        coord.journal = Journal(journal_path)
        return coord
