"""Worker client: pull a unit, annotate it, report the result, repeat."""
from __future__ import annotations

import logging
import os
import socket
import threading
import time
import uuid
from typing import Callable, Optional

from ..pipeline import Pipeline, StepError
from .protocol import ACK, DISPATCH, HELLO, RESULT, Message, ProtocolError, encode_timings, read_message, write_message

log = logging.getLogger(__name__)


class ServerUnreachable(ConnectionError):
    pass


class WorkerClient:
    def __init__(self, address: tuple, worker_id: str, timeout: float = 30.0):
        self.address = address
        self.worker_id = worker_id
        self.timeout = timeout
        self._sock = None
        self._stream = None

    def connect(self) -> None:
        self.close()
        self._sock = socket.create_connection(self.address, timeout=self.timeout)
        self._stream = self._sock.makefile("rwb")
        ack = self.call(Message(HELLO, {"worker": self.worker_id}))
        if ack.type != ACK or ack.get("status") != "ok":
            raise ProtocolError(f"server refused HELLO: {ack.get('message')}")

    def close(self) -> None:
        for thing in (self._stream, self._sock):
            if thing is not None:
                try:
                    thing.close()
                except OSError:
                    pass
        self._sock = self._stream = None

    def call(self, msg: Message) -> Message:
        if self._stream is None:
            raise ConnectionError("not connected")
        write_message(self._stream, msg)
        return read_message(self._stream)

    def request_unit(self) -> Message:
        reply = self.call(Message(DISPATCH, {"worker": self.worker_id}))
        if reply.type == ACK and reply.get("status") == "error":
            raise ProtocolError(reply.get("message", "dispatch refused"))
        if reply.type != DISPATCH:
            raise ProtocolError(f"expected DISPATCH, got {reply.type}")
        return reply

    def submit(self, unit: Message, ok: bool, document: bytes = b"", step: Optional[str] = None,
               message: Optional[str] = None, timings=()) -> str:
        fields = {"worker": self.worker_id, "unit": unit.require("unit"), "attempt": unit.require("attempt"),
                  "status": "ok" if ok else "error"}
        if step:
            fields["step"] = step
        if message:
            fields["message"] = message
        if timings:
            fields["timings"] = encode_timings(timings)
        reply = self.call(Message(RESULT, fields, document if ok else b""))
        if reply.type != ACK:
            raise ProtocolError(f"expected ACK, got {reply.type}")
        if reply.get("status") == "error":
            raise ProtocolError(reply.get("message", "result refused"))
        return reply.require("status")


def default_worker_id() -> str:
    return f"{socket.gethostname()}-{os.getpid()}-{uuid.uuid4().hex[:6]}"


def process_unit(pipeline: Pipeline, unit: Message) -> dict:
    """Annotate one dispatched unit; never raises for document-level problems."""
    try:
        annotated = pipeline.annotate(unit.require("doc"), unit.payload, unit.get("format", "text"))
    except StepError as exc:
        return {"ok": False, "step": exc.step, "message": f"{type(exc.cause).__name__}: {exc.cause}"}
    except Exception as exc:  # keep the worker alive whatever the document does
        return {"ok": False, "step": "worker", "message": f"{type(exc).__name__}: {exc}"}
    return {"ok": True, "document": annotated.xml, "timings": annotated.document.timings}


def worker_loop(address: tuple, pipeline: Pipeline, worker_id: Optional[str] = None,
                stop: Optional[threading.Event] = None, max_retries: int = 5, backoff: float = 0.5,
                max_backoff: float = 10.0, idle_wait: float = 0.2, exit_when_drained: bool = True,
                on_unit: Optional[Callable[[Message], None]] = None) -> int:
    """Run until stopped or the server reports that all work is finished.

    Returns 0 on a normal exit and 2 when the server stayed unreachable for
    ``max_retries`` consecutive attempts.  ``on_unit`` is called with every
    dispatched unit before processing (used by tests to simulate crashes).
    """
    worker_id = worker_id or default_worker_id()
    stop = stop or threading.Event()
    client = WorkerClient(address, worker_id)
    failures = 0
    processed = 0
    try:
        while not stop.is_set():
            try:
                if client._stream is None:
                    client.connect()
                    failures = 0
                unit = client.request_unit()
                if unit.get("empty") == "1":
                    if unit.get("drained") == "1" and exit_when_drained:
                        break
                    stop.wait(idle_wait)
                    continue
                if on_unit is not None:
                    on_unit(unit)
                outcome = process_unit(pipeline, unit)
                status = client.submit(unit, **outcome)
                processed += 1
                log.debug("%s: %s -> %s", worker_id, unit.get("doc"), status)
            except (OSError, ProtocolError) as exc:
                client.close()
                failures += 1
                if failures > max_retries:
                    log.error("%s: giving up on %s after %d attempts: %s", worker_id, address, failures, exc)
                    return 2
                delay = min(max_backoff, backoff * 2 ** (failures - 1))
                log.warning("%s: connection problem (%s); retrying in %.1fs", worker_id, exc, delay)
                stop.wait(delay)
    finally:
        client.close()
    log.info("%s: processed %d units", worker_id, processed)
    return 0
