"""TCP front end for a :class:`Coordinator`."""
from __future__ import annotations

import logging
import socketserver
import threading
from typing import Optional

from .coordinator import Coordinator, UnknownUnit, UnknownWorker, WorkResult
from .protocol import (ACK, DISPATCH, HELLO, RESULT, ConnectionClosed, Message, ProtocolError, decode_timings,
                       read_message, write_message)

log = logging.getLogger(__name__)


def parse_address(address: str, default_host: str = "127.0.0.1") -> tuple:
    host, sep, port = address.rpartition(":")
    if not sep:
        host, port = default_host, address
    try:
        return host or default_host, int(port)
    except ValueError:
        raise ValueError(f"bad address {address!r}, expected HOST:PORT") from None


def handle(coord: Coordinator, msg: Message) -> Message:
    """Answer one request.  Protocol violations become ``ACK status=error``."""
    try:
        if msg.type == HELLO:
            coord.hello(msg.require("worker"))
            return Message(ACK, {"status": "ok", "lease_seconds": repr(coord.lease_seconds)})
        if msg.type == DISPATCH:
            unit = coord.dispatch(msg.require("worker"))
            if unit is None:
                return Message(DISPATCH, {"empty": "1", "drained": "1" if coord.drained() else "0"})
            try:
                payload = unit.read_payload()
            except OSError as exc:
                # unreadable input counts as a failed attempt
                coord.submit(WorkResult(unit.unit_id, unit.attempt, "server", False, step="load", message=str(exc)))
                return Message(DISPATCH, {"empty": "1", "drained": "0"})
            return Message(DISPATCH, {"unit": unit.unit_id, "doc": unit.doc_id, "attempt": str(unit.attempt),
                                      "format": unit.fmt, "lease_seconds": repr(coord.lease_seconds)}, payload)
        if msg.type == RESULT:
            status = msg.require("status")
            if status not in ("ok", "error"):
                raise ProtocolError(f"bad result status {status!r}")
            try:
                attempt = int(msg.require("attempt"))
            except ValueError:
                raise ProtocolError("attempt is not an integer") from None
            worker = msg.require("worker")
            if worker not in coord.workers:
                raise UnknownWorker(worker)
            result = WorkResult(msg.require("unit"), attempt, worker, status == "ok",
                                msg.payload if status == "ok" else None, msg.get("step"), msg.get("message"),
                                decode_timings(msg.get("timings")))
            return Message(ACK, {"status": coord.submit(result)})
        raise ProtocolError(f"unexpected {msg.type} from a worker")
    except UnknownWorker as exc:
        return Message(ACK, {"status": "error", "message": f"unknown worker {exc}"})
    except UnknownUnit as exc:
        return Message(ACK, {"status": "error", "message": f"unknown unit {exc}"})
    except ProtocolError as exc:
        return Message(ACK, {"status": "error", "message": str(exc)})


class _Handler(socketserver.StreamRequestHandler):
    def handle(self) -> None:
        coord = self.server.coordinator
        while True:
            try:
                msg = read_message(self.rfile)
            except ConnectionClosed:
                return
            except ProtocolError as exc:
                log.warning("dropping connection from %s: %s", self.client_address, exc)
                try:
                    write_message(self.wfile, Message(ACK, {"status": "error", "message": str(exc)}))
                except OSError:
                    pass
                return
            except OSError:
                return
            try:
                write_message(self.wfile, handle(coord, msg))
            except OSError:
                return


class _TCPServer(socketserver.ThreadingTCPServer):
    daemon_threads = True
    allow_reuse_address = True


class CoordinatorServer:
    """Serves a coordinator on a TCP address and reaps expired leases."""

    def __init__(self, coordinator: Coordinator, address=("127.0.0.1", 0), reap_interval: Optional[float] = None):
        self.coordinator = coordinator
        self._server = _TCPServer(address, _Handler)
        self._server.coordinator = coordinator
        self.reap_interval = reap_interval or max(0.01, min(1.0, coordinator.lease_seconds / 4))
        self._stop = threading.Event()
        self._threads = []

    @property
    def address(self) -> tuple:
        return self._server.server_address[:2]

    def start(self) -> "CoordinatorServer":
        serve = threading.Thread(target=self._server.serve_forever, kwargs={"poll_interval": 0.05}, daemon=True)
        reap = threading.Thread(target=self._reap, daemon=True)
        self._threads = [serve, reap]
        for t in self._threads:
            t.start()
        return self

    def _reap(self) -> None:
        while not self._stop.wait(self.reap_interval):
            self.coordinator.expire()

    def wait_drained(self, timeout: Optional[float] = None, poll: float = 0.05) -> bool:
        waited = 0.0
        while not self.coordinator.drained():
            if timeout is not None and waited >= timeout:
                return False
            self._stop.wait(poll)
            waited += poll
        return True

    def stop(self) -> None:
        self._stop.set()
        self._server.shutdown()
        self._server.server_close()
        for t in self._threads:
            t.join(timeout=5)

    def __enter__(self) -> "CoordinatorServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()
