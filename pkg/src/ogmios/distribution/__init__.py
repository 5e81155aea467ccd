"""Coordinator/worker distribution of corpus annotation over TCP."""
from .coordinator import (DONE, FAILED, LEASED, QUEUED, Coordinator, DirectoryStore, DuplicateDocument, Journal,
                          UnknownUnit, UnknownWorker, WorkResult, WorkUnit)
from .server import CoordinatorServer, parse_address
from .worker import WorkerClient, worker_loop


def enqueue_corpus(coordinator: Coordinator, docs) -> int:
    """Queue documents on a coordinator; see :meth:`Coordinator.enqueue`."""
    return coordinator.enqueue(docs)


def enqueue_directory(coordinator: Coordinator, corpus_dir) -> int:
    """Queue every file of ``corpus_dir``; payloads are read at dispatch time."""
    from ..pipeline import corpus_files, source_format

    return coordinator.enqueue((p.stem, p, source_format(p)) for p in corpus_files(corpus_dir))


__all__ = [
    "DONE", "FAILED", "LEASED", "QUEUED", "Coordinator", "CoordinatorServer", "DirectoryStore",
    "DuplicateDocument", "Journal", "UnknownUnit", "UnknownWorker", "WorkResult", "WorkUnit", "WorkerClient",
    "enqueue_corpus", "enqueue_directory", "parse_address", "worker_loop",
]
