"""End-to-end distributed runs over TCP with real worker threads."""
from __future__ import annotations

import hashlib
import random
import threading
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

from ogmios.distribution import Coordinator, CoordinatorServer, DirectoryStore, worker_loop
from ogmios.pipeline import Pipeline, PipelineConfig

RESOURCES = Path(__file__).resolve().parent.parent / "resources"
MARKER = "POISONPILL"


class WorkerKilled(BaseException):
    """Raised inside a worker thread to simulate the process dying mid-lease."""


@dataclass
class RunReport:
    total: int
    counts: dict
    persisted: dict
    files: dict
    poisoned: set
    failed: set
    samples: int
    conservation_ok: bool
    killed_after: int
    worker_status: list = field(default_factory=list)
    seconds: float = 0.0
    persisted_docs: dict = field(default_factory=dict)

    def checksum_audit(self) -> bool:
        """Exactly one stored file per done unit, matching the recorded digest."""
        done_docs = set(self.persisted_docs)
        return (set(self.files) == done_docs
                and all(hashlib.sha256(self.files[d]).hexdigest() == self.persisted_docs[d] for d in done_docs))


def run(tmp: Path, n_docs: int = 100, n_workers: int = 4, seed: int = 0, poison_rate: float = 0.0,
        kill_one: bool = False, lease_seconds: float = 0.5, max_attempts: int = 3, timeout: float = 120.0,
        cfg: PipelineConfig = None) -> RunReport:
    rng = random.Random(seed)
    cfg = cfg or PipelineConfig.from_file(RESOURCES / "full.cfg")
    cfg = replace(cfg, fault_injection=f"words:{MARKER}")
    pipeline = Pipeline.from_config(cfg)
    out = tmp / f"out-{seed}"
    coord = Coordinator(lease_seconds=lease_seconds, max_attempts=max_attempts, store=DirectoryStore(out))
    poisoned = set()
    docs = []
    for i in range(n_docs):
        doc_id = f"doc{i:05d}"
        text = f"Sample {i} shows gene expression in E. coli. The cell wall grows."
        if rng.random() < poison_rate:
            poisoned.add(doc_id)
            text += f" {MARKER}"
        docs.append((doc_id, text.encode("utf-8"), "text"))
    coord.enqueue(docs)

    victim = rng.randrange(n_workers) if kill_one else -1
    kill_at = rng.randint(1, max(1, n_docs // n_workers)) if kill_one else 0
    seen = [0] * n_workers
    killed_after = [-1]

    def hook_for(k):
        def hook(unit):
            seen[k] += 1
            if k == victim and seen[k] >= kill_at:
                killed_after[0] = seen[k]
                raise WorkerKilled(unit.get("unit"))
        return hook

    status = [None] * n_workers

    def work(k):
        try:
            status[k] = worker_loop(server.address, pipeline, worker_id=f"w{k}", max_retries=3, backoff=0.05,
                                    idle_wait=0.02, on_unit=hook_for(k))
        except WorkerKilled:
            status[k] = "killed"

    samples = 0
    conservation_ok = True
    t0 = time.perf_counter()
    with CoordinatorServer(coord, reap_interval=lease_seconds / 4) as server:
        threads = [threading.Thread(target=work, args=(k,), daemon=True) for k in range(n_workers)]
        for t in threads:
            t.start()
        deadline = time.monotonic() + timeout
        while not coord.drained() and time.monotonic() < deadline:
            with coord._lock:  # one consistent snapshot of counters and units
                counts, census = coord.counts(), coord.census()
            samples += 1
            if sum(counts.values()) != coord.total or counts != census:
                conservation_ok = False
            time.sleep(0.01)
        for t in threads:
            t.join(timeout=10)
    counts = coord.counts()
    samples += 1
    conservation_ok &= sum(counts.values()) == coord.total == n_docs
    files = {p.stem: p.read_bytes() for p in out.glob("*.xml")} if out.exists() else {}
    report = RunReport(n_docs, counts, dict(coord.persisted), files, poisoned,
                       {u.doc_id for u in coord.failed_units()}, samples, conservation_ok, killed_after[0],
                       status, time.perf_counter() - t0)
    report.persisted_docs = {coord.units[u].doc_id: digest for u, digest in coord.persisted.items()}
    return report
