"""Wall/CPU phase timing, peak-RSS probes, and CSV result rows.

Wall time comes from a monotonic clock; CPU time is the process-wide
user+kernel time summed over all threads, so it exceeds wall time under
multithreading. The memory probe reads the OS-maintained resident-set
high-water mark (no sampling thread), so it is non-decreasing over the
life of the process; the probe points are fixed by the harness: once
right after the graph is loaded, once at the end of the experiment.

Results append to a CSV file (header written only on creation) with the
stable column order in ``CSV_HEADER``. Timings are written with 6 decimal
places (seconds), memory with 2 (MiB); disabled memory probes emit empty
strings.
"""

from __future__ import annotations

import csv
import os
import time
from dataclasses import dataclass
from typing import Callable, Optional, TypeVar

T = TypeVar("T")


@dataclass
class PhaseTiming:
    wall_seconds: float
    cpu_seconds: float


@dataclass
class MemoryProbe:
    peak_after_load_mb: Optional[float] = None
    peak_total_mb: Optional[float] = None
    enabled: bool = False


@dataclass
class BenchmarkRecord:
    timestamp: str
    model: str
    graph: str
    threads: int
    backend: str
    epochs: int
    eta: int
    n_batches: int
    dim: int
    lr: float
    seed: int
    train: PhaseTiming
    infer_triples: PhaseTiming
    infer_entities: PhaseTiming
    infer_relations: PhaseTiming
    memory: MemoryProbe


CSV_HEADER = (
    "timestamp,model,graph,threads,backend,epochs,eta,batches,dim,lr,seed,"
    "wall_train_s,cpu_train_s,wall_infer_triples_s,cpu_infer_triples_s,"
    "wall_infer_entities_s,cpu_infer_entities_s,wall_infer_relations_s,"
    "cpu_infer_relations_s,ram_peak_load_mb,ram_peak_total_mb"
).split(",")


def time_phase(action: Callable[[], T]) -> tuple[T, PhaseTiming]:
    """Run ``action`` and measure its wall and process CPU time."""
    wall0 = time.perf_counter()
    cpu0 = time.process_time()
    result = action()
    cpu = time.process_time() - cpu0
    wall = time.perf_counter() - wall0
    return result, PhaseTiming(wall_seconds=wall, cpu_seconds=cpu)


def peak_rss_mb() -> float:
    """Process peak resident set size in MiB (high-water mark).

    Prefers VmHWM from /proc/self/status: unlike ru_maxrss it resets on
    exec, so a process forked from a large parent (test harness, shell
    wrapper) reports only its own memory, not the transient copy-on-write
    image inherited before exec.
    """
    try:
        with open("/proc/self/status", "r", encoding="ascii") as fh:
            for line in fh:
                if line.startswith("VmHWM:"):
                    return int(line.split()[1]) / 1024.0
    except OSError:
        pass
    try:
        import resource

        peak_kib = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss
        if peak_kib > 0:
            return peak_kib / 1024.0
    except (ImportError, ValueError):
        pass
    raise EnvironmentError("peak RSS probe unsupported on this platform")


def _fmt_time(seconds: float) -> str:
    return f"{seconds:.6f}"


def _fmt_mem(mb: Optional[float]) -> str:
    return "" if mb is None else f"{mb:.2f}"


def record_to_row(record: BenchmarkRecord) -> list[str]:
    mem = record.memory
    return [
        record.timestamp,
        record.model,
        record.graph,
        str(record.threads),
        record.backend,
        str(record.epochs),
        str(record.eta),
        str(record.n_batches),
        str(record.dim),
        str(record.lr),
        str(record.seed),
        _fmt_time(record.train.wall_seconds),
        _fmt_time(record.train.cpu_seconds),
        _fmt_time(record.infer_triples.wall_seconds),
        _fmt_time(record.infer_triples.cpu_seconds),
        _fmt_time(record.infer_entities.wall_seconds),
        _fmt_time(record.infer_entities.cpu_seconds),
        _fmt_time(record.infer_relations.wall_seconds),
        _fmt_time(record.infer_relations.cpu_seconds),
        _fmt_mem(mem.peak_after_load_mb if mem.enabled else None),
        _fmt_mem(mem.peak_total_mb if mem.enabled else None),
    ]


def write_record(path, record: BenchmarkRecord) -> None:
    """Append one RFC-4180 row; write the header only if the file is new."""
    path = os.fspath(path)
    need_header = not os.path.exists(path) or os.path.getsize(path) == 0
    with open(path, "a", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        if need_header:
            writer.writerow(CSV_HEADER)
        writer.writerow(record_to_row(record))


def read_rows(path) -> list[dict[str, str]]:
    """Parse a results CSV back into per-row field dicts (round-trip aid)."""
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in CSV_HEADER if c not in (reader.fieldnames or [])]
        if missing:
            raise ValueError(f"results file missing columns: {missing}")
        return list(reader)
