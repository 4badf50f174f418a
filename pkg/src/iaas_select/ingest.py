"""Eucalyptus-style VM traces: parse, turn into per-node workload series, synthesize."""

from __future__ import annotations

import csv
import heapq
import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import TimeSeries, paa_resample

log = logging.getLogger(__name__)

TRACE_COLUMNS = ("vm_id", "node_id", "start_ts", "stop_ts", "cores")


class TraceFormatError(ValueError):
    pass


class UnknownNodeError(KeyError):
    pass


@dataclass(frozen=True)
class TraceEvent:
    vm_id: str
    node_id: int
    start: int
    stop: int
    cores: int

    def __post_init__(self):
        if self.stop <= self.start:
            raise ValueError(f"VM {self.vm_id}: stop {self.stop} not after start {self.start}")
        if self.cores < 1:
            raise ValueError(f"VM {self.vm_id}: core request must be positive")


def parse_trace(path, strict: bool = False, max_cores: int | None = None) -> list:
    """Read a trace CSV. Bad rows are logged with their line number and skipped,
    or raise :class:`TraceFormatError` when ``strict``."""
    events = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in TRACE_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise TraceFormatError(f"{path}: missing columns {missing}")
        for row in reader:
            line = reader.line_num
            try:
                ev = TraceEvent(row["vm_id"], int(row["node_id"]), int(row["start_ts"]),
                                int(row["stop_ts"]), int(row["cores"]))
                if max_cores is not None and ev.cores > max_cores:
                    raise ValueError(f"VM {ev.vm_id}: {ev.cores} cores exceed node size {max_cores}")
            except (TypeError, ValueError) as exc:
                if strict:
                    raise TraceFormatError(f"{path}:{line}: {exc}") from exc
                log.warning("%s:%d: row rejected: %s", path, line, exc)
                continue
            events.append(ev)
    return events


def write_trace(events, path, metadata: dict | None = None):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_COLUMNS)
        for e in events:
            w.writerow([e.vm_id, e.node_id, e.start, e.stop, e.cores])
    if metadata is not None:
        Path(str(path) + ".meta.json").write_text(json.dumps(metadata, indent=1, sort_keys=True))


def load_trace_metadata(path) -> dict:
    meta = Path(str(path) + ".meta.json")
    return json.loads(meta.read_text()) if meta.exists() else {}


def raw_occupancy(events, node_id: int, raw_timestamps: int) -> np.ndarray:
    """Active cores on a node at every raw timestamp (VM active on [start, stop))."""
    delta = np.zeros(raw_timestamps + 1)
    for e in events:
        if e.node_id != node_id:
            continue
        a, b = max(e.start, 0), min(e.stop, raw_timestamps)
        if a < b:
            delta[a] += e.cores
            delta[b] -= e.cores
    return np.cumsum(delta)[:raw_timestamps]


def node_workload_series(events, node_id: int, raw_timestamps: int, target_len: int,
                         nodes=None) -> TimeSeries:
    """Per-node workload: sum of active cores on the raw grid, PAA-averaged to ``target_len``."""
    nodes = set(nodes) if nodes is not None else {e.node_id for e in events}
    if node_id not in nodes:
        raise UnknownNodeError(node_id)
    if target_len > raw_timestamps:
        raise ValueError("cannot resample to more points than the raw grid has")
    raw = TimeSeries.from_values(raw_occupancy(events, node_id, raw_timestamps))
    return paa_resample(raw, target_len)


def synthesize_trace(rng: np.random.Generator, n_nodes: int = 31, cores: int = 32,
                     raw_timestamps: int = 6486, n_classes: int = 4) -> list:
    """Seeded, format-compatible stand-in for a private-cloud VM trace.

    Nodes belong to a few tenant classes sharing a regime-switching arrival
    rate; each node adds its own scale, regimes and VM lifetimes. Requests that
    do not fit on the node are dropped.
    """
    def regimes(mean_len, sigma):
        out = np.empty(raw_timestamps)
        t = 0
        while t < raw_timestamps:
            n = max(1, int(rng.exponential(mean_len)))
            out[t:t + n] = rng.lognormal(0.0, sigma)
            t += n
        return out

    class_rate = [regimes(raw_timestamps / 10, 0.6) for _ in range(n_classes)]
    sizes = np.array([1, 2, 4, 8])
    size_p = np.array([0.35, 0.35, 0.2, 0.1])
    events = []
    for node in range(1, n_nodes + 1):
        lifetime = rng.uniform(60, 400)
        target = rng.uniform(4, 24)
        base = target / (lifetime * (sizes * size_p).sum())
        rate = base * class_rate[rng.integers(n_classes)] * regimes(raw_timestamps / 8, 0.3)
        arrivals = rng.poisson(rate)
        running: list = []
        used = 0
        k = 0
        for t in np.flatnonzero(arrivals):
            while running and running[0][0] <= t:
                used -= heapq.heappop(running)[1]
            for _ in range(arrivals[t]):
                c = int(rng.choice(sizes, p=size_p))
                life = max(1, int(rng.exponential(lifetime)))
                if used + c > cores:
                    continue
                stop = min(t + life, raw_timestamps)
                if stop <= t:
                    continue
                heapq.heappush(running, (stop, c))
                used += c
                k += 1
                events.append(TraceEvent(f"vm-{node:02d}-{k:05d}", node, int(t), int(stop), c))
    return events
