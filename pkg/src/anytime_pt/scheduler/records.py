"""Per-chain traces and per-worker move timelines, with their file formats."""

from __future__ import annotations

import csv
import io
from array import array
from contextlib import contextmanager
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

INIT = "init"
LOCAL = "local"
WITHIN = "exchange-within"
BETWEEN = "exchange-between"
IDLE = "idle"

KINDS = (INIT, LOCAL, WITHIN, BETWEEN, IDLE)
_CODE = {k: i for i, k in enumerate(KINDS)}


class ChainRecorder:
    """Growable storage for one chain's samples."""

    __slots__ = ("dim", "values", "times", "kinds")

    def __init__(self, dim: int):
        self.dim = dim
        self.values = array("d")
        self.times = array("d")
        self.kinds = array("b")

    def add(self, value: Sequence[float], t: float, kind: str) -> None:
        self.values.extend(value)
        self.times.append(t)
        self.kinds.append(_CODE[kind])

    def freeze(self) -> "ChainTrace":
        values = np.frombuffer(self.values, dtype=float).reshape(-1, self.dim).copy()
        return ChainTrace(values, np.frombuffer(self.times, dtype=float).copy(),
                          np.frombuffer(self.kinds, dtype=np.int8).copy())

    def __getstate__(self):
        return (self.dim, self.values, self.times, self.kinds)

    def __setstate__(self, state):
        self.dim, self.values, self.times, self.kinds = state


class ChainTrace:
    """Samples of one chain: values ``(n, d)``, arrival times and move kinds."""

    def __init__(self, values: np.ndarray, times: np.ndarray, kinds: np.ndarray):
        self.values = values
        self.times = times
        self.kinds = kinds

    def __len__(self):
        return len(self.times)

    def kind_names(self) -> list:
        return [KINDS[k] for k in self.kinds]

    def after(self, t: float) -> "ChainTrace":
        """Samples with arrival time strictly greater than ``t``."""
        keep = self.times > t
        return ChainTrace(self.values[keep], self.times[keep], self.kinds[keep])

    def count(self, kind: str) -> int:
        return int(np.sum(self.kinds == _CODE[kind]))


class Trace:
    """Samples of every recorded chain of one run.

    Attributes
    ----------
    chains : list of ChainTrace or None
        Indexed by 0-based chain position; ``None`` for unrecorded chains.
    columns : tuple of str
        Names of the value columns.
    cold : list of int
        Positions of the cold chains.
    metadata : dict
    timeline : MoveTimeline or None
    """

    def __init__(self, chains, columns, cold, metadata=None, timeline=None):
        self.chains = chains
        self.columns = tuple(columns)
        self.cold = list(cold)
        self.metadata = dict(metadata or {})
        self.timeline = timeline

    @property
    def n_chains(self) -> int:
        return len(self.chains)

    def chain(self, i: int) -> ChainTrace:
        c = self.chains[i]
        if c is None:
            raise KeyError(f"chain {i + 1} was not recorded")
        return c

    def samples(self, i: int, include_initial: bool = False) -> np.ndarray:
        """Values of chain ``i`` (0-based); the initial state is skipped by default."""
        c = self.chain(i)
        if include_initial:
            return c.values
        return c.values[c.kinds != _CODE[INIT]]

    def cold_samples(self) -> np.ndarray:
        """Samples of the first cold chain."""
        return self.samples(self.cold[0])

    def burned(self, burn_in: float) -> "Trace":
        """Copy without samples whose arrival time is at or before ``burn_in``."""
        chains = [None if c is None else c.after(burn_in) for c in self.chains]
        meta = dict(self.metadata, burn_in=burn_in)
        return Trace(chains, self.columns, self.cold, meta, self.timeline)


def _open_sink(sink):
    if isinstance(sink, (str, Path)):
        return open(sink, "w", newline="")
    return None


@contextmanager
def _writer(sink):
    fh = _open_sink(sink)
    try:
        yield fh if fh is not None else sink
    finally:
        if fh is not None:
            fh.close()


def export_trace(trace: Trace, directory, chains: Optional[Sequence[int]] = None) -> list:
    """Write one ``chain_<label>.csv`` per recorded chain.

    Columns are ``n``, the value columns, ``arrival_time`` and ``move_kind``.
    Labels in file names start at 1. Returns the written paths.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    positions = range(trace.n_chains) if chains is None else chains
    paths = []
    for i in positions:
        c = trace.chains[i]
        if c is None:
            continue
        path = directory / f"chain_{i + 1}.csv"
        n = np.arange(len(c))
        body = np.column_stack([n, c.values, c.times])
        kinds = np.array(KINDS, dtype=object)[c.kinds]
        with open(path, "w", newline="") as fh:
            fh.write(",".join(("n",) + trace.columns + ("arrival_time", "move_kind")) + "\n")
            buf = io.StringIO()
            for row, kind in zip(body, kinds):
                buf.write("%d," % row[0])
                buf.write(",".join(repr(float(v)) for v in row[1:]))
                buf.write("," + kind + "\n")
            fh.write(buf.getvalue())
        paths.append(path)
    return paths


def read_trace_file(path):
    """Read a chain file back as ``(values, arrival_times, kinds)``."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, rows = rows[0], rows[1:]
    d = len(header) - 3
    values = np.array([[float(v) for v in r[1:1 + d]] for r in rows]).reshape(-1, d)
    times = np.array([float(r[-2]) for r in rows])
    kinds = [r[-1] for r in rows]
    return values, times, kinds


class MoveTimeline:
    """Intervals of local moves, exchanges and idling on each worker.

    Workers are 0-based internally. ``chain`` is -1 for worker-level
    records such as exchanges and idling.
    """

    def __init__(self):
        self.worker = array("l")
        self.chain = array("l")
        self.kind = array("b")
        self.start = array("d")
        self.end = array("d")

    def add(self, worker: int, chain: int, kind: str, start: float, end: float) -> None:
        if end < start:
            raise ValueError(f"record ends before it starts: {start} > {end}")
        self.worker.append(worker)
        self.chain.append(chain)
        self.kind.append(_CODE[kind])
        self.start.append(start)
        self.end.append(end)

    def __len__(self):
        return len(self.start)

    def extend(self, other: "MoveTimeline") -> None:
        for name in ("worker", "chain", "kind", "start", "end"):
            getattr(self, name).extend(getattr(other, name))

    def records(self, worker: Optional[int] = None, kind: Optional[str] = None):
        """Records as ``(worker, chain, kind, start, end)`` tuples, sorted by start."""
        out = []
        for w, c, k, s, e in zip(self.worker, self.chain, self.kind, self.start, self.end):
            if worker is not None and w != worker:
                continue
            if kind is not None and KINDS[k] != kind:
                continue
            out.append((w, c, KINDS[k], s, e))
        out.sort(key=lambda r: (r[0], r[3], r[4]))
        return out

    def total(self, kind: str, worker: Optional[int] = None) -> float:
        keep = np.frombuffer(self.kind, dtype=np.int8) == _CODE[kind]
        if worker is not None:
            keep &= np.frombuffer(self.worker, dtype=np.int_) == worker
        start = np.frombuffer(self.start, dtype=np.float64)
        end = np.frombuffer(self.end, dtype=np.float64)
        return float(np.sum(end[keep] - start[keep]))

    def workers(self) -> list:
        return sorted(set(self.worker))

    def is_consistent(self, tol: float = 1e-9) -> bool:
        """True when each worker's records are non-overlapping."""
        for w in self.workers():
            last = -np.inf
            for _, _, _, s, e in self.records(w):
                if s < last - tol:
                    return False
                last = max(last, e)
        return True


def export_timeline(timeline: Optional[MoveTimeline], sink) -> None:
    """Write ``worker,chain,kind,start,end`` records with 6-decimal times.

    ``sink`` is a path or a text file object. Workers and chains are
    labelled from 1; worker-level records leave ``chain`` empty.
    """
    with _writer(sink) as fh:
        fh.write("worker,chain,kind,start,end\n")
        if timeline is None:
            return
        for w, c, k, s, e in sorted(timeline.records(), key=lambda r: (r[3], r[0], r[4])):
            chain = "" if c < 0 else str(c + 1)
            fh.write(f"{w + 1},{chain},{k},{s:.6f},{e:.6f}\n")
