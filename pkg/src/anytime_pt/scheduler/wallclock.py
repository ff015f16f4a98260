"""Wall-clock execution with measured move durations.

Local moves are interrupted cooperatively: a kernel calls the checkpoint
it is given (the ABC race does so once per iteration), and the scheduler
may run an exchange epoch over the other chains before returning control.
Kernels without checkpoints are only interrupted between moves.

With one worker everything runs in the calling process. With several
workers each worker is a forked process that owns its chains; the calling
process acts as coordinator and exchanges state snapshots with the workers
over pipes.
"""

from __future__ import annotations

import multiprocessing as mp
import time
import traceback
from multiprocessing.connection import wait

from ..anytime import HoldTimeModel
from ..exceptions import ConfigError, RunAborted
from ..streams import COORDINATOR, coordinator_stream, kernel_streams, stream
from .config import ADAPTIVE, TWO_TIER, ScheduleConfig, WorkerTopology, calibrate_delta
from .coordination import Coordinator
from .records import BETWEEN, IDLE, INIT, LOCAL, WITHIN, ChainRecorder, MoveTimeline, Trace
from .virtual import record_positions


class _Stop(Exception):
    """Raised inside a worker when the budget is spent."""


class _Worker:
    """Chains of one worker and the loop that moves them."""

    def __init__(self, w, family, topology, config, seed, initial, t0, link):
        self.w = w
        self.family = family
        self.topology = topology
        self.config = config
        self.t0 = t0
        self.link = link
        positions = topology.chains(w)
        self.base = positions.start
        self.states = [initial[i] for i in positions]
        rngs = kernel_streams(seed, family.n_chains)
        self.rngs = [rngs[i] for i in positions]
        cold = set(family.cold_chains())
        self.order = [l for l in range(len(positions))
                      if not (config.worst_case and self.base + l in cold)]
        self.counters = [0] * len(positions)
        recorded = record_positions(family, config.record)
        self.recorders = {i: ChainRecorder(len(family.columns)) for i in positions
                          if i in recorded}
        self.timeline = MoveTimeline() if config.timeline else None
        self.local = Coordinator(family, topology, config.tiers,
                                 stream(seed, COORDINATOR, w + 1))
        self.within_every = config.within_every or topology.chains_per_worker
        self.keep_durations = (isinstance(config.hold, HoldTimeModel)
                               and config.hold.kind == "measured")
        self.durations = []
        self.working = None
        self.in_flight = False
        self.swapped = False
        self.paused = 0.0
        self.seg_start = 0.0
        self.moves = 0
        self.sweep_acc = 0.0
        self.sweeps = []
        self.discarded = 0
        for i in self.recorders:
            self._record(i, 0.0, INIT)

    def now(self) -> float:
        return time.perf_counter() - self.t0

    # chain access -------------------------------------------------------
    def get(self, i):
        return self.states[i - self.base]

    def put(self, i, value):
        self.states[i - self.base] = value
        if self.in_flight and i - self.base == self.working:
            self.swapped = True

    def _record(self, i, t, kind):
        rec = self.recorders.get(i)
        if rec is not None:
            rec.add(self.family.record(self.get(i)), t, kind)

    def snapshot(self, include_working: bool) -> dict:
        """Chain values the coordinator may exchange, keyed by global position."""
        return {self.base + l: s for l, s in enumerate(self.states)
                if include_working or not self.in_flight or l != self.working}

    def working_global(self):
        return self.base + self.working if self.in_flight else None

    def apply(self, replacements: dict, participants, t: float, kind: str) -> None:
        for i, value in replacements.items():
            self.put(i, value)
        for i in participants:
            self.counters[i - self.base] += 1
            self._record(i, t, kind)

    # timeline -----------------------------------------------------------
    def pause(self, t_start: float, t_end: float, kind: str) -> None:
        """Close the running local segment and log a worker-level interval."""
        if self.timeline is not None:
            if self.in_flight and t_start > self.seg_start:
                self.timeline.add(self.w, self.base + self.working, LOCAL, self.seg_start,
                                  t_start)
            self.timeline.add(self.w, -1, kind, t_start, t_end)
        self.seg_start = t_end
        if self.in_flight:
            self.paused += t_end - t_start

    # local moves --------------------------------------------------------
    def checkpoint(self) -> None:
        self.link.check(self)

    def _within(self, t):
        if self.timeline is not None:
            self.timeline.add(self.w, -1, WITHIN, t, t)
        pairs = self.local.within_pairs(self.w)
        for i, k, ok in self.local.apply(pairs, self.get, self.put):
            for c in (i, k):
                self.counters[c - self.base] += 1
                self._record(c, t, WITHIN)

    def move(self) -> None:
        l = self.order[self.moves % len(self.order)]
        self.working = l
        self.in_flight = True
        self.swapped = False
        self.paused = 0.0
        self.link.check(self)
        start = self.now()
        self.seg_start = max(self.seg_start, start)
        new = self.family.local_move(self.base + l, self.states[l], self.rngs[l],
                                     checkpoint=self.checkpoint)
        end = self.now()
        if end > self.config.budget:
            raise _Stop
        if self.swapped:
            # the result belongs to a value that was exchanged away mid-move
            new = self.states[l]
        self.in_flight = False
        self.states[l] = new
        self.counters[l] += 1
        i = self.base + l
        if self.config.check_states:
            self.family.check(i, new)
        self._record(i, end, LOCAL)
        if self.timeline is not None:
            self.timeline.add(self.w, i, LOCAL, self.seg_start, end)
        self.seg_start = end
        busy = end - start - self.paused
        if self.keep_durations:
            self.durations.append(busy)
        self.moves += 1
        self.sweep_acc += busy
        if self.moves % len(self.order) == 0:
            self.sweeps.append(self.sweep_acc)
            self.sweep_acc = 0.0
        if self.config.tiers == TWO_TIER and self.moves % self.within_every == 0:
            self._within(end)

    def finish(self) -> None:
        if self.in_flight:
            self.discarded += 1
            T = self.config.budget
            if self.timeline is not None and T > self.seg_start:
                self.timeline.add(self.w, self.base + self.working, LOCAL, self.seg_start, T)
            self.in_flight = False
        self.link.drain(self)

    def run_anytime(self) -> None:
        try:
            while True:
                if self.order:
                    self.move()
                else:
                    self.link.check(self)
                    time.sleep(1e-4)
        except _Stop:
            self.finish()

    def run_rounds(self, per_round: int) -> None:
        reps = 2 if self.config.tiers == TWO_TIER else 1
        try:
            while True:
                for rep in range(reps):
                    for _ in range(per_round if self.order else 0):
                        self.move()
                    if rep == 0 and reps == 2:
                        self._within(self.now())
                self.link.barrier(self)
        except _Stop:
            self.finish()

    def result(self) -> dict:
        return {
            "w": self.w,
            "recorders": self.recorders,
            "timeline": self.timeline,
            "moves": self.moves,
            "discarded": self.discarded,
            "sweeps": self.sweeps,
            "durations": self.durations,
            "attempts": self.local.attempts,
            "accepted": self.local.accepted,
        }


class _LocalLink:
    """Epochs for a single worker, run in the same process."""

    def __init__(self, family, topology, config, seed, anytime):
        self.config = config
        self.coordinator = Coordinator(family, topology, config.tiers, coordinator_stream(seed))
        self.delta = config.delta if anytime else None
        self.next = self.delta if self.delta is not None else float("inf")
        self.epochs = 0

    def check(self, wk: _Worker) -> None:
        t = wk.now()
        if t >= self.config.budget:
            raise _Stop
        if t >= self.next:
            self._epoch(wk, t, include_working=not self.config.corrected)
            self._update_delta(wk)
            self.next = wk.now() + self.delta

    def barrier(self, wk: _Worker) -> None:
        t = wk.now()
        if t >= self.config.budget:
            raise _Stop
        self._epoch(wk, t, include_working=True)

    def drain(self, wk: _Worker) -> None:
        pass

    def _epoch(self, wk, t, include_working):
        snap = wk.snapshot(include_working)
        excluded = set() if include_working else {wk.working_global()} - {None}
        pairs = self.coordinator.pairs(excluded)
        results = self.coordinator.apply(pairs, snap.__getitem__, snap.__setitem__)
        replacements = {c: snap[c] for i, k, ok in results if ok for c in (i, k)}
        participants = [c for i, k, _ in results for c in (i, k)]
        t_end = wk.now()
        wk.pause(t, t_end, WITHIN)
        wk.apply(replacements, participants, t_end, WITHIN)
        self.epochs += 1

    def _update_delta(self, wk):
        if self.config.deadline == ADAPTIVE and wk.sweeps:
            policy = TWO_TIER if self.config.tiers == TWO_TIER else ADAPTIVE
            self.delta = calibrate_delta(wk.sweeps, policy, self.config.statistic)


class _PipeLink:
    """Worker side of the coordinator protocol."""

    def __init__(self, conn, config):
        self.conn = conn
        self.config = config
        self.stopped = False

    def _handle(self, wk, msg):
        if msg[0] == "stop":
            self.stopped = True
            raise _Stop
        if msg[0] == "epoch":
            self._epoch(wk)

    def check(self, wk: _Worker) -> None:
        while self.conn.poll():
            self._handle(wk, self.conn.recv())

    def drain(self, wk: _Worker) -> None:
        """Keep serving epochs after stopping early, until the coordinator stops too."""
        try:
            while not self.stopped:
                self._handle(wk, self.conn.recv())
        except _Stop:
            pass

    def _epoch(self, wk):
        t = wk.now()
        include = not self.config.corrected
        self.conn.send(("snapshot", wk.w, wk.snapshot(include), wk.working_global(),
                        list(wk.sweeps)))
        msg = self.conn.recv()
        if msg[0] == "stop":
            self.stopped = True
            raise _Stop
        _, replacements, participants, t_end = msg
        t_end = max(t_end, t)
        wk.pause(t, t_end, BETWEEN)
        wk.apply(replacements, participants, t_end, BETWEEN)

    def barrier(self, wk: _Worker) -> None:
        t = wk.now()
        self.conn.send(("ready", wk.w, wk.snapshot(True), None, list(wk.sweeps)))
        msg = self.conn.recv()
        if msg[0] == "stop":
            self.stopped = True
            T = self.config.budget
            if wk.timeline is not None and T > t:
                wk.timeline.add(wk.w, -1, IDLE, t, T)
            raise _Stop
        _, replacements, participants, t_barrier, t_end = msg
        t_barrier = max(t_barrier, t)
        t_end = max(t_end, t_barrier)
        if wk.timeline is not None:
            if t_barrier > t:
                wk.timeline.add(wk.w, -1, IDLE, t, t_barrier)
            wk.timeline.add(wk.w, -1, BETWEEN, t_barrier, t_end)
        wk.seg_start = t_end
        wk.apply(replacements, participants, t_end, BETWEEN)


def _child(w, conn, family, topology, config, seed, initial, t0, anytime, per_round):
    try:
        wk = _Worker(w, family, topology, config, seed, initial, t0, _PipeLink(conn, config))
        if anytime:
            wk.run_anytime()
        else:
            wk.run_rounds(per_round)
        conn.send(("result", wk.result()))
    except BaseException:
        conn.send(("error", w, traceback.format_exc()))
    finally:
        conn.close()


class _Coordinator:
    """Coordinator side of a multi-worker wall-clock run."""

    def __init__(self, family, topology, config, seed, conns, procs, t0):
        self.config = config
        self.topology = topology
        self.conns = conns
        self.procs = procs
        self.t0 = t0
        self.coordinator = Coordinator(family, topology, config.tiers, coordinator_stream(seed))
        self.delta = config.delta
        self.epochs = 0
        self.cold_worker = topology.worker_of(family.cold_chains()[0])

    def now(self):
        return time.perf_counter() - self.t0

    def _abort(self, reason):
        for p in self.procs:
            if p.is_alive():
                p.terminate()
        for p in self.procs:
            p.join(1.0)
        raise RunAborted(reason)

    def _recv(self, w, timeout):
        conn = self.conns[w]
        if not conn.poll(timeout):
            self._abort(f"worker {w + 1} did not respond within {timeout:.1f} s")
        try:
            msg = conn.recv()
        except EOFError:
            self._abort(f"worker {w + 1} exited unexpectedly")
        if msg[0] == "error":
            self._abort(f"worker {msg[1] + 1} failed:\n{msg[2]}")
        return msg

    def _sleep_until(self, t):
        gap = t - self.now()
        if gap > 0:
            time.sleep(gap)

    def _exchange(self, snapshots, excluded):
        merged = {}
        for snap in snapshots:
            merged.update(snap)
        pairs = self.coordinator.pairs(excluded)
        results = self.coordinator.apply(pairs, merged.__getitem__, merged.__setitem__)
        swapped = {c for i, k, ok in results if ok for c in (i, k)}
        if self.config.overhead:
            time.sleep(self.config.overhead)
        out = []
        for w in range(self.topology.n_workers):
            mine = self.topology.chains(w)
            repl = {i: merged[i] for i in swapped if i in mine}
            part = [c for i, k, _ in results for c in (i, k) if c in mine]
            out.append((repl, part))
        self.epochs += 1
        return out

    def _update_delta(self, sweeps):
        if self.config.deadline == ADAPTIVE and sweeps:
            policy = TWO_TIER if self.config.tiers == TWO_TIER else ADAPTIVE
            self.delta = calibrate_delta(sweeps, policy, self.config.statistic)

    def run_anytime(self):
        T = self.config.budget
        grace = self.config.grace_period
        next_t = self.delta
        while True:
            self._sleep_until(min(next_t, T))
            if self.now() >= T:
                break
            for conn in self.conns:
                conn.send(("epoch",))
            msgs = [self._recv(w, grace) for w in range(len(self.conns))]
            excluded = {m[3] for m in msgs if m[3] is not None} if self.config.corrected \
                else set()
            out = self._exchange([m[2] for m in msgs], excluded)
            t_end = self.now()
            for conn, (repl, part) in zip(self.conns, out):
                conn.send(("swap", repl, part, t_end))
            self._update_delta(msgs[self.cold_worker][4])
            next_t = t_end + self.delta
        return self._collect()

    def run_rounds(self):
        T = self.config.budget
        grace = self.config.grace_period
        while True:
            msgs = {}
            while len(msgs) < len(self.conns):
                remaining = T - self.now()
                if remaining <= 0:
                    return self._collect()
                pending = [c for w, c in enumerate(self.conns) if w not in msgs]
                for conn in wait(pending, timeout=remaining):
                    w = self.conns.index(conn)
                    msgs[w] = self._recv(w, grace)
            t_barrier = self.now()
            if t_barrier >= T:
                return self._collect()
            out = self._exchange([msgs[w][2] for w in range(len(self.conns))], set())
            t_end = self.now()
            for conn, (repl, part) in zip(self.conns, out):
                conn.send(("swap", repl, part, t_barrier, t_end))

    def _collect(self):
        for conn in self.conns:
            conn.send(("stop",))
        results = []
        for w in range(len(self.conns)):
            msg = self._recv(w, self.config.grace_period)
            while msg[0] != "result":
                # a ready message sent just before the stop
                msg = self._recv(w, self.config.grace_period)
            results.append(msg[1])
        for p in self.procs:
            p.join(self.config.grace_period)
        return results


def _assemble(family, topology, config, seed, results, epochs, attempts, accepted, delta,
              elapsed):
    chains = [None] * family.n_chains
    timeline = MoveTimeline() if config.timeline else None
    for r in results:
        for i, rec in r["recorders"].items():
            chains[i] = rec.freeze()
        if timeline is not None:
            timeline.extend(r["timeline"])
    if isinstance(config.hold, HoldTimeModel) and config.hold.kind == "measured":
        for r in results:
            for h in r["durations"]:
                config.hold.record(h)
    cold_w = topology.worker_of(family.cold_chains()[0])
    meta = {
        "mode": "wall-clock",
        "seed": int(seed),
        "budget": config.budget,
        "n_workers": topology.n_workers,
        "epochs": epochs,
        "exchange_attempts": attempts + sum(r["attempts"] for r in results),
        "exchange_accepted": accepted + sum(r["accepted"] for r in results),
        "discarded_moves": sum(r["discarded"] for r in results),
        "local_moves": sum(r["moves"] for r in results),
        "final_delta": delta,
        "sweeps_measured": len(results[cold_w]["sweeps"]),
        "elapsed": elapsed,
    }
    return Trace(chains, family.columns, family.cold_chains(), meta, timeline)


def run_wallclock(family, topology: WorkerTopology, config: ScheduleConfig, seed, initial,
                  anytime: bool) -> Trace:
    """Run an algorithm against the real clock.

    Parameters
    ----------
    family
        Chain family; ``local_move`` should accept a ``checkpoint`` keyword.
    topology : WorkerTopology
        With ``W > 1`` each worker runs in its own forked process.
    config : ScheduleConfig
        ``budget``, ``delta`` and ``overhead`` are in seconds.
    seed : int
    initial : sequence
        Initial value of every chain.
    anytime : bool
        Exchange at deadlines (anytime) or after every worker finishes its
        round of local moves.
    """
    if topology.n_chains != family.n_chains:
        raise ConfigError(f"topology holds {topology.n_chains} chains but the family has "
                          f"{family.n_chains}")
    if len(initial) != family.n_chains:
        raise ConfigError("one initial value per chain is required")
    per_round = config.exchange_every or topology.chains_per_worker
    initial = list(initial)
    if topology.n_workers == 1:
        link = _LocalLink(family, topology, config, seed, anytime)
        t0 = time.perf_counter()
        wk = _Worker(0, family, topology, config, seed, initial, t0, link)
        if anytime:
            wk.run_anytime()
        else:
            wk.run_rounds(per_round)
        elapsed = time.perf_counter() - t0
        return _assemble(family, topology, config, seed, [wk.result()], link.epochs,
                         link.coordinator.attempts, link.coordinator.accepted, link.delta,
                         elapsed)
    ctx = mp.get_context("fork")
    conns, procs = [], []
    t0 = time.perf_counter()
    for w in range(topology.n_workers):
        parent, child = ctx.Pipe()
        p = ctx.Process(target=_child, args=(w, child, family, topology, config, seed,
                                             initial, t0, anytime, per_round), daemon=True)
        p.start()
        child.close()
        conns.append(parent)
        procs.append(p)
    coord = _Coordinator(family, topology, config, seed, conns, procs, t0)
    results = coord.run_anytime() if anytime else coord.run_rounds()
    elapsed = time.perf_counter() - t0
    return _assemble(family, topology, config, seed, results, coord.epochs,
                     coord.coordinator.attempts, coord.coordinator.accepted, coord.delta,
                     elapsed)
