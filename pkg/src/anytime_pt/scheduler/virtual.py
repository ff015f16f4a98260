"""Deterministic virtual-time execution of every algorithm on one thread.

Workers are simulated side by side. Each worker runs its own jump process
in *compute time*; coordination windows pause all workers together, so
global time is compute time plus the total coordination overhead so far.
"""

from __future__ import annotations

import math

from ..anytime import (DEFERRED, EXPLICIT, HoldTimeModel, JumpProcessState, VirtualClock,
                       advance_jump_process, sample_hold_time)
from ..exceptions import ConfigError
from ..streams import coordinator_stream, hold_streams, kernel_streams
from .config import ADAPTIVE, TWO_TIER, ScheduleConfig, WorkerTopology, calibrate_delta
from .coordination import Coordinator
from .records import BETWEEN, IDLE, INIT, LOCAL, WITHIN, ChainRecorder, MoveTimeline, Trace


def _hold_function(family, hold):
    if isinstance(hold, HoldTimeModel):
        if hold.kind != EXPLICIT:
            raise ConfigError("virtual mode needs an explicit hold model")
        return lambda j, x_old, x_new, rng: sample_hold_time(hold, family.hold_input(x_old), rng)
    return hold


def record_positions(family, record):
    if record == "all":
        return set(range(family.n_chains))
    if record == "cold":
        return set(family.cold_chains())
    return set(record)


class _Worker:
    def __init__(self, w, positions, family, values, kernel_rngs, hold_rngs, hold, order):
        self.w = w
        self.base = positions.start
        self.size = len(positions)
        self.order = order
        self.jp = JumpProcessState([values[i] for i in positions],
                                   working=order[0] if order else 0)
        self.clock = VirtualClock()
        base = self.base
        self.kernel = lambda l, x, r: family.local_move(base + l, x, r)
        self.rngs = [kernel_rngs[i] for i in positions]
        self.hold_rngs = [hold_rngs[i] for i in positions]
        self.hold = hold
        self.seg_start = 0.0
        self.moves = 0
        self.sweep_acc = 0.0
        self.sweeps = []

    def draw(self, l):
        x = self.jp.states[l]
        new = self.kernel(l, x, self.rngs[l])
        h = self.hold(l, x, new, self.hold_rngs[l])
        return new, h

    def next_in_order(self, l):
        return self.order[(self.order.index(l) + 1) % len(self.order)]


class VirtualScheduler:
    """Runs one algorithm in virtual time.

    Parameters
    ----------
    family
        Chain family (e.g. :class:`~anytime_pt.tempering.TemperedFamily`).
    topology : WorkerTopology
    config : ScheduleConfig
    seed : int
    initial : sequence
        Initial value of every chain.
    """

    def __init__(self, family, topology: WorkerTopology, config: ScheduleConfig, seed,
                 initial):
        if topology.n_chains != family.n_chains:
            raise ConfigError(f"topology holds {topology.n_chains} chains but the "
                              f"family has {family.n_chains}")
        if len(initial) != family.n_chains:
            raise ConfigError("one initial value per chain is required")
        self.family = family
        self.topology = topology
        self.config = config
        self.seed = seed
        n = family.n_chains
        hold = _hold_function(family, config.hold)
        krngs = kernel_streams(seed, n)
        hrngs = hold_streams(seed, n)
        cold = set(family.cold_chains())
        self.workers = []
        for w in range(topology.n_workers):
            positions = topology.chains(w)
            order = [l for l in range(len(positions))
                     if not (config.worst_case and positions.start + l in cold)]
            self.workers.append(_Worker(w, positions, family, list(initial), krngs, hrngs,
                                        hold, order))
        if not any(wk.order for wk in self.workers):
            raise ConfigError("no chain is left to take local moves")
        self.coordinator = Coordinator(family, topology, config.tiers, coordinator_stream(seed))
        self.recorded = record_positions(family, config.record)
        self.recorders = [ChainRecorder(len(family.columns)) if i in self.recorded else None
                          for i in range(n)]
        self.timeline = MoveTimeline() if config.timeline else None
        self.offset = 0.0
        self.until = 0.0
        self.delta = config.delta
        self.epochs = 0
        self.within_every = config.within_every or topology.chains_per_worker
        self.discarded = 0
        for i in range(n):
            self._record(i, 0.0, INIT)

    # chain access -------------------------------------------------------
    def _get(self, i):
        k = self.topology.chains_per_worker
        return self.workers[i // k].jp.states[i % k]

    def _put(self, i, value):
        k = self.topology.chains_per_worker
        jp = self.workers[i // k].jp
        jp.states[i % k] = value
        pending = jp.pending
        if pending is not None and pending.chain == i % k and pending.value is not DEFERRED:
            # the in-flight result belongs to the old value; commit the new one unchanged
            pending.value = value

    def _bump(self, i):
        k = self.topology.chains_per_worker
        self.workers[i // k].jp.counters[i % k] += 1

    def _record(self, i, t, kind):
        rec = self.recorders[i]
        if rec is not None:
            rec.add(self.family.record(self._get(i)), t, kind)

    def _exchange(self, pairs, t, kind):
        for i, k, _ in self.coordinator.apply(pairs, self._get, self._put):
            for c in (i, k):
                self._bump(c)
                self._record(c, t, kind)

    # local moves --------------------------------------------------------
    def _commit(self, wk, chain_local, start_local, end_local, t=None):
        # rounds pass the global end time to avoid offset round-off
        t = min(end_local + self.offset if t is None else t, self.until)
        i = wk.base + chain_local
        if self.config.check_states:
            self.family.check(i, self._get(i))
        self._record(i, t, LOCAL)
        if self.timeline is not None:
            self.timeline.add(wk.w, i, LOCAL, wk.seg_start, t)
        wk.seg_start = t
        wk.moves += 1
        wk.sweep_acc += end_local - start_local
        if wk.moves % len(wk.order) == 0:
            wk.sweeps.append(wk.sweep_acc)
            wk.sweep_acc = 0.0
        return t

    def _on_commit(self, wk):
        def hook(event):
            t = self._commit(wk, event.chain, event.start, event.end)
            if self.config.tiers == TWO_TIER and wk.moves % self.within_every == 0:
                self._within(wk, t)
        return hook

    def _within(self, wk, t):
        if self.timeline is not None:
            self.timeline.add(wk.w, -1, WITHIN, t, t)
        self._exchange(self.coordinator.within_pairs(wk.w), t, WITHIN)

    def _advance(self, wk, until):
        self.until = until
        if not wk.order:
            wk.clock.advance_to(until - self.offset)
            return
        advance_jump_process(wk.jp, wk.clock, wk.kernel, wk.hold, until - self.offset,
                             wk.rngs, hold_rng=wk.hold_rngs, order=wk.order,
                             on_commit=self._on_commit(wk))

    # epochs -------------------------------------------------------------
    def _overhead(self):
        return self.config.overhead if self.topology.n_workers > 1 else 0.0

    def _epoch_kind(self):
        return BETWEEN if self.topology.n_workers > 1 else WITHIN

    def _coordinate(self, g, excluded):
        c = self._overhead()
        kind = self._epoch_kind()
        for wk in self.workers:
            if self.timeline is not None:
                if wk.jp.pending is not None and g > wk.seg_start:
                    self.timeline.add(wk.w, wk.base + wk.jp.pending.chain, LOCAL, wk.seg_start, g)
                self.timeline.add(wk.w, -1, kind, g, g + c)
            wk.seg_start = g + c
        self._exchange(self.coordinator.pairs(excluded), g + c, kind)
        self.offset += c
        self.epochs += 1
        return g + c

    def _working(self):
        return {wk.base + wk.jp.working for wk in self.workers
                if wk.order and wk.jp.pending is not None}

    def _update_delta(self):
        if self.config.deadline != ADAPTIVE:
            return
        sweeps = self._calibration_worker().sweeps
        if sweeps:
            policy = TWO_TIER if self.config.tiers == TWO_TIER else ADAPTIVE
            self.delta = calibrate_delta(sweeps, policy, self.config.statistic)

    def _calibration_worker(self):
        cold = self.family.cold_chains()
        return self.workers[self.topology.worker_of(cold[0])]

    def run_anytime(self) -> Trace:
        """Exchange epochs every ``delta`` time units, excluding working chains."""
        T = self.config.budget
        delta = self.delta if self.delta is not None else math.inf
        t = delta
        while True:
            target = min(t, T)
            for wk in self.workers:
                self._advance(wk, target)
            if target >= T:
                break
            excluded = self._working() if self.config.corrected else set()
            resume = self._coordinate(target, excluded)
            self._update_delta()
            t = resume + (self.delta if self.delta is not None else math.inf)
        return self._finish(T, "anytime")

    def run_rounds(self) -> Trace:
        """Exchange rounds after every worker completes its local moves."""
        T = self.config.budget
        per_round = self.config.exchange_every or self.topology.chains_per_worker
        t = 0.0
        while True:
            self.until = T
            ends = [self._round(wk, t, per_round, T) for wk in self.workers]
            if any(e is None for e in ends):
                break
            barrier = max(ends)
            for wk, e in zip(self.workers, ends):
                if self.timeline is not None and barrier > e:
                    self.timeline.add(wk.w, -1, IDLE, e, barrier)
            if barrier >= T:
                break
            resume = self._coordinate(barrier, set())
            if resume >= T:
                break
            t = resume
        return self._finish(T, "rounds")

    def _round(self, wk, t, per_round, T):
        if not wk.order:
            return t
        reps = 2 if self.config.tiers == TWO_TIER else 1
        for rep in range(reps):
            for _ in range(per_round):
                l = wk.jp.working
                new, h = wk.draw(l)
                end = t + h
                if end > T:
                    if self.timeline is not None and T > t:
                        self.timeline.add(wk.w, wk.base + l, LOCAL, t, T)
                    wk.jp.pending = None
                    self.discarded += 1
                    return None
                wk.jp.states[l] = new
                wk.jp.counters[l] += 1
                wk.seg_start = t
                self._commit(wk, l, t - self.offset, end - self.offset, end)
                wk.jp.working = wk.next_in_order(l)
                t = end
            if rep == 0 and reps == 2:
                self._within(wk, t)
        return t


    def _finish(self, T, style):
        for wk in self.workers:
            if wk.jp.pending is not None:
                self.discarded += 1
                if self.timeline is not None and T > wk.seg_start:
                    self.timeline.add(wk.w, wk.base + wk.jp.pending.chain, LOCAL,
                                      wk.seg_start, T)
        meta = {
            "mode": "virtual",
            "seed": int(self.seed),
            "budget": T,
            "epochs": self.epochs,
            "exchange_attempts": self.coordinator.attempts,
            "exchange_accepted": self.coordinator.accepted,
            "discarded_moves": self.discarded,
            "local_moves": sum(wk.moves for wk in self.workers),
            "final_delta": self.delta,
            "sweeps_measured": len(self._calibration_worker().sweeps),
        }
        chains = [None if r is None else r.freeze() for r in self.recorders]
        return Trace(chains, self.family.columns, self.family.cold_chains(), meta,
                     self.timeline)

    def sweeps(self, worker: int = None) -> list:
        """Measured sweep durations (sum of holds) on a worker."""
        wk = self._calibration_worker() if worker is None else self.workers[worker]
        return list(wk.sweeps)
