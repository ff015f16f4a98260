"""Exchange-epoch logic shared by the virtual and wall-clock schedulers."""

from __future__ import annotations

from typing import Iterable

from ..exceptions import ConsistencyError
from ..tempering import PairSchedule, adjacent_pairs, eligible_pairs
from .config import SINGLE, TWO_TIER, WORKER_PAIRS, WorkerTopology


class Coordinator:
    """Chooses exchange pairs at each epoch and applies the exchange rule.

    Parameters
    ----------
    family
        Provides ``exchange(i, k, xi, xk, rng) -> bool``.
    topology : WorkerTopology
    tiers : {"single", "worker-pairs", "two-tier"}
        Single tier pairs all eligible neighbours, alternating odd and even
        pairs. Worker pairs alternate odd and even pairs of adjacent
        workers, each contributing the eligible chain nearest the boundary.
        Two-tier picks one random pair of adjacent workers per epoch
        and one random adjacent pair for each within-worker exchange.
    rng : numpy.random.Generator
        Drives the accept/reject draws of exchanges.
    """

    def __init__(self, family, topology: WorkerTopology, tiers: str, rng):
        self.family = family
        self.topology = topology
        self.tiers = tiers
        self.rng = rng
        self.parity = PairSchedule()
        self.attempts = 0
        self.accepted = 0

    def pairs(self, excluded: Iterable[int]) -> list:
        """0-based chain pairs for one epoch, never touching ``excluded``."""
        excluded = set(excluded)
        n = self.topology.n_chains
        if self.tiers == SINGLE:
            labels = eligible_pairs(n, {i + 1 for i in excluded}, self.parity.next())
            out = [(a - 1, b - 1) for a, b in labels]
        elif self.tiers in (TWO_TIER, WORKER_PAIRS):
            n_workers = self.topology.n_workers
            if self.tiers == WORKER_PAIRS:
                workers = [(a - 1, b - 1) for a, b in adjacent_pairs(n_workers, self.parity.next())]
            elif n_workers > 1:
                a = int(self.rng.integers(n_workers - 1))
                workers = [(a, a + 1)]
            else:
                workers = []
            out = []
            for a, b in workers:
                # the two eligible chains closest to the worker boundary
                left = [i for i in self.topology.chains(a) if i not in excluded]
                right = [i for i in self.topology.chains(b) if i not in excluded]
                if left and right:
                    out.append((max(left), min(right)))
        else:
            raise ValueError(f"unknown tiers {self.tiers!r}")
        if any(i in excluded or k in excluded for i, k in out):
            raise ConsistencyError("a working chain was paired for exchange")
        return out

    def within_pairs(self, w: int) -> list:
        """One adjacent pair of worker ``w``'s chains, chosen uniformly at random."""
        k = self.topology.chains_per_worker
        if k < 2:
            return []
        a = self.topology.chains(w).start + int(self.rng.integers(k - 1))
        return [(a, a + 1)]

    def apply(self, pairs, get, put) -> list:
        """Run the exchange rule on ``pairs`` and swap accepted values.

        ``get(i)`` and ``put(i, value)`` read and write chain values.
        Returns ``(i, k, accepted)`` for every attempted pair.
        """
        results = []
        for i, k in pairs:
            xi, xk = get(i), get(k)
            ok = bool(self.family.exchange(i, k, xi, xk, self.rng))
            if ok:
                put(i, xk)
                put(k, xi)
            self.attempts += 1
            self.accepted += ok
            results.append((i, k, ok))
        return results
