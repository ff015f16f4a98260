"""Tempered targets, local moves and exchange moves.

Chain *labels* run from 1 to ``n_chains`` in this module, matching the usual
parallel tempering notation: label ``n_chains`` is the cold chain of a
tempered ladder. Arrays indexed by chain are still 0-based, so chain label
``lam`` lives at position ``lam - 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from ._validation import check_positive

ODD = "odd"
EVEN = "even"


@dataclass(frozen=True)
class TemperatureLadder:
    """Per-chain inverse temperatures and proposal scales.

    Parameters
    ----------
    exponents : sequence of float
        Inverse temperature of each chain, non-decreasing, in ``(0, 1]``.
        Repeated values are allowed so that several chains may share a
        temperature.
    sigmas : sequence of float
        Proposal standard deviation of each chain.
    """

    exponents: tuple
    sigmas: tuple

    def __post_init__(self):
        exps = tuple(float(e) for e in self.exponents)
        sig = tuple(float(s) for s in self.sigmas)
        if not exps:
            raise ValueError("a ladder needs at least one chain")
        if len(sig) != len(exps):
            raise ValueError("exponents and sigmas must have the same length")
        if any(not 0.0 < e <= 1.0 for e in exps):
            raise ValueError("exponents must lie in (0, 1]")
        if any(b < a for a, b in zip(exps, exps[1:])):
            raise ValueError("exponents must be non-decreasing")
        for s in sig:
            check_positive("sigma", s, error=ValueError)
        object.__setattr__(self, "exponents", exps)
        object.__setattr__(self, "sigmas", sig)

    @classmethod
    def uniform(cls, n_chains: int, sigma: float = 1.0, copies: int = 1):
        """Ladder with exponents ``lam / n_chains``, each repeated ``copies`` times."""
        exps = [lam / n_chains for lam in range(1, n_chains + 1) for _ in range(copies)]
        return cls(tuple(exps), (sigma,) * len(exps))

    @property
    def n_chains(self) -> int:
        return len(self.exponents)

    @property
    def cold_label(self) -> int:
        return self.n_chains

    def exponent(self, lam: int) -> float:
        _check_label(lam, self.n_chains)
        return self.exponents[lam - 1]


def _check_label(lam, n):
    if not 1 <= lam <= n:
        raise IndexError(f"chain label {lam} outside 1..{n}")


def tempered_log_density(ladder: TemperatureLadder, lam: int, x, log_target: Callable) -> float:
    """Unnormalised log-density ``beta_lam * log pi(x)`` of chain ``lam``."""
    lp = log_target(x)
    if lp == -math.inf:
        return -math.inf
    return ladder.exponent(lam) * lp


class ChainState:
    """Value, label and sample counter of one chain."""

    __slots__ = ("value", "label", "n")

    def __init__(self, value, label: int, n: int = 0):
        self.value = value
        self.label = label
        self.n = n

    def __repr__(self):
        return f"ChainState(value={self.value!r}, label={self.label}, n={self.n})"

    def __eq__(self, other):
        if not isinstance(other, ChainState):
            return NotImplemented
        return (self.label, self.n) == (other.label, other.n) and np.array_equal(
            self.value, other.value)


def metropolis_step(x: float, beta: float, sigma: float, log_target: Callable,
                    rng: np.random.Generator, current_lp: float = None) -> float:
    """One random-walk Metropolis step on ``pi**beta``; returns the new value."""
    y = x + sigma * rng.standard_normal()
    lp_y = log_target(y)
    if lp_y == -math.inf:
        return x
    lp_x = log_target(x) if current_lp is None else current_lp
    log_u = math.log(rng.random())
    return y if log_u < beta * (lp_y - lp_x) else x


def rwm_local_move(state: ChainState, ladder: TemperatureLadder, sigma: float,
                   rng: np.random.Generator, log_target: Callable) -> ChainState:
    """Random-walk Metropolis move with a Gaussian proposal of scale ``sigma``.

    The returned state has its counter incremented whether or not the
    proposal was accepted.
    """
    check_positive("sigma", sigma)
    beta = ladder.exponent(state.label)
    value = metropolis_step(state.value, beta, sigma, log_target, rng)
    return ChainState(value, state.label, state.n + 1)


def exchange_log_ratio(beta, beta2, lp, lp2) -> float:
    """Log of the swap ratio for two chains, or ``-inf`` if undefined."""
    if lp == -math.inf and lp2 == -math.inf:
        return -math.inf
    den = beta * lp + beta2 * lp2
    if den == -math.inf:
        return -math.inf
    return (beta * lp2 + beta2 * lp) - den


def exchange_accept_prob(ladder: TemperatureLadder, lam: int, lam2: int, x, x2,
                         log_target: Callable) -> float:
    """Probability of swapping the states of chains ``lam`` and ``lam2``.

    ``x`` is the state of chain ``lam`` and ``x2`` that of ``lam2``. The
    ratio ``pi_lam(x2) pi_lam2(x) / (pi_lam(x) pi_lam2(x2))`` is formed in log
    space; it is zero when both states have zero density.
    """
    if lam == lam2:
        raise ValueError("an exchange needs two distinct chains")
    log_r = exchange_log_ratio(ladder.exponent(lam), ladder.exponent(lam2),
                               log_target(x), log_target(x2))
    return 1.0 if log_r >= 0 else math.exp(log_r)


def apply_exchange(pair, accept: bool):
    """Swap the values of a pair of chain states if ``accept``.

    Both counters advance by one whatever the outcome.
    """
    a, b = pair
    if a.label == b.label:
        raise ValueError("an exchange needs two distinct chains")
    if accept:
        return (ChainState(b.value, a.label, a.n + 1), ChainState(a.value, b.label, b.n + 1))
    return (ChainState(a.value, a.label, a.n + 1), ChainState(b.value, b.label, b.n + 1))


@dataclass
class PairSchedule:
    """Deterministic odd/even alternation of exchange epochs."""

    parity: str = ODD

    def next(self) -> str:
        """Return the parity for this epoch and flip it for the next one."""
        current = self.parity
        self.parity = EVEN if current == ODD else ODD
        return current


def adjacent_pairs(n: int, parity: str):
    """Odd pairs ``(1, 2), (3, 4), ...`` or even pairs ``(2, 3), (4, 5), ...`` over ``1..n``."""
    if parity not in (ODD, EVEN):
        raise ValueError(f"parity must be 'odd' or 'even', got {parity!r}")
    first = 1 if parity == ODD else 2
    return [(i, i + 1) for i in range(first, n, 2)]


def eligible_pairs(n_chains: int, working: Iterable[int], parity: str):
    """Exchange pairs over the chains that are not working.

    The eligible labels are relabelled ``1..m`` in ascending order, paired
    by parity, and mapped back, so two eligible chains either side of a
    working chain become neighbours.

    Examples
    --------
    >>> eligible_pairs(8, {2}, "odd")
    [(1, 3), (4, 5), (6, 7)]
    """
    working = set(working)
    for lam in working:
        _check_label(lam, n_chains)
    eligible = [lam for lam in range(1, n_chains + 1) if lam not in working]
    return [(eligible[i - 1], eligible[k - 1]) for i, k in adjacent_pairs(len(eligible), parity)]


def global_chain_label(w: int, k: int, chains_per_worker: int, n_workers: int = None) -> int:
    """Global label ``(w - 1) K + k`` of chain ``k`` on worker ``w`` (both 1-based)."""
    if not 1 <= k <= chains_per_worker:
        raise IndexError(f"chain {k} outside 1..{chains_per_worker}")
    if w < 1 or (n_workers is not None and w > n_workers):
        raise IndexError(f"worker {w} out of range")
    return (w - 1) * chains_per_worker + k


class TemperedFamily:
    """Tempered versions of one target, driven by random-walk Metropolis.

    This is the object the scheduler runs: it provides the local move and
    the exchange rule for every chain of a :class:`TemperatureLadder`.
    """

    def __init__(self, log_target: Callable, ladder: TemperatureLadder):
        self.log_target = log_target
        self.ladder = ladder

    @property
    def n_chains(self) -> int:
        return self.ladder.n_chains

    def cold_chains(self) -> list:
        """0-based positions of the chains at exponent 1."""
        return [i for i, e in enumerate(self.ladder.exponents) if e == 1.0]

    def local_move(self, i: int, x, rng, checkpoint=None):
        return metropolis_step(x, self.ladder.exponents[i], self.ladder.sigmas[i],
                               self.log_target, rng)

    def exchange(self, i: int, k: int, xi, xk, rng) -> bool:
        log_r = exchange_log_ratio(self.ladder.exponents[i], self.ladder.exponents[k],
                                   self.log_target(xi), self.log_target(xk))
        if log_r >= 0:
            return True
        return math.log(rng.random()) < log_r

    def record(self, x) -> Sequence[float]:
        return (float(x),)

    def hold_input(self, x) -> float:
        return float(x)

    @property
    def columns(self):
        return ("value",)
