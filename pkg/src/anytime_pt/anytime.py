"""Anytime Monte Carlo primitives.

A local move on a chain takes a random hold time ``H`` whose law may depend
on the current state. Interrupting the resulting jump process at a fixed
real time observes states drawn from the length-biased law
``E[H | x] pi(x) / E[H]`` rather than ``pi``. This module provides hold-time
models, a virtual clock, the jump process itself, and the closed-form
length-biased law for the Gamma-mixture test problem.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate, special

from ._validation import check_positive
from .exceptions import DomainError, IntegrationError, MisuseError

EXPLICIT = "explicit-gamma-mixture"
MEASURED = "measured"


@dataclass(frozen=True)
class GammaMixtureTarget:
    """Two-component Gamma mixture ``w Gamma(k1, theta1) + (1-w) Gamma(k2, theta2)``.

    Shapes ``k`` and scales ``theta`` follow the shape/scale convention.
    """

    k1: float
    theta1: float
    k2: float
    theta2: float
    weight: float = 0.5

    def __post_init__(self):
        for name in ("k1", "theta1", "k2", "theta2"):
            check_positive(name, getattr(self, name))
        if not 0.0 <= self.weight <= 1.0:
            raise DomainError(f"weight must lie in [0, 1], got {self.weight}")
        # log normalising constants of the weighted components
        with np.errstate(divide="ignore"):
            c1 = np.log(self.weight) - math.lgamma(self.k1) - self.k1 * math.log(self.theta1)
            c2 = np.log1p(-self.weight) - math.lgamma(self.k2) - self.k2 * math.log(self.theta2)
        object.__setattr__(self, "_c", (float(c1), float(c2)))

    def log_density(self, x: float) -> float:
        """Scalar log-density, ``-inf`` outside ``x > 0``. Fast path for kernels."""
        if not x > 0.0:
            return -math.inf
        c1, c2 = self._c
        lx = math.log(x)
        a = c1 + (self.k1 - 1.0) * lx - x / self.theta1
        b = c2 + (self.k2 - 1.0) * lx - x / self.theta2
        if a < b:
            a, b = b, a
        if b == -math.inf:
            return a
        return a + math.log1p(math.exp(b - a))

    def logpdf(self, x):
        """Vectorised log-density."""
        x = np.asarray(x, dtype=float)
        out = np.full(x.shape, -np.inf)
        pos = x > 0
        xp = x[pos]
        c1, c2 = self._c
        lx = np.log(xp)
        a = c1 + (self.k1 - 1.0) * lx - xp / self.theta1
        b = c2 + (self.k2 - 1.0) * lx - xp / self.theta2
        out[pos] = np.logaddexp(a, b)
        return out if out.ndim else float(out)

    def pdf(self, x):
        return np.exp(self.logpdf(x))

    def cdf(self, x):
        x = np.clip(np.asarray(x, dtype=float), 0.0, None)
        return (self.weight * special.gammainc(self.k1, x / self.theta1)
                + (1.0 - self.weight) * special.gammainc(self.k2, x / self.theta2))

    def mean(self) -> float:
        return self.weight * self.k1 * self.theta1 + (1.0 - self.weight) * self.k2 * self.theta2

    def sample(self, rng: np.random.Generator, size=None):
        first = rng.random(size) < self.weight
        a = rng.gamma(self.k1, self.theta1, size)
        b = rng.gamma(self.k2, self.theta2, size)
        return np.where(first, a, b)


@dataclass
class HoldTimeModel:
    """Law of the duration of one local move.

    Use :meth:`explicit` for virtual-time runs, where the hold given state
    ``x`` is ``psi Gamma(x**p / theta1, theta1) + (1 - psi) Gamma(x**p / theta2, theta2)``
    so that ``E[H | x] = x**p``. Use :meth:`measured` for wall-clock runs,
    where durations are only observed and recorded.
    """

    kind: str
    theta1: float = 1.0
    theta2: float = 1.0
    degree: int = 0
    psi: float = 1.0
    eps_min: float = 0.0
    observed: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        if self.kind not in (EXPLICIT, MEASURED):
            raise MisuseError(f"unknown hold-time kind {self.kind!r}")
        check_positive("theta1", self.theta1)
        check_positive("theta2", self.theta2)
        check_positive("eps_min", self.eps_min, strict=False)
        if not 0.0 <= self.psi <= 1.0:
            raise DomainError(f"psi must lie in [0, 1], got {self.psi}")
        if self.degree < 0:
            raise DomainError(f"degree must be >= 0, got {self.degree}")

    @classmethod
    def explicit(cls, theta1, theta2, degree, psi=1.0, eps_min=0.0):
        return cls(EXPLICIT, theta1, theta2, degree, psi, eps_min)

    @classmethod
    def measured(cls):
        return cls(MEASURED)

    def expected(self, x):
        """Conditional mean hold ``E[H | x] = x**p``."""
        return np.asarray(x, dtype=float) ** self.degree

    def record(self, h: float) -> None:
        """Store an observed duration (measured kind only)."""
        if self.kind != MEASURED:
            raise MisuseError("only measured hold models record durations")
        self.observed.append(float(h))


def sample_hold_time(model: HoldTimeModel, x: float, rng: np.random.Generator) -> float:
    """Draw a hold time given the current state.

    Parameters
    ----------
    model : HoldTimeModel
        Must be of the explicit kind.
    x : float
        Current state, strictly positive.
    rng : numpy.random.Generator

    Returns
    -------
    float
        A strictly positive duration, at least ``model.eps_min``.
    """
    if model.kind != EXPLICIT:
        raise MisuseError("measured hold models cannot be sampled")
    if not x > 0.0:
        raise DomainError(f"hold times need a positive state, got {x!r}")
    if model.psi >= 1.0 or rng.random() < model.psi:
        scale = model.theta1
    else:
        scale = model.theta2
    h = rng.gamma(x ** model.degree / scale, scale)
    # tiny shapes can underflow to exactly zero
    return max(h, model.eps_min, math.ulp(0.0))


def anytime_phi(degree: float, target: GammaMixtureTarget) -> float:
    """Weight of the first component in the length-biased Gamma mixture.

    With ``E[H | x] = x**p`` each component ``Gamma(k, theta)`` becomes
    ``Gamma(k + p, theta)`` and is reweighted by its ``p``-th moment
    ``Gamma(k + p) theta**p / Gamma(k)``.
    """
    p = float(degree)
    if p < 0:
        raise DomainError(f"degree must be >= 0, got {degree}")
    w = target.weight
    if w in (0.0, 1.0):
        return w
    log_ratio = ((math.lgamma(target.k1) - math.lgamma(p + target.k1))
                 + (math.lgamma(p + target.k2) - math.lgamma(target.k2))
                 + p * (math.log(target.theta2) - math.log(target.theta1))
                 + (math.log1p(-w) - math.log(w)))
    return 1.0 / (1.0 + math.exp(log_ratio))


def anytime_distribution(target: GammaMixtureTarget, degree: float) -> GammaMixtureTarget:
    """The length-biased law of ``target`` under hold model ``E[H | x] = x**p``."""
    return GammaMixtureTarget(target.k1 + degree, target.theta1,
                              target.k2 + degree, target.theta2,
                              weight=anytime_phi(degree, target))


def anytime_density(target: GammaMixtureTarget, degree: float, x):
    """Density of the anytime distribution at ``x > 0``."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise DomainError("the anytime density is defined for x > 0")
    out = anytime_distribution(target, degree).pdf(x)
    return out if np.ndim(out) else float(out)


def length_biased_reference(pi_density: Callable, expected_hold: Callable, x,
                            normalizer: Optional[float] = None,
                            support=(0.0, math.inf)):
    """Length-biased density ``E[H | x] pi(x) / E[H]``.

    Parameters
    ----------
    pi_density, expected_hold : callable
        Scalar functions of the state.
    x : float or array_like
        Evaluation points.
    normalizer : float, optional
        ``E[H]`` under ``pi``. Computed by adaptive quadrature over
        ``support`` when omitted.

    Raises
    ------
    IntegrationError
        If the normaliser does not converge or is not finite and positive.
    """
    if normalizer is None:
        normalizer = _quad(lambda u: expected_hold(u) * pi_density(u), *support)
    if not (np.isfinite(normalizer) and normalizer > 0):
        raise IntegrationError(f"E[H] must be finite and positive, got {normalizer}")
    xs = np.asarray(x, dtype=float)
    vals = np.array([expected_hold(u) * pi_density(u) for u in xs.ravel()], dtype=float)
    out = vals.reshape(xs.shape) / normalizer
    return out if out.ndim else float(out)


def _quad(f, a, b):
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            value, _ = integrate.quad(f, a, b, limit=200)
        except (integrate.IntegrationWarning, OverflowError, ZeroDivisionError) as exc:
            raise IntegrationError(f"quadrature failed: {exc}") from exc
    if not np.isfinite(value):
        raise IntegrationError(f"quadrature returned {value}")
    return value


@dataclass
class VirtualClock:
    """Simulated clock that only moves forward."""

    now: float = 0.0
    next_deadline: float = math.inf

    def advance(self, h: float) -> float:
        if h < 0:
            raise ValueError(f"cannot advance by a negative amount {h}")
        self.now += h
        return self.now

    def advance_to(self, t: float) -> float:
        if t < self.now:
            raise ValueError(f"cannot move the clock back from {self.now} to {t}")
        self.now = t
        return self.now


DEFERRED = object()


@dataclass
class PendingMove:
    """A local move that has started but not completed.

    ``value`` is :data:`DEFERRED` when the hold does not depend on the
    move's result; the kernel then runs at completion on the chain's value
    at that time.
    """

    chain: int
    value: object
    hold: float


@dataclass
class MoveEvent:
    chain: int
    start: float
    end: float
    value: object


@dataclass
class JumpProcessState:
    """The triple ``(states, lag, working chain)`` plus sample counters.

    Chains are indexed from 0 here because they address ``states``.
    ``arrival`` is the time of the last completed move, kept alongside the
    lag so that repeated advances do not accumulate rounding error.
    """

    states: list
    lag: float = 0.0
    working: int = 0
    counters: list = None
    arrival: float = 0.0
    pending: Optional[PendingMove] = None

    def __post_init__(self):
        self.states = list(self.states)
        if not self.states:
            raise ValueError("a jump process needs at least one chain")
        if self.counters is None:
            self.counters = [0] * len(self.states)
        if not 0 <= self.working < len(self.states):
            raise ValueError(f"working index {self.working} out of range")

    @property
    def n_chains(self) -> int:
        return len(self.states)


def _pick(source, j):
    return source if isinstance(source, np.random.Generator) else source[j]


def advance_jump_process(state: JumpProcessState, clock: VirtualClock, kernel: Callable,
                         hold, until: float, rng, *, hold_rng=None,
                         order: Optional[Sequence[int]] = None,
                         on_commit: Optional[Callable] = None):
    """Run the jump process forward to time ``until``.

    The working chain draws its next state from ``kernel`` and a hold time
    ``h``; the move is committed at ``arrival + h`` if that is no later than
    ``until``. A move still running at ``until`` stays pending, so the next
    call resumes it with exactly its remaining hold.

    With an explicit hold model the hold is drawn from the pre-move state
    and the kernel runs at completion. Each chain has its own kernel stream,
    so this gives the same draws as running the kernel first unless the
    chain's value was changed while the move was in flight.

    Parameters
    ----------
    state : JumpProcessState
        Updated in place.
    clock : VirtualClock
        Ends at ``until``.
    kernel : callable
        ``kernel(j, x, rng) -> x_new``.
    hold : HoldTimeModel or callable
        Explicit models are sampled at the pre-move state. Measured models
        time the kernel call. A callable is invoked as
        ``hold(j, x_old, x_new, rng) -> h``.
    until : float
        Must not precede ``clock.now``.
    rng : Generator or sequence of Generator
        A single generator, or one per chain.
    hold_rng : Generator or sequence of Generator, optional
        Source for hold draws; defaults to ``rng``.
    order : sequence of int, optional
        Chains that take local moves, in cycle order. Defaults to all.
    on_commit : callable, optional
        Called as ``on_commit(event)`` after each completed move.

    Returns
    -------
    state : JumpProcessState
    events : list of MoveEvent
    """
    if until < clock.now:
        raise ValueError(f"until={until} precedes clock.now={clock.now}")
    if hold_rng is None:
        hold_rng = rng
    if order is None:
        order = range(state.n_chains)
    order = list(order)
    events = []
    while True:
        if state.pending is None:
            j = state.working
            x = state.states[j]
            r = _pick(rng, j)
            if isinstance(hold, HoldTimeModel):
                if hold.kind == EXPLICIT:
                    h = sample_hold_time(hold, x, _pick(hold_rng, j))
                    new = DEFERRED
                else:
                    t0 = time.perf_counter()
                    new = kernel(j, x, r)
                    h = time.perf_counter() - t0
                    hold.record(h)
            else:
                new = kernel(j, x, r)
                h = hold(j, x, new, _pick(hold_rng, j))
            state.pending = PendingMove(j, new, h)
        end = state.arrival + state.pending.hold
        if end > until:
            break
        j = state.pending.chain
        value = state.pending.value
        if value is DEFERRED:
            value = kernel(j, state.states[j], _pick(rng, j))
        event = MoveEvent(j, state.arrival, end, value)
        state.states[j] = value
        state.counters[j] += 1
        state.arrival = end
        state.pending = None
        state.working = order[(order.index(j) + 1) % len(order)]
        events.append(event)
        if on_commit is not None:
            on_commit(event)
    clock.advance_to(until)
    state.lag = until - state.arrival
    return state, events
