"""Scheduling configuration, worker topology and deadline calibration."""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

from ..anytime import HoldTimeModel
from ..exceptions import ConfigError

VIRTUAL = "virtual"
WALL = "wall-clock"
FIXED = "fixed"
ADAPTIVE = "adaptive"
TWO_TIER = "two-tier"
WORKER_PAIRS = "worker-pairs"
SINGLE = "single"


@dataclass(frozen=True)
class WorkHold:
    """Virtual hold proportional to the simulation work of a move.

    The hold is ``base + unit * work`` where ``work`` is reported by the
    kernel (simulator calls or reactions for ABC models).
    """

    unit: float = 1.0
    base: float = 1.0

    def __call__(self, j, x_old, x_new, rng) -> float:
        return self.base + self.unit * x_new.work


@dataclass
class ScheduleConfig:
    """How a run is scheduled.

    Attributes
    ----------
    budget : float
        Total run time ``T`` (virtual units or seconds).
    mode : {"virtual", "wall-clock"}
    hold : HoldTimeModel or WorkHold, optional
        Virtual hold law; required in virtual mode.
    delta : float, optional
        Interval between exchange deadlines for the anytime algorithms. It
        is the starting value when ``deadline="adaptive"``.
    deadline : {"fixed", "adaptive"}
        Adaptive deadlines re-estimate ``delta`` after every epoch from the
        sweep durations measured on the cold chain's worker.
    statistic : {"median", "mean"}
        Statistic used by adaptive deadlines.
    tiers : {"single", "worker-pairs", "two-tier"}
        Single tier exchanges over all eligible chains at each epoch.
        Worker pairs exchange, at each epoch, one eligible chain of every
        odd (or even) pair of adjacent workers.
        Two-tier runs a within-worker exchange on one random adjacent pair
        every ``within_every`` local moves and, at epochs, exchanges the
        warmest eligible chain of one random worker with the coldest
        eligible chain of the next.
    within_every : int, optional
        Local moves between within-worker exchanges; defaults to ``K``.
    exchange_every : int, optional
        Local moves per worker between exchange rounds of the non-anytime
        algorithm; defaults to ``K``.
    corrected : bool
        Exclude working chains from exchanges.
    worst_case : bool
        Never run local moves on the cold chain(s).
    overhead : float
        Virtual cost of each between-worker epoch when ``W > 1``. In
        wall-clock mode it is an artificial delay added by the coordinator.
    record : "all", "cold" or sequence of int
        Chains whose samples are kept.
    timeline : bool
        Keep a :class:`MoveTimeline`.
    grace_period : float
        Wall-clock seconds the coordinator waits for a worker before
        aborting the run.
    check_states : bool
        Verify chain invariants after every move (ABC families).
    """

    budget: float
    mode: str = VIRTUAL
    hold: Optional[Union[HoldTimeModel, WorkHold]] = None
    delta: Optional[float] = None
    deadline: str = FIXED
    statistic: str = "median"
    tiers: str = SINGLE
    within_every: Optional[int] = None
    exchange_every: Optional[int] = None
    corrected: bool = True
    worst_case: bool = False
    overhead: float = 0.0
    record: Union[str, Sequence[int]] = "all"
    timeline: bool = True
    grace_period: float = 30.0
    check_states: bool = False
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        errors = []
        if not (self.budget >= 0 and math.isfinite(self.budget)):
            errors.append(f"budget must be finite and >= 0, got {self.budget}")
        if self.mode not in (VIRTUAL, WALL):
            errors.append(f"mode must be 'virtual' or 'wall-clock', got {self.mode!r}")
        if self.mode == VIRTUAL and self.hold is None:
            errors.append("virtual mode needs a hold model")
        if self.delta is not None and not self.delta > 0:
            errors.append(f"delta must be > 0, got {self.delta}")
        if self.deadline not in (FIXED, ADAPTIVE):
            errors.append(f"deadline must be 'fixed' or 'adaptive', got {self.deadline!r}")
        if self.statistic not in ("median", "mean"):
            errors.append(f"statistic must be 'median' or 'mean', got {self.statistic!r}")
        if self.tiers not in (SINGLE, WORKER_PAIRS, TWO_TIER):
            errors.append(f"tiers must be 'single', 'worker-pairs' or 'two-tier', got "
                          f"{self.tiers!r}")
        for name in ("within_every", "exchange_every"):
            v = getattr(self, name)
            if v is not None and v < 1:
                errors.append(f"{name} must be >= 1, got {v}")
        if self.overhead < 0:
            errors.append(f"overhead must be >= 0, got {self.overhead}")
        if errors:
            raise ConfigError(errors)


@dataclass(frozen=True)
class WorkerTopology:
    """Blocked assignment of ``W * K`` chains to ``W`` workers.

    Worker ``w`` (0-based) owns chain positions ``w*K .. w*K + K - 1``.
    """

    n_workers: int = 1
    chains_per_worker: int = 1

    def __post_init__(self):
        if self.n_workers < 1 or self.chains_per_worker < 1:
            raise ConfigError("a topology needs W >= 1 and K >= 1")

    @property
    def n_chains(self) -> int:
        return self.n_workers * self.chains_per_worker

    def chains(self, w: int) -> range:
        k = self.chains_per_worker
        return range(w * k, (w + 1) * k)

    def worker_of(self, i: int) -> int:
        return i // self.chains_per_worker


def calibrate_delta(measurements: Sequence[float], policy: str = FIXED,
                    statistic: str = "median") -> float:
    """Deadline interval from measured per-sweep durations.

    Parameters
    ----------
    measurements : sequence of float
        Durations of complete sweeps (one local move per chain of a worker).
    policy : {"fixed", "adaptive", "two-tier"}
        Fixed and adaptive policies return the statistic ``H``; two-tier
        returns ``2 H`` because a worker performs two sweeps between
        between-worker exchanges.
    statistic : {"median", "mean"}
    """
    values = [float(m) for m in measurements]
    if not values:
        raise ConfigError("calibrate_delta needs at least one measured sweep")
    if statistic == "median":
        h = statistics.median(values)
    elif statistic == "mean":
        h = statistics.fmean(values)
    else:
        raise ConfigError(f"unknown statistic {statistic!r}")
    if policy in (FIXED, ADAPTIVE):
        return h
    if policy == TWO_TIER:
        return 2.0 * h
    raise ConfigError(f"unknown deadline policy {policy!r}")
