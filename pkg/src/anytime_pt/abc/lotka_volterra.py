"""Stochastic Lotka-Volterra model simulated with the Gillespie algorithm.

Three reactions act on prey ``x1`` and predators ``x2``: prey birth at rate
``theta1 x1``, predation (prey to predator) at rate ``theta2 x1 x2`` and
predator death at rate ``theta3 x2``.
"""

from __future__ import annotations

import csv
import math
from importlib import resources
from typing import NamedTuple, Optional

import numpy as np
from numba import njit

from ..exceptions import TruncationError
from .models import AbcModel

_DONE, _NEED_UNIFORMS, _MISS, _CAPPED = 0, 1, 2, 3
_SLACK = 1e-9


class LotkaVolterraState(NamedTuple):
    x1: int
    x2: int
    t: float = 0.0


def lv_total_rate(theta, state: LotkaVolterraState) -> float:
    """Sum of the three reaction rates in ``state``."""
    t1, t2, t3 = (float(v) for v in theta)
    return t1 * state.x1 + t2 * state.x1 * state.x2 + t3 * state.x2


@njit(cache=True)
def _gillespie_core(t1, t2, t3, x1, x2, t, k, times, lo, hi, u, out, events, max_events):
    n = times.shape[0]
    m = u.shape[0]
    i = 0
    while True:
        r1 = t1 * x1
        r2 = t2 * x1 * x2
        r3 = t3 * x2
        rate = r1 + r2 + r3
        if rate <= 0.0:
            # absorbed: every remaining record repeats the frozen prey count
            while k < n:
                out[k] = x1
                if x1 < lo[k] or x1 > hi[k]:
                    return x1, x2, t, k, i, events, _MISS
                k += 1
            return x1, x2, t, k, i, events, _DONE
        if i + 2 > m:
            return x1, x2, t, k, i, events, _NEED_UNIFORMS
        t_next = t - math.log(1.0 - u[i]) / rate
        while k < n and times[k] < t_next:
            out[k] = x1
            if x1 < lo[k] or x1 > hi[k]:
                return x1, x2, t, k, i, events, _MISS
            k += 1
        if k == n:
            return x1, x2, t, k, i, events, _DONE
        if max_events >= 0 and events >= max_events:
            return x1, x2, t, k, i, events, _CAPPED
        v = u[i + 1] * rate
        if v < r1:
            x1 += 1
        elif v < r1 + r2:
            x1 -= 1
            x2 += 1
        else:
            x2 -= 1
        events += 1
        t = t_next
        i += 2
        if x2 == 0 and x1 > hi[k]:
            # without predators prey can only grow
            return x1, x2, t, k, i, events, _MISS


def _simulate(theta, init, times, rng, max_events, lo, hi):
    t1, t2, t3 = (float(v) for v in theta)
    if min(t1, t2, t3) < 0:
        raise ValueError(f"rates must be non-negative, got {theta}")
    times = np.asarray(times, dtype=float)
    out = np.zeros(times.shape[0], dtype=np.int64)
    x1, x2 = int(init[0]), int(init[1])
    t, k, events = 0.0, 0, 0
    cap = -1 if max_events is None else int(max_events)
    block = 1024
    while True:
        u = rng.random(block)
        x1, x2, t, k, _, events, status = _gillespie_core(
            t1, t2, t3, x1, x2, t, k, times, lo, hi, u, out, events, cap)
        if status == _DONE:
            return out, events
        if status == _MISS:
            return None, events
        if status == _CAPPED:
            raise TruncationError(f"simulation exceeded {max_events} events")
        block = min(block * 2, 1 << 20)


def gillespie_simulate(theta, init, record_times, rng: np.random.Generator,
                       max_events: Optional[int] = None) -> np.ndarray:
    """Exact stochastic simulation, returning the prey count at each record time.

    Parameters
    ----------
    theta : sequence of 3 float
        Non-negative reaction rate constants.
    init : sequence of 2 int
        Initial prey and predator counts.
    record_times : sequence of float
        Increasing observation times.
    rng : numpy.random.Generator
        Source of the uniforms consumed by the simulation.
    max_events : int, optional
        Raise :class:`TruncationError` once this many reactions have fired.
    """
    n = len(record_times)
    lo = np.full(n, -np.inf)
    hi = np.full(n, np.inf)
    out, _ = _simulate(theta, init, record_times, rng, max_events, lo, hi)
    return out


def lv_hits_ball(sim, y, eps: float) -> bool:
    """True iff every prey log-ratio ``|log sim_i - log y_i|`` is at most ``eps``."""
    if sim is None:
        return False
    sim = np.asarray(sim, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(sim <= 0):
        return False
    return bool(np.all(np.abs(np.log(sim) - np.log(y)) <= eps))


def load_observations():
    """Bundled observation times and prey counts."""
    text = resources.files(__package__).joinpath("data/lv_observations.csv").read_text()
    rows = list(csv.DictReader(text.splitlines()))
    times = np.array([float(r["time"]) for r in rows])
    prey = np.array([int(r["prey"]) for r in rows])
    return times, prey


def load_ladder(name: str):
    """Bundled radius and proposal-scale ladder, coldest chain first.

    ``name`` is ``"single"`` (six chains) or ``"multi"`` (twenty chains).
    """
    text = resources.files(__package__).joinpath(f"data/lv_ladder_{name}.csv").read_text()
    rows = list(csv.DictReader(text.splitlines()))
    eps = [float(r["epsilon"]) for r in rows]
    sigma = [float(r["sigma"]) for r in rows]
    return eps, sigma


def lv_model(prior, proposal, y, eps: float, init, times) -> AbcModel:
    """ABC model for the prey series ``y`` observed at ``times``.

    Simulations stop as soon as a recorded prey count leaves the ball, since
    the dataset can then no longer hit it. Work is counted in reactions.
    """
    y = np.asarray(y, dtype=float)
    times = np.asarray(times, dtype=float)
    init = tuple(int(v) for v in init)

    def simulate(theta, rng, y_obs, radius):
        lo = y_obs * math.exp(-radius) * (1 - _SLACK)
        hi = y_obs * math.exp(radius) * (1 + _SLACK)
        out, events = _simulate(theta, init, times, rng, None, lo, hi)
        return out, float(events + 1)

    return AbcModel(prior, proposal, simulate, lv_hits_ball, y, float(eps))
