"""Standard MCMC, parallel tempering and anytime parallel tempering runs.

Every entry point takes a chain *family* (tempered targets or an ABC
ladder), a :class:`ScheduleConfig`, a root seed and the initial chain
values, and returns a :class:`Trace`. Virtual-time runs are deterministic;
wall-clock runs use measured durations and, with several workers, real
worker processes.
"""

from ..exceptions import ConfigError
from .config import (ADAPTIVE, FIXED, SINGLE, TWO_TIER, VIRTUAL, WALL, WORKER_PAIRS,
                     ScheduleConfig, WorkerTopology, WorkHold, calibrate_delta)
from .records import (BETWEEN, IDLE, INIT, LOCAL, WITHIN, ChainTrace, MoveTimeline, Trace,
                      export_timeline, export_trace, read_trace_file)
from .virtual import VirtualScheduler


def _single(family):
    return WorkerTopology(1, family.n_chains)


def _run(family, topology, config, seed, initial, anytime):
    if config.mode == VIRTUAL:
        engine = VirtualScheduler(family, topology, config, seed, initial)
        return engine.run_anytime() if anytime else engine.run_rounds()
    from .wallclock import run_wallclock

    return run_wallclock(family, topology, config, seed, initial, anytime)


def run_standard_mcmc(family, config: ScheduleConfig, seed, initial) -> Trace:
    """Local moves on a single chain until the budget is spent."""
    if family.n_chains != 1:
        raise ConfigError("standard MCMC runs exactly one chain")
    config = _replace(config, delta=None, worst_case=False)
    return _run(family, _single(family), config, seed, initial, anytime=True)


def run_ptmc(family, topology: WorkerTopology, config: ScheduleConfig, seed, initial) -> Trace:
    """Parallel tempering that waits for every worker before each exchange round.

    Each worker performs ``config.exchange_every`` local moves (two such
    sweeps with a within-worker exchange between them under the two-tier
    policy), then idles until the slowest worker finishes.
    """
    if topology is None:
        topology = _single(family)
    return _run(family, topology, config, seed, initial, anytime=False)


def run_aptmc_single(family, config: ScheduleConfig, seed, initial) -> Trace:
    """Anytime parallel tempering on one worker."""
    _need_delta(config)
    if family.n_chains < 2:
        raise ConfigError("anytime parallel tempering needs at least two chains")
    return _run(family, _single(family), config, seed, initial, anytime=True)


def run_aptmc_multi(family, topology: WorkerTopology, config: ScheduleConfig, seed,
                    initial) -> Trace:
    """Anytime parallel tempering over several workers."""
    _need_delta(config)
    if topology.chains_per_worker < 2:
        raise ConfigError("anytime parallel tempering needs at least two chains per "
                          "worker, otherwise every chain is working at each deadline")
    return _run(family, topology, config, seed, initial, anytime=True)


def _need_delta(config):
    if config.delta is None:
        raise ConfigError("anytime algorithms need a deadline interval delta")


def _replace(config, **changes):
    from dataclasses import replace

    return replace(config, **changes)


__all__ = [
    "ADAPTIVE", "BETWEEN", "FIXED", "IDLE", "INIT", "LOCAL", "SINGLE", "TWO_TIER",
    "VIRTUAL", "WALL", "WITHIN", "WORKER_PAIRS", "ChainTrace", "MoveTimeline", "ScheduleConfig", "Trace",
    "VirtualScheduler", "WorkHold", "WorkerTopology", "calibrate_delta", "export_timeline",
    "export_trace", "read_trace_file", "run_aptmc_multi", "run_aptmc_single", "run_ptmc",
    "run_standard_mcmc",
]
