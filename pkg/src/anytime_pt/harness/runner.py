"""Run an experiment configuration and write its artifacts."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy import optimize, stats

from .. import __version__
from ..abc import (AbcFamily, ExponentialPrior, NormalPrior, TruncatedNormalProposal,
                   UniformPrior, initial_state, load_ladder, load_observations, lv_model,
                   normal_abc_model, quadrature_abc_posterior)
from ..anytime import GammaMixtureTarget, HoldTimeModel, anytime_distribution
from ..diagnostics import aggregate_runs, density_distance, peak_density, reference_on_grid
from ..scheduler import (ScheduleConfig, Trace, WorkerTopology, WorkHold, export_timeline,
                         export_trace, run_aptmc_multi, run_aptmc_single, run_ptmc,
                         read_trace_file, run_standard_mcmc)
from ..scheduler.records import ChainTrace, _CODE
from ..streams import init_stream, repeat_seed
from ..tempering import TemperatureLadder, TemperedFamily
from .config import GAMMA, LV, NORMAL, ExperimentConfig, validate_config


@dataclass
class Setup:
    """Everything a scheduler needs for one run."""

    family: object
    initial: list
    topology: WorkerTopology
    schedule: ScheduleConfig


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    traces: list
    report: dict
    seeds: list
    runtime: list = field(default_factory=list)
    out_dir: Optional[Path] = None


# model construction ----------------------------------------------------

def gamma_target(cfg: ExperimentConfig) -> GammaMixtureTarget:
    k1, t1, k2, t2 = cfg.model["target"]
    return GammaMixtureTarget(k1, t1, k2, t2)


def normal_radii(cfg: ExperimentConfig) -> np.ndarray:
    lo, hi = cfg.model["eps"]
    return np.linspace(lo, hi, cfg.chains)


def _prior(cfg):
    m = cfg.model
    if m["prior"] == "uniform":
        return UniformPrior([0.0] * 3, [m["prior_high"]] * 3)
    return ExponentialPrior(3)


def _lv_ladder(cfg):
    m = cfg.model
    if m["ladder"] == "none":
        return [m["eps"]], [list(m["variances"])]
    eps, sigma = load_ladder(m["ladder"])
    return eps, [[s, s * 1e-2, s] for s in sigma]


def build(cfg: ExperimentConfig, seed: int) -> Setup:
    """Family, initial states, topology and schedule for one run of ``cfg``."""
    m = cfg.model
    hold = None
    if cfg.experiment == GAMMA:
        copies = m.get("copies", 1)
        ladder = TemperatureLadder.uniform(cfg.chains // copies, m["sigma"], copies)
        family = TemperedFamily(gamma_target(cfg).log_density, ladder)
        initial = [float(m["initial"])] * cfg.chains
        hold = HoldTimeModel.explicit(m["hold"][0], m["hold"][1], m["degree"], m["psi"])
    else:
        rng = init_stream(seed)
        if cfg.experiment == NORMAL:
            prior = NormalPrior(*m["prior"])
            model = normal_abc_model(m["y"], m["noise_sd"], m["eps"][0], prior, m["step_sd"])
            eps = normal_radii(cfg)
            proposals = [TruncatedNormalProposal([m["step_sd"] ** 2])] * cfg.chains
            family = AbcFamily(model, eps, proposals)
            theta0 = [m["initial"]]
        else:
            times, y = load_observations()
            eps, variances = _lv_ladder(cfg)
            lo, hi = m["bounds"]
            proposals = [TruncatedNormalProposal(v, lo, hi) for v in variances]
            model = lv_model(_prior(cfg), proposals[0], y, eps[0], m["init_state"], times)
            family = AbcFamily(model, eps, proposals, names=("theta1", "theta2", "theta3"))
            theta0 = m["theta0"]
        initial = [initial_state(mod, theta0, rng) for mod in family.models]
        if cfg.mode == "virtual":
            hold = WorkHold(*m["hold"])
    schedule = ScheduleConfig(
        budget=cfg.budget, mode=cfg.mode, hold=hold, delta=cfg.delta, deadline=cfg.deadline,
        statistic=cfg.statistic, tiers=cfg.tiers, within_every=cfg.within_every,
        exchange_every=cfg.exchange_every, corrected=cfg.corrected, worst_case=cfg.worst_case,
        overhead=cfg.overhead, record=cfg.record, timeline=cfg.timeline,
        grace_period=cfg.grace_period)
    topology = WorkerTopology(cfg.workers, cfg.k)
    return Setup(family, initial, topology, schedule)


def run_once(cfg: ExperimentConfig, seed: int) -> Trace:
    """One run of ``cfg`` with root ``seed``, before burn-in."""
    s = build(cfg, seed)
    algo = cfg.algorithm.removeprefix("ABC-") if cfg.algorithm != "ABC" else "MCMC"
    if algo == "MCMC":
        return run_standard_mcmc(s.family, s.schedule, seed, s.initial)
    if algo.startswith("PTMC"):
        return run_ptmc(s.family, s.topology, s.schedule, seed, s.initial)
    if algo == "APTMC-1":
        return run_aptmc_single(s.family, s.schedule, seed, s.initial)
    return run_aptmc_multi(s.family, s.topology, s.schedule, seed, s.initial)


# reports -----------------------------------------------------------------

def _grid(spec):
    lo, hi, step = spec
    n = int(round((hi - lo) / step))
    return lo + step * np.arange(n + 1)


def second_component_threshold(target: GammaMixtureTarget) -> float:
    """Point between the modes where the two weighted components are equal."""
    def gap(x):
        return (np.log(target.weight) + stats.gamma.logpdf(x, target.k1, scale=target.theta1)
                - np.log1p(-target.weight)
                - stats.gamma.logpdf(x, target.k2, scale=target.theta2))
    m1 = (target.k1 - 1) * target.theta1
    m2 = (target.k2 - 1) * target.theta2
    return float(optimize.brentq(gap, m1, m2))


def _gamma_report(cfg, cold):
    target = gamma_target(cfg)
    edges = _grid(cfg.model["grid"])
    ref = reference_on_grid(edges, target.cdf)
    alpha = anytime_distribution(target, cfg.model["degree"])
    c = second_component_threshold(target)
    x = np.concatenate(cold)
    return {
        "tv_target": density_distance(x, edges, ref),
        "tv_anytime": density_distance(x, edges, reference_on_grid(edges, alpha.cdf)),
        "second_component_threshold": c,
        "second_component_mass": float(np.mean(x > c)),
        "second_component_mass_target": float(1.0 - target.cdf(c)),
    }


def _normal_report(cfg, traces):
    m = cfg.model
    edges = _grid(m["grid"])
    prior = NormalPrior(*m["prior"])
    chains = []
    for i, eps in enumerate(normal_radii(cfg)):
        if traces[0].chains[i] is None:
            continue
        x = np.concatenate([t.samples(i)[:, 0] for t in traces])
        q = quadrature_abc_posterior(m["y"], m["noise_sd"], eps, prior)
        ref = q.on_bins(edges)
        chains.append({
            "chain": i + 1, "eps": float(eps), "n": int(x.size),
            "tv": density_distance(x, edges, ref),
            "peak": peak_density(x, edges), "reference_peak": float(ref.max()),
            "mean": float(x.mean()), "reference_mean": q.mean(),
        })
    return {"chains": chains}


def _lv_report(cfg, traces, columns):
    out = {}
    for i in range(traces[0].n_chains):
        if traces[0].chains[i] is None:
            continue
        x = np.concatenate([t.samples(i) for t in traces])
        out[str(i + 1)] = {"n": int(len(x)),
                           "mean": {c: float(v) for c, v in zip(columns, x.mean(axis=0))}}
    return {"chains": out}


def _round(obj):
    if isinstance(obj, float):
        return float(f"{obj:.12g}")
    if isinstance(obj, dict):
        return {k: _round(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_round(v) for v in obj]
    return obj


def make_report(cfg: ExperimentConfig, traces: list) -> dict:
    """Diagnostics for the burned-in traces of all repeats.

    The acf of each parameter is averaged over every cold chain of every
    repeat; the ESS is summed over them.
    """
    burned = [t.burned(cfg.burn_in) for t in traces]
    columns = burned[0].columns
    cold = [t.samples(i) for t in burned for i in t.cold if t.chains[i] is not None]
    cold = [c for c in cold if len(c) > 1]
    report = {"experiment": cfg.experiment, "algorithm": cfg.algorithm,
              "burn_in": cfg.burn_in, "repeats": len(traces)}
    if cold:
        diag = aggregate_runs(cold, names=columns)
        report["diagnostics"] = diag.to_dict()
    else:
        report["diagnostics"] = None
        report["warnings"] = ["too few post burn-in cold samples for diagnostics"]
    report["cold_samples"] = [int(len(c)) for c in cold]
    keys = ("epochs", "exchange_attempts", "exchange_accepted", "discarded_moves",
            "local_moves")
    report["runs"] = [{k: t.metadata.get(k) for k in keys} for t in traces]
    if cold and cfg.experiment == GAMMA:
        report["density"] = _gamma_report(cfg, [c[:, 0] for c in cold])
    elif cfg.experiment == NORMAL:
        report["density"] = _normal_report(cfg, burned)
    elif cfg.experiment == LV:
        report["density"] = _lv_report(cfg, burned, columns)
    if burned[0].timeline is not None and cfg.mode == "virtual":
        tl = burned[0].timeline
        report["timeline"] = {"idle": tl.total("idle"), "local": tl.total("local"),
                              "consistent": tl.is_consistent()}
    return _round(report)


# artifacts ---------------------------------------------------------------

def _dump(path, obj):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def write_artifacts(result: ExperimentResult, out_dir) -> Path:
    """Write traces, timelines, the report, the manifest and runtime info."""
    cfg = result.config
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for r, trace in enumerate(result.traces, start=1):
        run_dir = out / f"run_{r}"
        if cfg.export_traces:
            files += [p.relative_to(out).as_posix() for p in export_trace(trace, run_dir)]
        if trace.timeline is not None:
            run_dir.mkdir(parents=True, exist_ok=True)
            export_timeline(trace.timeline, run_dir / "timeline.csv")
            files.append(f"run_{r}/timeline.csv")
    _dump(out / "report.json", result.report)
    manifest = {
        "config": cfg.to_dict() | {"out_dir": None},
        "digest": cfg.digest(),
        "seed": cfg.seed,
        "repeat_seeds": result.seeds,
        "shrink_factor": cfg.shrink_factor,
        "paper_budget": cfg.paper_budget,
        "version": __version__,
        "files": sorted(files) + ["report.json"],
    }
    _dump(out / "manifest.json", manifest)
    _dump(out / "runtime.json", {"runs": result.runtime})
    result.out_dir = out
    return out


def run_experiment(cfg: ExperimentConfig, out_dir=None) -> ExperimentResult:
    """Run every repeat of ``cfg``, build the report and optionally write artifacts.

    Parameters
    ----------
    cfg : ExperimentConfig
    out_dir : path, optional
        Defaults to ``cfg.out_dir``. Nothing is written when both are None.
    """
    cfg = validate_config(cfg)
    seeds = [repeat_seed(cfg.seed, r) for r in range(cfg.repeats)]
    traces, runtime = [], []
    for s in seeds:
        t0 = time.perf_counter()
        trace = run_once(cfg, s)
        runtime.append({"seed": s, "elapsed": time.perf_counter() - t0,
                        "metadata": trace.metadata})
        traces.append(trace)
    result = ExperimentResult(cfg, traces, make_report(cfg, traces), seeds, runtime)
    target = out_dir if out_dir is not None else cfg.out_dir
    if target is not None:
        write_artifacts(result, target)
    return result


def load_run(run_dir) -> tuple:
    """Configuration and exported traces of a finished run directory."""
    run_dir = Path(run_dir)
    manifest = json.loads((run_dir / "manifest.json").read_text())
    cfg = validate_config(manifest["config"])
    setup = build(cfg, manifest["seed"])
    columns = setup.family.columns
    cold = setup.family.cold_chains()
    traces = []
    for r in range(1, len(manifest["repeat_seeds"]) + 1):
        chains = [None] * setup.family.n_chains
        for path in sorted((run_dir / f"run_{r}").glob("chain_*.csv")):
            i = int(path.stem.split("_")[1]) - 1
            chains[i] = _read_chain(path)
        traces.append(Trace(chains, columns, cold, {}))
    return cfg, traces, manifest


def _read_chain(path):
    values, times, kinds = read_trace_file(path)
    return ChainTrace(values, times, np.array([_CODE[k] for k in kinds], dtype=np.int8))


def report_from_dir(run_dir) -> dict:
    """Recompute the report of a run from its exported traces.

    Falls back to the stored report when traces were not exported. The
    timeline summary is copied from the stored report.
    """
    run_dir = Path(run_dir)
    cfg, traces, manifest = load_run(run_dir)
    stored = json.loads((run_dir / "report.json").read_text())
    if not cfg.export_traces or any(all(c is None for c in t.chains) for t in traces):
        return stored
    for t, meta in zip(traces, _runtime_meta(run_dir)):
        t.metadata = meta
    report = make_report(cfg, traces)
    # the timeline summary is not recomputed from the csv
    if "timeline" in stored:
        report["timeline"] = stored["timeline"]
    return report


def _runtime_meta(run_dir):
    path = Path(run_dir) / "runtime.json"
    if not path.exists():
        return []
    return [r["metadata"] for r in json.loads(path.read_text())["runs"]]
