"""Bundled experiment presets.

Every numeric constant of the reference studies lives here; the engine
modules take all of them as arguments. Budgets are shrunk to desk scale and
``paper_budget`` keeps the original length so the manifest can report the
shrink factor.
"""

from __future__ import annotations

from ..exceptions import ConfigError
from .config import GAMMA, LV, NORMAL, ExperimentConfig, _suggest, validate_config

GAMMA_MODEL = {
    "target": [3.0, 0.15, 20.0, 0.25],
    "hold": [0.15, 0.25],
    "psi": 1.0,
    "sigma": 0.5,
    "initial": 1.0,
    "grid": [0.0, 15.0, 0.25],
}

NORMAL_MODEL = {
    "y": 3.0,
    "noise_sd": 1.0,
    "prior": [0.0, 5.0],
    "step_sd": 0.5,
    "eps": [0.1, 1.1],
    "initial": 3.0,
    "grid": [-1.0, 7.0, 0.1],
}

LV_MODEL = {
    "prior": "exponential",
    "bounds": [0.0, 10.0],
    "init_state": [50, 100],
    "theta0": [1.0, 0.005, 0.6],
}

_PRESETS = {}


def _add(name, description, **fields):
    fields.setdefault("description", description)
    _PRESETS[name] = fields


def _gamma_bias():
    for p in range(4):
        for corrected in (True, False):
            tag = "corrected" if corrected else "uncorrected"
            model = dict(GAMMA_MODEL, degree=p)
            _add(f"gamma-p{p}-{tag}-1proc",
                 f"Gamma mixture bias study, hold degree {p}, {tag}, one worker; the cold "
                 f"chain only receives exchange moves",
                 experiment=GAMMA, algorithm="APTMC-1", chains=8, budget=1e6, burn_in=1e5,
                 delta=5.0, corrected=corrected, worst_case=True, paper_budget=1e8,
                 timeline=False, model=model)
            _add(f"gamma-p{p}-{tag}-wproc",
                 f"Gamma mixture bias study, hold degree {p}, {tag}, eight workers with two "
                 f"equal-temperature chains each",
                 experiment=GAMMA, algorithm="APTMC-W", chains=16, workers=8,
                 chains_per_worker=2, budget=1e6, burn_in=1e5, delta=5.0,
                 tiers="worker-pairs", corrected=corrected, paper_budget=1e7,
                 timeline=False, model=dict(model, copies=2))


def _gamma_perf():
    for p in range(4):
        model = dict(GAMMA_MODEL, degree=p)
        delta = 30.0 if p == 3 else 5.0
        paper = 1e6 if p == 0 else 1e7
        common = dict(experiment=GAMMA, budget=1e6, burn_in=1e5, paper_budget=paper,
                      timeline=False)
        _add(f"gamma-perf-p{p}-mcmc", f"Gamma mixture efficiency, hold degree {p}, "
             "single-chain random-walk Metropolis", algorithm="MCMC", chains=1,
             model=model, **common)
        _add(f"gamma-perf-p{p}-aptmc1", f"Gamma mixture efficiency, hold degree {p}, "
             "eight chains on one worker", algorithm="APTMC-1", chains=8, delta=delta,
             model=model, **common)
        _add(f"gamma-perf-p{p}-aptmcw", f"Gamma mixture efficiency, hold degree {p}, "
             "eight workers with two chains each", algorithm="APTMC-W", chains=16,
             workers=8, chains_per_worker=2, delta=delta, tiers="worker-pairs",
             model=dict(model, copies=2), **common)


def _normal():
    for corrected in (True, False):
        tag = "corrected" if corrected else "uncorrected"
        _add(f"normal-abc-{tag}", f"Normal-mean ABC over ten radii, {tag}, ten minutes "
             "of wall-clock time", experiment=NORMAL, algorithm="ABC-APTMC-1",
             mode="wall-clock", chains=10, budget=600.0, burn_in=30.0, delta=5e-4,
             corrected=corrected, record="all", timeline=False, export_traces=False,
             paper_budget=3600.0, model=dict(NORMAL_MODEL))
        _add(f"normal-abc-virtual-{tag}", f"Normal-mean ABC over ten radii, {tag}, "
             "virtual time with holds proportional to simulation work", experiment=NORMAL,
             algorithm="ABC-APTMC-1", chains=10, budget=1e6, burn_in=5e4, delta=10.0,
             corrected=corrected, record="all", timeline=False,
             model=dict(NORMAL_MODEL, hold=[1.0, 1.0]))


def _lv():
    single = dict(LV_MODEL, ladder="single")
    common = dict(experiment=LV, mode="wall-clock", budget=1800.0, burn_in=60.0,
                  paper_budget=100800.0, record="cold", timeline=True)
    _add("lv-table2-abc", "Lotka-Volterra, standard 1-hit ABC-MCMC on one chain, 30 minutes",
         algorithm="ABC", chains=1,
         model=dict(LV_MODEL, ladder="none", eps=1.0, variances=[0.25, 0.0025, 0.25]),
         **common)
    _add("lv-table2-ptmc1", "Lotka-Volterra, six-chain ABC parallel tempering on one worker, "
         "exchanges every six local moves, 30 minutes", algorithm="ABC-PTMC-1", chains=6,
         exchange_every=6, model=single, **common)
    _add("lv-table2-aptmc1", "Lotka-Volterra, six-chain anytime ABC parallel tempering on "
         "one worker, deadline set to the running median sweep time, 30 minutes",
         algorithm="ABC-APTMC-1", chains=6, delta=0.05, deadline="adaptive", model=single,
         **common)
    multi = dict(LV_MODEL, ladder="multi", prior="uniform", prior_high=3.0, bounds=[0.0, 3.0])
    common = dict(common, paper_budget=86400.0)
    _add("lv-table3-ptmc1", "Lotka-Volterra, twenty chains on one worker, exchanges every "
         "twenty local moves, 30 minutes", algorithm="ABC-PTMC-1", chains=20,
         exchange_every=20, model=multi, **common)
    _add("lv-table3-aptmc1", "Lotka-Volterra, twenty chains on one worker, anytime "
         "exchanges at the running median sweep time, 30 minutes", algorithm="ABC-APTMC-1",
         chains=20, delta=0.1, deadline="adaptive", model=multi, **common)
    _add("lv-table3-ptmcw", "Lotka-Volterra, four workers with five chains each, exchange "
         "rounds after five local moves with a within-worker exchange, 1.1 s communication "
         "overhead, 30 minutes", algorithm="ABC-PTMC-W", chains=20, workers=4,
         chains_per_worker=5, exchange_every=5, tiers="two-tier", overhead=1.1,
         model=multi, **common)
    _add("lv-table3-aptmcw", "Lotka-Volterra, four workers with five chains each, "
         "within-worker exchanges every five local moves and between-worker exchanges at "
         "twice the median sweep time, 1.1 s communication overhead, 30 minutes",
         algorithm="ABC-APTMC-W", chains=20, workers=4, chains_per_worker=5,
         within_every=5, delta=0.2, deadline="adaptive", tiers="two-tier", overhead=1.1,
         model=multi, **common)


def _idle():
    model = dict(GAMMA_MODEL, degree=1, hold=[0.15, 10.0], psi=0.5)
    common = dict(experiment=GAMMA, chains=20, workers=4, chains_per_worker=5, budget=2e4,
                  burn_in=1e3, overhead=1.1, tiers="two-tier", record="cold", model=model)
    _add("idle-w4k5-ptmcw", "Idle-time emulation: four workers with five chains each, "
         "exchange rounds after every worker finishes, heavy-tailed hold mixture, 1.1 units "
         "of coordination overhead", algorithm="PTMC-W", exchange_every=5, **common)
    _add("idle-w4k5-aptmcw", "Idle-time emulation: four workers with five chains each, "
         "anytime between-worker exchanges at twice the median sweep time, heavy-tailed "
         "hold mixture, 1.1 units of coordination overhead", algorithm="APTMC-W",
         within_every=5, delta=10.0, deadline="adaptive", **common)


_gamma_bias()
_gamma_perf()
_normal()
_lv()
_idle()


def preset_names() -> list:
    """Stable preset identifiers, sorted."""
    return sorted(_PRESETS)


def list_presets() -> list:
    """``(name, description)`` for every bundled preset."""
    return [(name, _PRESETS[name]["description"]) for name in preset_names()]


def get_preset(name: str) -> ExperimentConfig:
    """Validated configuration of a preset."""
    if name not in _PRESETS:
        raise ConfigError(f"unknown preset {name!r}; {_suggest(name, preset_names())}")
    return validate_config(dict(_PRESETS[name]))
