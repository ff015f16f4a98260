"""Experiment configuration: a flat TOML file plus an optional ``[model]`` table.

A file may start from a bundled preset with ``base = "<preset name>"`` and
override any field. Without a base every required field must be given.
"""

from __future__ import annotations

import difflib
import hashlib
import json
import math
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..exceptions import ConfigError

GAMMA = "gamma-mixture"
NORMAL = "normal-abc"
LV = "lotka-volterra"
EXPERIMENTS = (GAMMA, NORMAL, LV)

STANDARD = ("MCMC", "ABC")
ROUNDS = ("PTMC-1", "PTMC-W", "ABC-PTMC-1", "ABC-PTMC-W")
ANYTIME = ("APTMC-1", "APTMC-W", "ABC-APTMC-1", "ABC-APTMC-W")
ALGORITHMS = ("MCMC", "PTMC-1", "APTMC-1", "PTMC-W", "APTMC-W",
              "ABC", "ABC-PTMC-1", "ABC-APTMC-1", "ABC-PTMC-W", "ABC-APTMC-W")

VIRTUAL = "virtual"
WALL = "wall-clock"

# model keys and their kinds, per experiment
MODEL_KEYS = {
    GAMMA: {"target": "floats4", "hold": "floats2", "psi": "unit", "degree": "int>=0",
            "sigma": "pos", "initial": "pos", "copies": "int>=1", "grid": "floats3"},
    NORMAL: {"y": "num", "noise_sd": "pos", "prior": "floats2", "step_sd": "pos",
             "eps": "floats2", "initial": "num", "grid": "floats3", "hold": "floats2"},
    LV: {"ladder": "str", "eps": "pos", "variances": "floats3", "prior": "str",
         "prior_high": "pos", "bounds": "floats2", "init_state": "ints2", "theta0": "floats3",
         "hold": "floats2", "grid_bins": "int>=1"},
}
OPTIONAL_MODEL_KEYS = {
    GAMMA: {"copies"},
    NORMAL: {"hold"},
    LV: {"eps", "variances", "prior_high", "hold", "grid_bins"},
}


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment run (or a set of repeat runs).

    ``chains``, ``workers`` and ``chains_per_worker`` are ``Lambda``, ``W``
    and ``K``. Times are virtual units or seconds depending on ``mode``.
    ``paper_budget`` is the budget the settings were designed for; the
    manifest records ``paper_budget / budget`` as the shrink factor.
    """

    experiment: str
    algorithm: str
    budget: float
    chains: int = 1
    workers: int = 1
    chains_per_worker: Optional[int] = None
    mode: str = VIRTUAL
    burn_in: float = 0.0
    delta: Optional[float] = None
    deadline: str = "fixed"
    statistic: str = "median"
    tiers: str = "single"
    exchange_every: Optional[int] = None
    within_every: Optional[int] = None
    overhead: float = 0.0
    corrected: bool = True
    worst_case: bool = False
    seed: int = 0
    repeats: int = 1
    record: str = "cold"
    timeline: bool = True
    export_traces: bool = True
    paper_budget: Optional[float] = None
    grace_period: float = 30.0
    description: str = ""
    out_dir: Optional[str] = None
    model: dict = field(default_factory=dict)

    @property
    def k(self) -> int:
        return self.chains_per_worker or self.chains // self.workers

    @property
    def shrink_factor(self) -> Optional[float]:
        return None if self.paper_budget is None else self.paper_budget / self.budget

    def with_(self, **changes) -> "ExperimentConfig":
        return validate_config(dict(self.to_dict(), **changes))

    def to_dict(self) -> dict:
        return asdict(self)

    def digest(self) -> str:
        """Hash of every field that changes what is computed.

        The seed and output directory are left out; the manifest records
        the seed separately.
        """
        d = self.to_dict()
        for name in ("seed", "out_dir", "description"):
            d.pop(name)
        text = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()


_FIELDS = {f.name: f for f in fields(ExperimentConfig)}
_REQUIRED = ("experiment", "algorithm", "budget")


def _suggest(value, options) -> str:
    close = difflib.get_close_matches(str(value), options, n=3, cutoff=0.4)
    hint = f"; did you mean {', '.join(repr(c) for c in close)}?" if close else ""
    return f"expected one of {', '.join(options)}{hint}"


def _is_num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _check_kind(name, v, kind, errors):
    ok = True
    if kind == "num":
        ok = _is_num(v)
    elif kind == "pos":
        ok = _is_num(v) and v > 0
    elif kind == "unit":
        ok = _is_num(v) and 0 <= v <= 1
    elif kind == "str":
        ok = isinstance(v, str)
    elif kind.startswith("int>="):
        ok = _is_int(v) and v >= int(kind[5:])
    elif kind.startswith("floats"):
        n = int(kind[6:])
        ok = isinstance(v, (list, tuple)) and len(v) == n and all(_is_num(x) for x in v)
    elif kind.startswith("ints"):
        n = int(kind[4:])
        ok = isinstance(v, (list, tuple)) and len(v) == n and all(_is_int(x) for x in v)
    if not ok:
        errors.append(f"model.{name} = {v!r} is not a valid value ({kind})")


def _check_model(cfg_dict, errors):
    exp = cfg_dict.get("experiment")
    model = cfg_dict.get("model") or {}
    if exp not in MODEL_KEYS:
        return
    if not isinstance(model, dict):
        errors.append("model must be a table of model settings")
        return
    keys = MODEL_KEYS[exp]
    for name, v in model.items():
        if name not in keys:
            errors.append(f"unknown model key {name!r} for {exp}; "
                          f"{_suggest(name, sorted(keys))}")
        else:
            _check_kind(name, v, keys[name], errors)
    missing = set(keys) - set(model) - OPTIONAL_MODEL_KEYS[exp]
    for name in sorted(missing):
        errors.append(f"model.{name} is required for {exp}")


def _check_fields(d, errors):
    for name in d:
        if name not in _FIELDS:
            errors.append(f"unknown field {name!r}; {_suggest(name, sorted(_FIELDS))}")
    for name in _REQUIRED:
        if name not in d:
            errors.append(f"{name} is required")
    kinds = {
        "budget": "num", "burn_in": "num", "delta": "num?", "overhead": "num",
        "paper_budget": "num?", "grace_period": "num",
        "chains": "int", "workers": "int", "chains_per_worker": "int?", "seed": "int",
        "repeats": "int", "exchange_every": "int?", "within_every": "int?",
        "corrected": "bool", "worst_case": "bool", "timeline": "bool", "export_traces": "bool",
        "experiment": "str", "algorithm": "str", "mode": "str", "deadline": "str",
        "statistic": "str", "tiers": "str", "record": "str", "description": "str",
        "out_dir": "str?",
    }
    bad = set()
    for name, kind in kinds.items():
        if name not in d:
            continue
        v = d[name]
        if kind.endswith("?"):
            if v is None:
                continue
            kind = kind[:-1]
        ok = {"num": _is_num, "int": _is_int, "bool": lambda x: isinstance(x, bool),
              "str": lambda x: isinstance(x, str)}[kind](v)
        if not ok:
            errors.append(f"{name} = {v!r} should be of type {kind}")
            bad.add(name)
    return bad


def _check_cross(d, errors, bad):
    get = d.get
    exp, algo, mode = get("experiment"), get("algorithm"), get("mode", VIRTUAL)
    if "experiment" not in bad and exp is not None and exp not in EXPERIMENTS:
        errors.append(f"unknown experiment {exp!r}; {_suggest(exp, EXPERIMENTS)}")
    if "algorithm" not in bad and algo is not None and algo not in ALGORITHMS:
        errors.append(f"unknown algorithm {algo!r}; {_suggest(algo, ALGORITHMS)}")
    if mode not in (VIRTUAL, WALL):
        errors.append(f"unknown mode {mode!r}; {_suggest(mode, (VIRTUAL, WALL))}")
    if exp in EXPERIMENTS and algo in ALGORITHMS:
        is_abc = algo.startswith("ABC")
        if exp == GAMMA and is_abc:
            errors.append(f"algorithm {algo} is an ABC algorithm but {exp} is not an ABC "
                          f"experiment")
        if exp != GAMMA and not is_abc:
            errors.append(f"{exp} needs an ABC algorithm, got {algo}")
    if exp == GAMMA and mode != VIRTUAL:
        errors.append("gamma-mixture runs in virtual mode only (its hold times are simulated)")
    if exp in (NORMAL, LV) and mode == VIRTUAL and "hold" not in (get("model") or {}):
        errors.append("virtual ABC runs need model.hold = [unit, base] for the work-based "
                      "hold time")
    if {"budget", "burn_in"} & bad:
        return
    budget, burn = get("budget"), get("burn_in", 0.0)
    if budget is not None and not budget > 0:
        errors.append(f"budget must be > 0, got {budget}")
    if burn < 0 or (budget is not None and burn >= budget):
        errors.append(f"burn_in must satisfy 0 <= burn_in < budget, got {burn}")
    if {"chains", "workers", "chains_per_worker"} & bad:
        return
    lam, w, k = get("chains", 1), get("workers", 1), get("chains_per_worker")
    if lam < 1 or w < 1 or (k is not None and k < 1):
        errors.append("chains, workers and chains_per_worker must be >= 1")
        return
    if k is not None and w * k != lam:
        errors.append(f"workers * chains_per_worker must equal chains (W*K = Lambda), got "
                      f"workers={w}, chains_per_worker={k}, chains={lam}")
    elif k is None and lam % w:
        errors.append(f"chains={lam} cannot be split evenly over workers={w}; set "
                      f"chains_per_worker so that workers * chains_per_worker = chains")
    k = k if k is not None else lam // w
    if algo in STANDARD and (lam != 1 or w != 1):
        errors.append(f"{algo} runs a single chain on one worker, got chains={lam}, "
                      f"workers={w}")
    if algo in ALGORITHMS and algo.endswith("-1") and w != 1:
        errors.append(f"{algo} runs on one worker, got workers={w}")
    if algo in ("APTMC-W", "ABC-APTMC-W") and k < 2:
        errors.append(f"{algo} needs at least two chains per worker (chains_per_worker="
                      f"{k}): a worker whose only chain is working has nothing to exchange")
    if algo in ANYTIME:
        delta = get("delta")
        if delta is None:
            errors.append(f"{algo} needs a deadline interval delta")
        elif "delta" not in bad and not delta > 0:
            errors.append(f"delta must be > 0, got {delta}")
        if algo in ("APTMC-1", "ABC-APTMC-1") and lam < 2:
            errors.append(f"{algo} needs at least two chains")
    if get("deadline", "fixed") not in ("fixed", "adaptive"):
        errors.append(f"deadline must be 'fixed' or 'adaptive', got {get('deadline')!r}")
    if get("statistic", "median") not in ("median", "mean"):
        errors.append(f"statistic must be 'median' or 'mean', got {get('statistic')!r}")
    tiers = ("single", "worker-pairs", "two-tier")
    if get("tiers", "single") not in tiers:
        errors.append(f"unknown tiers {get('tiers')!r}; {_suggest(get('tiers'), tiers)}")
    if get("record", "cold") not in ("cold", "all"):
        errors.append(f"record must be 'cold' or 'all', got {get('record')!r}")
    if get("repeats", 1) < 1:
        errors.append("repeats must be >= 1")
    if get("overhead", 0.0) < 0:
        errors.append("overhead must be >= 0")
    for name in ("exchange_every", "within_every"):
        v = get(name)
        if v is not None and v < 1:
            errors.append(f"{name} must be >= 1, got {v}")
    _check_ladder_size(d, lam, errors)


def _check_ladder_size(d, lam, errors):
    model = d.get("model") or {}
    exp = d.get("experiment")
    if exp == GAMMA:
        copies = model.get("copies", 1)
        if _is_int(copies) and copies >= 1 and lam % copies:
            errors.append(f"chains={lam} is not a multiple of model.copies={copies}")
    elif exp == LV:
        ladder = model.get("ladder")
        from ..abc.lotka_volterra import load_ladder

        if ladder == "none":
            if lam != 1:
                errors.append("model.ladder = 'none' runs a single chain")
            for name in ("eps", "variances"):
                if name not in model:
                    errors.append(f"model.{name} is required when model.ladder = 'none'")
        elif ladder in ("single", "multi"):
            n = len(load_ladder(ladder)[0])
            if n != lam:
                errors.append(f"model.ladder = {ladder!r} has {n} chains but chains={lam}")
        elif ladder is not None:
            errors.append(f"unknown model.ladder {ladder!r}; "
                          f"{_suggest(ladder, ('single', 'multi', 'none'))}")
        prior = model.get("prior")
        if prior not in (None, "exponential", "uniform"):
            errors.append(f"unknown model.prior {prior!r}; "
                          f"{_suggest(prior, ('exponential', 'uniform'))}")
        if prior == "uniform" and "prior_high" not in model:
            errors.append("model.prior_high is required for a uniform prior")


def validate_config(raw) -> ExperimentConfig:
    """Parse and check a configuration.

    Parameters
    ----------
    raw : str, dict or ExperimentConfig
        TOML text or an already parsed mapping. A ``base`` key names a
        preset whose fields are used as defaults.

    Raises
    ------
    ConfigError
        Listing every problem found.
    """
    if isinstance(raw, ExperimentConfig):
        raw = raw.to_dict()
    if isinstance(raw, str):
        try:
            raw = tomllib.loads(raw)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"cannot parse configuration: {exc}") from None
    d = dict(raw)
    base = d.pop("base", None)
    if base is not None:
        from .presets import get_preset

        merged = get_preset(base).to_dict()
        model = dict(merged["model"])
        model.update(d.pop("model", None) or {})
        merged.update(d)
        merged["model"] = model
        d = merged
    errors = []
    bad = _check_fields(d, errors)
    _check_cross(d, errors, bad)
    _check_model(d, errors)
    if errors:
        raise ConfigError(errors)
    d = {k: v for k, v in d.items() if k in _FIELDS}
    d["model"] = _canonical(d.get("model") or {})
    for name in ("budget", "burn_in", "overhead", "grace_period"):
        if name in d:
            d[name] = float(d[name])
    for name in ("delta", "paper_budget"):
        if d.get(name) is not None:
            d[name] = float(d[name])
    return ExperimentConfig(**d)


def _canonical(model: dict) -> dict:
    out = {}
    for k in sorted(model):
        v = model[k]
        out[k] = list(v) if isinstance(v, (list, tuple)) else v
    return out


def load_config(path) -> ExperimentConfig:
    """Read and validate a configuration file."""
    text = Path(path).read_text()
    return validate_config(text)


def dump_config(cfg: ExperimentConfig) -> str:
    """TOML text that :func:`validate_config` reads back to ``cfg``."""
    lines = []
    d = cfg.to_dict()
    model = d.pop("model")
    for k, v in d.items():
        if v is not None:
            lines.append(f"{k} = {_toml(v)}")
    lines.append("")
    lines.append("[model]")
    for k, v in model.items():
        lines.append(f"{k} = {_toml(v)}")
    return "\n".join(lines) + "\n"


def _toml(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml(x) for x in v) + "]"
    return str(v)


__all__ = ["ALGORITHMS", "EXPERIMENTS", "ExperimentConfig", "dump_config", "load_config",
           "validate_config"]
