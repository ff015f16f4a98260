"""Autocorrelation, integrated autocorrelation time and effective sample size."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

SOKAL = "sokal"
LITERAL = "literal"


@dataclass(frozen=True)
class AcfEstimate:
    """Autocorrelation at lags ``0..max_lag``.

    ``degenerate`` is set when a series has zero variance, in which case the
    values beyond lag 0 are reported as zero.
    """

    values: np.ndarray
    n_chains: int = 1
    degenerate: bool = False

    @property
    def lags(self) -> np.ndarray:
        return np.arange(len(self.values))

    @property
    def max_lag(self) -> int:
        return len(self.values) - 1


def _acf_direct(x, max_lag):
    n = len(x)
    d = x - x.mean()
    c0 = d @ d / n
    out = np.empty(max_lag + 1)
    for lag in range(max_lag + 1):
        out[lag] = d[: n - lag] @ d[lag:] / n
    return out / c0


def _acf_fft(x, max_lag):
    n = len(x)
    d = x - x.mean()
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(d, size)
    acov = np.fft.irfft(f * np.conj(f), size)[: max_lag + 1] / n
    return acov / acov[0]


def autocorrelation(series, max_lag: int = None, method: str = "fft") -> AcfEstimate:
    """Biased sample autocorrelation, averaged over chains if several are given.

    Parameters
    ----------
    series : array_like
        A 1-D series, or a sequence of 1-D series whose acfs are averaged.
    max_lag : int, optional
        Largest lag; defaults to the shortest length minus one.
    method : {"fft", "direct"}
        Both normalise the lag-``l`` sum by the series length ``N``.
    """
    if isinstance(series, np.ndarray) and series.ndim == 1:
        chains = [series]
    else:
        chains = [np.asarray(s, dtype=float) for s in series]
    if not chains or any(c.ndim != 1 for c in chains):
        raise ValueError("series must be one or more 1-D arrays")
    shortest = min(len(c) for c in chains)
    if max_lag is None:
        max_lag = shortest - 1
    if not 0 <= max_lag < shortest:
        raise ValueError(f"max_lag={max_lag} needs series longer than {max_lag}")
    fn = {"fft": _acf_fft, "direct": _acf_direct}[method]
    total = np.zeros(max_lag + 1)
    degenerate = False
    for c in chains:
        c = np.asarray(c, dtype=float)
        if np.ptp(c) == 0:
            degenerate = True
            rho = np.zeros(max_lag + 1)
            rho[0] = 1.0
        else:
            rho = fn(c, max_lag)
        total += rho
    return AcfEstimate(total / len(chains), len(chains), degenerate)


@dataclass(frozen=True)
class IatEstimate:
    """Integrated autocorrelation time with the window that produced it."""

    value: float
    window: int
    rule: str
    converged: bool

    def __float__(self):
        return self.value


def iat(acf: AcfEstimate, c: float = 6.0, rule: str = SOKAL) -> IatEstimate:
    """Integrated autocorrelation time ``1 + 2 sum_{l=1}^{M} rho(l)``.

    Parameters
    ----------
    acf : AcfEstimate
    c : float
        Window constant.
    rule : {"sokal", "literal"}
        ``"sokal"`` picks the smallest ``M`` with ``M >= c * tau(M)``, where
        ``tau(M)`` is the running estimate. ``"literal"`` picks the smallest
        ``M`` with ``M >= c * rho(M)``, which never exceeds ``ceil(c)`` and so
        underestimates strongly correlated chains.

    Returns
    -------
    IatEstimate
        Floored at 1. ``converged`` is False when no lag satisfied the rule.
        The window is then the lag with the largest running estimate, since
        the biased acf summed over every lag always gives ``tau = 0``.
    """
    rho = np.asarray(acf.values, dtype=float)
    lags = np.arange(len(rho))
    tau = 1.0 + 2.0 * np.cumsum(rho) - 2.0 * rho[0]
    if rule == SOKAL:
        ok = lags[1:] >= c * tau[1:]
    elif rule == LITERAL:
        ok = lags[1:] >= c * rho[1:]
    else:
        raise ValueError(f"unknown window rule {rule!r}")
    if len(rho) == 1:
        return IatEstimate(1.0, 0, rule, False)
    hits = np.flatnonzero(ok)
    converged = hits.size > 0
    window = int(hits[0]) + 1 if converged else int(np.argmax(tau[1:])) + 1
    return IatEstimate(max(1.0, float(tau[window])), window, rule, converged)


def ess(n: int, iat_value) -> float:
    """Effective sample size ``n / IAT``."""
    value = float(iat_value)
    if value < 1.0 or n < 1:
        raise ValueError("ess needs n >= 1 and IAT >= 1")
    return n / value


@dataclass
class ParameterDiagnostics:
    name: str
    iat: float
    ess: float
    n: int
    window: int
    converged: bool
    run_ess: list = field(default_factory=list)


@dataclass
class DiagnosticsReport:
    """Per-parameter IAT and cumulative ESS across one or more runs."""

    parameters: list
    n_runs: int
    rule: str
    c: float
    extra: dict = field(default_factory=dict)

    def __getitem__(self, name) -> ParameterDiagnostics:
        for p in self.parameters:
            if p.name == name:
                return p
        raise KeyError(name)

    @property
    def warnings(self) -> list:
        return [f"IAT window not reached for {p.name}" for p in self.parameters
                if not p.converged]

    def to_dict(self) -> dict:
        out = asdict(self)
        out["warnings"] = self.warnings
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, default=_jsonable)


def _jsonable(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def aggregate_runs(runs: Sequence, names: Sequence[str] = None, c: float = 6.0,
                   rule: str = SOKAL, max_lag: int = None) -> DiagnosticsReport:
    """Diagnostics pooled over repeat runs.

    The acf of each parameter is averaged over runs, a single IAT is
    computed from the average, and the per-run ESS values ``N_r / IAT`` are
    summed.

    Parameters
    ----------
    runs : sequence of array_like
        Each run is an ``(N_r,)`` or ``(N_r, d)`` array of samples.
    names : sequence of str, optional
        Parameter names; defaults to ``x0, x1, ...``.
    """
    arrays = []
    for r in runs:
        a = np.asarray(r, dtype=float)
        arrays.append(a[:, None] if a.ndim == 1 else a)
    if not arrays:
        raise ValueError("aggregate_runs needs at least one run")
    dims = {a.shape[1] for a in arrays}
    if len(dims) != 1:
        raise ValueError(f"runs have mismatched dimensions {sorted(dims)}")
    d = dims.pop()
    names = list(names) if names is not None else [f"x{i}" for i in range(d)]
    if len(names) != d:
        raise ValueError(f"{len(names)} names for {d} parameters")
    params = []
    for i, name in enumerate(names):
        acf = autocorrelation([a[:, i] for a in arrays], max_lag=max_lag)
        est = iat(acf, c=c, rule=rule)
        run_ess = [len(a) / est.value for a in arrays]
        params.append(ParameterDiagnostics(name, est.value, float(sum(run_ess)),
                                           int(sum(len(a) for a in arrays)),
                                           est.window, est.converged, run_ess))
    return DiagnosticsReport(params, len(arrays), rule, c)


def density_distance(samples, edges, reference) -> float:
    """Total variation distance between a histogram and a reference density.

    Parameters
    ----------
    samples : array_like
        1-D samples.
    edges : array_like
        Bin edges of the comparison grid.
    reference : callable or array_like
        Reference density, either a function or its values at the bin
        centres. It should integrate to one over the grid.

    Returns
    -------
    float
        ``0.5 * sum |p_hat - p| dx`` over the grid, plus half the fraction
        of samples that fall outside it.
    """
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("density_distance needs at least one sample")
    edges = np.asarray(edges, dtype=float)
    widths = np.diff(edges)
    centres = 0.5 * (edges[:-1] + edges[1:])
    p = reference(centres) if callable(reference) else np.asarray(reference, dtype=float)
    counts, _ = np.histogram(x, bins=edges)
    p_hat = counts / (x.size * widths)
    outside = 1.0 - counts.sum() / x.size
    return 0.5 * float(np.sum(np.abs(p_hat - p) * widths)) + 0.5 * outside


def reference_on_grid(edges, cdf) -> np.ndarray:
    """Bin-averaged density from a cdf, normalised over the grid."""
    edges = np.asarray(edges, dtype=float)
    mass = np.diff(cdf(edges))
    return mass / mass.sum() / np.diff(edges)


def peak_density(samples, edges) -> float:
    """Height of the tallest histogram bin."""
    counts, _ = np.histogram(np.asarray(samples, dtype=float), bins=edges)
    return float((counts / (len(samples) * np.diff(edges))).max())
