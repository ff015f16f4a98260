"""Priors, proposals and the ABC model container."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
from scipy import special


class ExponentialPrior:
    """Independent unit-rate exponentials, ``p(theta) = exp(-sum(theta))`` on ``theta >= 0``."""

    def __init__(self, dim: int, rate: float = 1.0):
        self.dim = dim
        self.rate = float(rate)

    def logpdf(self, theta) -> float:
        theta = np.asarray(theta, dtype=float)
        if np.any(theta < 0):
            return -math.inf
        return float(self.dim * math.log(self.rate) - self.rate * theta.sum())

    def sample(self, rng, size=None):
        shape = (self.dim,) if size is None else (size, self.dim)
        return rng.exponential(1.0 / self.rate, shape)


class UniformPrior:
    """Uniform on the box ``[low, high]``."""

    def __init__(self, low, high):
        self.low = np.asarray(low, dtype=float)
        self.high = np.asarray(high, dtype=float)
        if np.any(self.high <= self.low):
            raise ValueError("uniform prior needs high > low")
        self._log_vol = float(np.log(self.high - self.low).sum())

    @property
    def dim(self) -> int:
        return self.low.size

    def logpdf(self, theta) -> float:
        theta = np.asarray(theta, dtype=float)
        if np.any(theta < self.low) or np.any(theta > self.high):
            return -math.inf
        return -self._log_vol

    def sample(self, rng, size=None):
        shape = (self.dim,) if size is None else (size, self.dim)
        return rng.uniform(self.low, self.high, shape)


class NormalPrior:
    """Univariate normal prior parameterised by its variance."""

    def __init__(self, mean: float, var: float):
        self.mean = float(mean)
        self.var = float(var)
        self.dim = 1

    def logpdf(self, theta) -> float:
        t = float(np.asarray(theta).reshape(-1)[0])
        return -0.5 * ((t - self.mean) ** 2 / self.var + math.log(2 * math.pi * self.var))

    def pdf(self, t):
        t = np.asarray(t, dtype=float)
        return np.exp(-0.5 * (t - self.mean) ** 2 / self.var) / math.sqrt(2 * math.pi * self.var)

    def sample(self, rng, size=None):
        shape = (1,) if size is None else (size, 1)
        return rng.normal(self.mean, math.sqrt(self.var), shape)


class TruncatedNormalProposal:
    """Gaussian random walk with diagonal covariance, truncated to a box.

    Parameters
    ----------
    variances : array_like
        Diagonal of the covariance matrix.
    low, high : array_like or float
        Truncation bounds; infinite bounds give an untruncated walk.
    """

    def __init__(self, variances, low=-np.inf, high=np.inf):
        self.scale = np.sqrt(np.asarray(variances, dtype=float))
        self.low = np.broadcast_to(np.asarray(low, dtype=float), self.scale.shape).copy()
        self.high = np.broadcast_to(np.asarray(high, dtype=float), self.scale.shape).copy()
        if np.any(self.scale <= 0):
            raise ValueError("proposal variances must be positive")
        if np.any(self.high <= self.low):
            raise ValueError("proposal bounds need high > low")
        self.truncated = bool(np.isfinite(self.low).any() or np.isfinite(self.high).any())

    def sample(self, theta, rng):
        theta = np.asarray(theta, dtype=float)
        if not self.truncated:
            return theta + self.scale * rng.standard_normal(theta.shape)
        a = (self.low - theta) / self.scale
        b = (self.high - theta) / self.scale
        u = rng.random(theta.shape)
        upper = a > 0
        # sample in whichever tail keeps the cdf values away from 1
        lo = np.where(upper, special.ndtr(-b), special.ndtr(a))
        hi = np.where(upper, special.ndtr(-a), special.ndtr(b))
        p = lo + u * (hi - lo)
        z = np.where(upper, -special.ndtri(p), special.ndtri(p))
        z = np.clip(z, a, b)
        out = theta + self.scale * z
        return np.clip(out, np.nextafter(self.low, np.inf), np.nextafter(self.high, -np.inf))

    def _log_mass(self, theta):
        a = (self.low - theta) / self.scale
        b = (self.high - theta) / self.scale
        return np.log(special.ndtr(b) - special.ndtr(a))

    def log_ratio(self, theta, theta_new) -> float:
        """``log q(theta | theta_new) - log q(theta_new | theta)``.

        The Gaussian kernels cancel, leaving the ratio of truncation masses.
        """
        if not self.truncated:
            return 0.0
        return float(np.sum(self._log_mass(np.asarray(theta, dtype=float))
                            - self._log_mass(np.asarray(theta_new, dtype=float))))


@dataclass(frozen=True)
class AbcModel:
    """Everything the ABC kernels need about one target.

    Attributes
    ----------
    prior
        Object with ``logpdf(theta)`` and ``sample(rng, size=None)``.
    proposal : TruncatedNormalProposal
    simulate : callable
        ``simulate(theta, rng, y, eps) -> (x, work)``. A simulator may
        return ``x = None`` once it knows the dataset cannot hit the ball.
        ``work`` counts units of computation, used to emulate hold times.
    hits : callable
        ``hits(x, y, eps) -> bool``, monotone in ``eps``.
    y : object
        Observed data.
    eps : float
        Ball radius.
    """

    prior: object
    proposal: TruncatedNormalProposal
    simulate: Callable
    hits: Callable
    y: object
    eps: float

    def with_(self, **changes) -> "AbcModel":
        return replace(self, **changes)

    def hit(self, x) -> bool:
        return x is not None and bool(self.hits(x, self.y, self.eps))


class AbcChainState:
    """Parameter, last dataset that hit the ball, and work spent producing it."""

    __slots__ = ("theta", "x", "work", "accepted")

    def __init__(self, theta, x, work: float = 0.0, accepted: bool = False):
        self.theta = np.asarray(theta, dtype=float)
        self.x = x
        self.work = work
        self.accepted = accepted

    def __repr__(self):
        return f"AbcChainState(theta={self.theta!r}, work={self.work})"
