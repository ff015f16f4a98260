"""Univariate Normal model whose ABC likelihood is available in closed form."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from ..anytime import _quad
from ..diagnostics import reference_on_grid
from .models import AbcModel, NormalPrior, TruncatedNormalProposal


def normal_abc_likelihood(theta, y: float, sigma: float, eps: float):
    """Probability that ``x ~ N(theta, sigma**2)`` lands within ``eps`` of ``y``."""
    if sigma <= 0 or eps <= 0:
        raise ValueError("sigma and eps must be positive")
    # the distance form keeps both cdf values in the lower tail
    d = np.abs(np.asarray(theta, dtype=float) - y)
    out = special.ndtr((eps - d) / sigma) - special.ndtr((-eps - d) / sigma)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class GridDensity:
    """A density tabulated on an increasing grid."""

    grid: np.ndarray
    density: np.ndarray

    def pdf(self, x):
        return np.interp(x, self.grid, self.density, left=0.0, right=0.0)

    def cdf(self, x):
        steps = np.diff(self.grid) * 0.5 * (self.density[1:] + self.density[:-1])
        cum = np.concatenate([[0.0], np.cumsum(steps)])
        return np.interp(x, self.grid, cum, left=0.0, right=1.0)

    def integral(self) -> float:
        return float(np.trapezoid(self.density, self.grid))

    def mean(self) -> float:
        return float(np.trapezoid(self.grid * self.density, self.grid))

    def var(self) -> float:
        m = self.mean()
        return float(np.trapezoid((self.grid - m) ** 2 * self.density, self.grid))

    def peak(self) -> float:
        return float(self.density.max())

    def on_bins(self, edges) -> np.ndarray:
        """Bin-averaged density over ``edges``, for histogram comparisons."""
        return reference_on_grid(edges, self.cdf)


def quadrature_abc_posterior(y: float, sigma: float, eps: float, prior: NormalPrior,
                             grid=None) -> GridDensity:
    """ABC posterior ``p(theta) f_eps(y | theta)`` normalised on a grid.

    The default grid spans ten prior standard deviations either side of the
    prior mean. The normaliser is also computed by adaptive quadrature over
    the real line as a convergence check.
    """
    if grid is None:
        half = 10.0 * math.sqrt(prior.var) + abs(y) + eps
        grid = np.linspace(prior.mean - half, prior.mean + half, 40001)
    grid = np.asarray(grid, dtype=float)
    unnorm = prior.pdf(grid) * normal_abc_likelihood(grid, y, sigma, eps)
    z_grid = np.trapezoid(unnorm, grid)
    z_quad = _quad(lambda t: float(prior.pdf(t)) * normal_abc_likelihood(t, y, sigma, eps),
                   -math.inf, math.inf)
    if not math.isclose(z_grid, z_quad, rel_tol=1e-6):
        raise ArithmeticError(f"grid normaliser {z_grid} disagrees with quadrature {z_quad}")
    return GridDensity(grid, unnorm / z_grid)


def normal_abc_model(y: float, sigma: float, eps: float, prior: NormalPrior,
                     step_sd: float) -> AbcModel:
    """ABC model for ``x ~ N(theta, sigma**2)`` with ball ``|x - y| <= eps``."""

    def simulate(theta, rng, y_obs, radius):
        return theta[0] + sigma * rng.standard_normal(), 1.0

    def hits(x, y_obs, radius):
        return abs(x - y_obs) <= radius

    proposal = TruncatedNormalProposal([step_sd ** 2])
    return AbcModel(prior, proposal, simulate, hits, float(y), float(eps))
