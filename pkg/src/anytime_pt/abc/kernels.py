"""The 1-hit race kernel, the indicator exchange move and rejection ABC."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from ..exceptions import ConsistencyError
from ..tempering import apply_exchange
from .models import AbcChainState, AbcModel, TruncatedNormalProposal


def prior_check_log_prob(model: AbcModel, theta, theta_new) -> float:
    """Log of ``min(1, p(theta') q(theta | theta') / (p(theta) q(theta' | theta)))``."""
    lp_new = model.prior.logpdf(theta_new)
    if lp_new == -math.inf:
        return -math.inf
    log_a = lp_new - model.prior.logpdf(theta) + model.proposal.log_ratio(theta, theta_new)
    return min(0.0, log_a)


def one_hit_kernel(state: AbcChainState, model: AbcModel, rng: np.random.Generator,
                   checkpoint: Optional[Callable[[], None]] = None) -> AbcChainState:
    """One move of the 1-hit ABC-MCMC kernel.

    A proposal first passes a prior/proposal check. Datasets are then
    simulated under the current and proposed parameters, in that order,
    until either hits the ball. The proposal wins if its dataset hits,
    including ties; otherwise the chain keeps its parameter together with
    the fresh dataset that hit.

    Parameters
    ----------
    state : AbcChainState
        Its dataset must hit the model's ball.
    model : AbcModel
    rng : numpy.random.Generator
    checkpoint : callable, optional
        Called once per race iteration after both simulations. A scheduler
        uses it to run exchange epochs while this move is in progress.

    Returns
    -------
    AbcChainState
        With ``work`` set to the simulation work spent on this move.
    """
    theta_new = model.proposal.sample(state.theta, rng)
    log_a = prior_check_log_prob(model, state.theta, theta_new)
    if log_a == -math.inf or (log_a < 0 and math.log(rng.random()) >= log_a):
        return AbcChainState(state.theta, state.x, 0.0, False)
    work = 0.0
    while True:
        x, w = model.simulate(state.theta, rng, model.y, model.eps)
        x_new, w_new = model.simulate(theta_new, rng, model.y, model.eps)
        work += w + w_new
        hit = model.hit(x)
        hit_new = model.hit(x_new)
        if checkpoint is not None:
            checkpoint()
        if hit_new:
            return AbcChainState(theta_new, x_new, work, True)
        if hit:
            return AbcChainState(state.theta, x, work, False)


def swap_indicator(cold: AbcChainState, warm: AbcChainState, cold_model: AbcModel,
                   warm_model: AbcModel) -> bool:
    """Whether the warmer chain's dataset also hits the colder ball."""
    if cold_model.eps > warm_model.eps:
        raise ValueError("the first chain must be the colder one (smaller eps)")
    if not cold_model.hit(cold.x):
        raise ConsistencyError("colder chain's dataset misses its own ball")
    if not warm_model.hit(warm.x):
        raise ConsistencyError("warmer chain's dataset misses its own ball")
    return cold_model.hit(warm.x)


def abc_exchange(pair, cold_model: AbcModel, warm_model: AbcModel, rng=None):
    """Exchange move between a colder and a warmer ABC chain.

    Parameters
    ----------
    pair : tuple of ChainState
        ``(colder, warmer)``; their values are :class:`AbcChainState`.
    cold_model, warm_model : AbcModel
        Models carrying the two radii, ``cold_model.eps <= warm_model.eps``.
    rng : ignored
        The move is deterministic given the states.

    Returns
    -------
    tuple of ChainState
        Swapped if the warmer dataset hits the colder ball. Both counters
        advance.
    """
    accept = swap_indicator(pair[0].value, pair[1].value, cold_model, warm_model)
    return apply_exchange(pair, accept)


@dataclass
class RejectionResult:
    samples: np.ndarray
    n_draws: int

    @property
    def acceptance_rate(self) -> float:
        return len(self.samples) / self.n_draws


def abc_rejection_sampler(model: AbcModel, n_draws: int, rng: np.random.Generator) -> RejectionResult:
    """Rejection ABC: keep prior draws whose simulated data hit the ball."""
    kept = []
    for _ in range(n_draws):
        theta = np.asarray(model.prior.sample(rng), dtype=float)
        x, _ = model.simulate(theta, rng, model.y, model.eps)
        if model.hit(x):
            kept.append(theta)
    dim = np.size(model.prior.sample(np.random.default_rng(0)))
    samples = np.array(kept, dtype=float).reshape(-1, dim)
    return RejectionResult(samples, n_draws)


def initial_state(model: AbcModel, theta, rng: np.random.Generator,
                  max_tries: int = 10**6) -> AbcChainState:
    """Simulate at a fixed parameter until a dataset hits the ball."""
    theta = np.asarray(theta, dtype=float)
    work = 0.0
    for _ in range(max_tries):
        x, w = model.simulate(theta, rng, model.y, model.eps)
        work += w
        if model.hit(x):
            return AbcChainState(theta, x, work)
    raise RuntimeError(f"no dataset hit the ball of radius {model.eps} "
                       f"in {max_tries} simulations")


class AbcFamily:
    """A ladder of ABC targets that differ in radius and proposal scale.

    Chains are ordered coldest first: position 0 has the smallest radius.
    """

    def __init__(self, model: AbcModel, eps: Sequence[float],
                 proposals: Sequence[TruncatedNormalProposal],
                 names: Sequence[str] = None):
        eps = [float(e) for e in eps]
        if any(b < a for a, b in zip(eps, eps[1:])):
            raise ValueError("radii must be listed coldest (smallest) first")
        if len(proposals) != len(eps):
            raise ValueError("one proposal per radius is required")
        self.eps = eps
        self.models = [model.with_(eps=e, proposal=q) for e, q in zip(eps, proposals)]
        dim = len(np.atleast_1d(proposals[0].scale))
        self.columns = tuple(names) if names else tuple(
            "theta" if dim == 1 else f"theta{i + 1}" for i in range(dim))

    @property
    def n_chains(self) -> int:
        return len(self.models)

    def cold_chains(self) -> list:
        return [i for i, e in enumerate(self.eps) if e == self.eps[0]]

    def local_move(self, i: int, state: AbcChainState, rng, checkpoint=None):
        return one_hit_kernel(state, self.models[i], rng, checkpoint)

    def exchange(self, i: int, k: int, si: AbcChainState, sk: AbcChainState, rng) -> bool:
        if self.eps[i] <= self.eps[k]:
            return swap_indicator(si, sk, self.models[i], self.models[k])
        return swap_indicator(sk, si, self.models[k], self.models[i])

    def record(self, state: AbcChainState):
        return tuple(float(v) for v in state.theta)

    def check(self, i: int, state: AbcChainState) -> None:
        if not self.models[i].hit(state.x):
            raise ConsistencyError(f"chain {i + 1} holds a dataset outside its ball")
