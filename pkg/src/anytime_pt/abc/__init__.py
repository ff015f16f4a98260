"""Approximate Bayesian computation: kernels, models and data."""

from .kernels import (AbcFamily, RejectionResult, abc_exchange, abc_rejection_sampler,
                      initial_state, one_hit_kernel, prior_check_log_prob, swap_indicator)
from .lotka_volterra import (LotkaVolterraState, gillespie_simulate, load_ladder,
                             load_observations, lv_hits_ball, lv_model, lv_total_rate)
from .models import (AbcChainState, AbcModel, ExponentialPrior, NormalPrior,
                     TruncatedNormalProposal, UniformPrior)
from .normal import (GridDensity, normal_abc_likelihood, normal_abc_model,
                     quadrature_abc_posterior)

__all__ = [
    "AbcChainState", "AbcFamily", "AbcModel", "ExponentialPrior", "GridDensity",
    "LotkaVolterraState", "NormalPrior", "RejectionResult", "TruncatedNormalProposal",
    "UniformPrior", "abc_exchange", "abc_rejection_sampler", "gillespie_simulate",
    "initial_state", "load_ladder", "load_observations", "lv_hits_ball", "lv_model",
    "lv_total_rate", "normal_abc_likelihood", "normal_abc_model", "one_hit_kernel",
    "prior_check_log_prob", "quadrature_abc_posterior", "swap_indicator",
]
