"""Diffusion-scale analysis of stochastic gradient (Langevin) descent on 1-D GLMs.

The package simulates rescaled SG(L)D iterate paths, their Ornstein-Uhlenbeck
limit, estimates distances between the two, and evaluates explicit error bounds.
"""
__version__ = "0.1.0"

from .models import (ConvergenceError, Family, GlmModel, ModelConstants, ModelError, NoCriticalPointError,
                     fit_critical_point, gradient, gradients, linearized_gradient, model_constants)
from .sgld import (AlgoConfig, BatchDraw, IterateOverflowError, PathEnsemble, SgldGenerator, eta_closed_form,
                   exchangeable_pair, make_ensemble, q_product, rescale, run_linearized, run_sgld)
from .ou import (MaxIneqSpec, OuGenerator, OuParams, coupled_ou_pair, discretized_ou, limit_params, max_ineq_grid,
                 max_ineq_rhs, maximal_inequality_experiment, ou_covariance, ou_to_ou_gap_mc, simulate_ou_exact)
from .functionals import (DistanceEstimate, GridMismatchError, PathFunctional, UncertifiedFunctionalError,
                          bounded_wasserstein_lower, functional_gap, g1, g2, levy_prokhorov_estimate,
                          ou_average_variance, variance_gap)
from .bounds import (BoundBreakdown, BoundInputError, BoundInputs, eps_components, general_simplified_bound,
                     metric_rate_exponents, ou_kappa, ou_to_ou_bound, simplified_rate)
from .data import SynthSpec, synth_data
from .studies import check_assumptions, rate_configs, rate_study, tau_q

__all__ = [n for n in dir() if not n.startswith("_")]
