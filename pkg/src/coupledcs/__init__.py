"""Bayes-optimal MSE analysis of compressed sensing with spatially-coupled
row-orthogonal (subsampled DFT) and i.i.d. Gaussian measurement ensembles."""

__version__ = "0.1.0"

from .coupling import SeedingParams, build_seeding_spec, overall_rate, spec_from_json, spec_to_json
from .errors import ConvergenceError, QuadratureError
from .measurement_ops import (CoupledOperator, adjoint_apply, apply, build_coupled_operator,
                              dense_materialize, gen_instance, sample_signal)
from .phase_analysis import (FreeEntropyCurve, NoTransitionError, PhasePoint, bp_mse_at,
                             find_alpha_c, find_alpha_d, find_alpha_s, scan_curve,
                             sharp_window_exists, sweep_phase_diagram)
from .replica_core import (ConjugateState, CouplingSpec, Ensemble, channel_term,
                           conjugate_fixed_point, free_entropy, free_entropy_grid, g_gauss,
                           g_orth, single_block_spec)
from .scalar_channel import BernoulliGaussianPrior, ScalarChannel, mmse, mmse_mc_oracle, posterior_mean
from .state_evolution import (EvolutionTrace, good_mse_reached, iterations_to_good_mse,
                              run_evolution, se_step)

__all__ = [
    "BernoulliGaussianPrior", "ScalarChannel", "posterior_mean", "mmse", "mmse_mc_oracle",
    "CouplingSpec", "ConjugateState", "Ensemble", "channel_term", "g_orth", "g_gauss",
    "conjugate_fixed_point", "free_entropy", "free_entropy_grid", "single_block_spec",
    "EvolutionTrace", "se_step", "run_evolution", "good_mse_reached", "iterations_to_good_mse",
    "FreeEntropyCurve", "PhasePoint", "NoTransitionError", "scan_curve", "find_alpha_d",
    "find_alpha_s", "find_alpha_c", "bp_mse_at", "sweep_phase_diagram", "sharp_window_exists",
    "SeedingParams", "build_seeding_spec", "overall_rate", "spec_to_json", "spec_from_json",
    "CoupledOperator", "sample_signal", "build_coupled_operator", "apply", "adjoint_apply",
    "dense_materialize", "gen_instance",
    "QuadratureError", "ConvergenceError",
]
