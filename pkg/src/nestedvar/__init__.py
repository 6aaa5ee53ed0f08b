"""Nested, multilevel and adaptively refined stochastic approximation of value-at-risk."""
from ._validation import ConfigurationError, DegenerateInputError, UnsupportedModelError
from .estimators import VaREstimator
from .models import NestedLossModel, OptionModel, SwapModel, model_from_config, par_nominal
from .numerics import (BiasLadder, PowerLawFit, SaturationSchedule, StepSchedule, bias_at,
                       fit_loglog, inv_norm_cdf, norm_cdf, saturation, standard_normal, step)
from .planning import (LevelPlan, plan_iterations_admlsa, plan_iterations_mlsa,
                       plan_iterations_single, plan_levels_adaptive, plan_levels_mlsa)
from .refinement import (Framework, RefinementConfig, RefinementOutcome, heuristic_parameters,
                         psi, refine_adaptively, refinement_budget)
from .sampler import (CoupledPair, RefinableEstimate, empirical_std, refine_once,
                      sample_coupled_pair, sample_estimate)
from .schemes import (SchemeConfig, SchemeRun, run_admlsa, run_adnsa, run_mlsa, run_nsa, run_sa,
                      update_H)
from .streams import stream

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError", "DegenerateInputError", "UnsupportedModelError",
    "NestedLossModel", "OptionModel", "SwapModel", "model_from_config", "par_nominal",
    "BiasLadder", "PowerLawFit", "SaturationSchedule", "StepSchedule", "bias_at", "fit_loglog",
    "inv_norm_cdf", "norm_cdf", "saturation", "standard_normal", "step",
    "LevelPlan", "plan_iterations_admlsa", "plan_iterations_mlsa", "plan_iterations_single",
    "plan_levels_adaptive", "plan_levels_mlsa",
    "Framework", "RefinementConfig", "RefinementOutcome", "heuristic_parameters", "psi",
    "refine_adaptively", "refinement_budget",
    "CoupledPair", "RefinableEstimate", "empirical_std", "refine_once", "sample_coupled_pair",
    "sample_estimate",
    "SchemeConfig", "SchemeRun", "run_admlsa", "run_adnsa", "run_mlsa", "run_nsa", "run_sa",
    "update_H", "stream", "VaREstimator",
]
