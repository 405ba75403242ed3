"""Differentially private rank aggregation from pairwise comparisons."""

from .baselines import count_scores, fit_laplace_baseline
from .data import (KIND_ADRR, KIND_LAPLACE, KIND_RAW, KIND_RR, MECH_ADRR,
                   MECH_CLASSIC_RR, MECH_LAPLACE, PairwiseDataset,
                   centered_uniform_preferences, equally_spaced_preferences,
                   generate, intransitivity_report, load_choice_csv, load_csv,
                   privatize, write_csv)
from .estimator import (ConvergenceError, Estimate, EstimatorConfig,
                        default_lambda, fit, gradient, hessian,
                        hessian_min_nonzero_eigenvalue, objective)
from .experiments import (DatasetNotInstalledError, RankReport, RealDataReport,
                          ScenarioSpec, paired_t_test, real_data_pipeline,
                          run_scenario, scheme_epsilon, write_real_data_report,
                          write_report)
from .extensions import (MixedEffectsEstimate, budget_check, fit_mixed_effects,
                         mixed_effects_objective, select_model)
from .mechanisms import (PrivacyProfile, adaptive_weights, central_dp_epsilon,
                         debias, debias_variance, flip_probability,
                         laplace_perturb, load_profile_csv, randomized_response,
                         retention, write_profile_csv)
from .metrics import kendall, rank_of, spearman_footrule, topk_hamming
from .models import BTL, DT, TM, ComparisonModel

__version__ = "0.1.0"

__all__ = [
    "BTL", "TM", "DT", "ComparisonModel",
    "PrivacyProfile", "flip_probability", "retention", "randomized_response",
    "debias", "debias_variance", "adaptive_weights", "laplace_perturb",
    "central_dp_epsilon", "load_profile_csv", "write_profile_csv",
    "PairwiseDataset", "KIND_RAW", "KIND_RR", "KIND_ADRR", "KIND_LAPLACE",
    "MECH_CLASSIC_RR", "MECH_ADRR", "MECH_LAPLACE",
    "centered_uniform_preferences", "equally_spaced_preferences", "generate",
    "privatize", "intransitivity_report", "load_csv", "write_csv", "load_choice_csv",
    "EstimatorConfig", "Estimate", "ConvergenceError", "objective", "gradient",
    "fit", "default_lambda", "hessian", "hessian_min_nonzero_eigenvalue",
    "rank_of", "topk_hamming", "kendall", "spearman_footrule",
    "count_scores", "fit_laplace_baseline",
    "MixedEffectsEstimate", "fit_mixed_effects", "mixed_effects_objective",
    "select_model", "budget_check",
    "ScenarioSpec", "RankReport", "RealDataReport", "run_scenario",
    "paired_t_test", "real_data_pipeline", "scheme_epsilon",
    "write_report", "write_real_data_report", "DatasetNotInstalledError",
]
