"""Iterative water-filling simulator for multi-user interference networks.

Static network data lives in :mod:`iwfsim.network`, the water-filling best
response in :mod:`iwfsim.waterfill`, estimation-error generators in
:mod:`iwfsim.noise`, the iteration engines in :mod:`iwfsim.algorithms`,
convergence machinery in :mod:`iwfsim.analysis`, canned studies in
:mod:`iwfsim.experiments`, and the command line in :mod:`iwfsim.cli`.
"""

from iwfsim.network import (
    FEASIBILITY_TOL,
    NetworkModel,
    PowerProfile,
    normalized_cross_gain,
    rate,
    sinr,
    true_ipn,
    true_ipn_all,
)
from iwfsim.waterfill import (
    WaterFillResult,
    best_response,
    noisy_best_response,
    stacked_operator,
    water_level_solve,
)
from iwfsim.noise import ErrorSample, NoiseModel, make_generator, sample, variance_from_ier
from iwfsim.algorithms import (
    Algorithm,
    RunTrace,
    StepSizeSchedule,
    aiwf_step,
    iwf_step,
    riwf_step,
    run,
)
from iwfsim.analysis import (
    ContractionCertificate,
    ConvergenceVerdict,
    GainMatrix,
    build_gain_matrix,
    contraction_certificate,
    detect_convergence,
    spectral_radius,
    weight_vector,
    weighted_block_max_norm,
    weighted_max_matrix_norm,
)
from iwfsim.experiments import (
    BiasStudyResult,
    Scenario,
    bias_study,
    lemma4_recursion,
    random_weak_network,
    scenario_strong_interference_a,
    scenario_strong_interference_b,
)

__all__ = [
    "FEASIBILITY_TOL",
    "NetworkModel",
    "PowerProfile",
    "normalized_cross_gain",
    "true_ipn",
    "true_ipn_all",
    "sinr",
    "rate",
    "WaterFillResult",
    "water_level_solve",
    "best_response",
    "noisy_best_response",
    "stacked_operator",
    "NoiseModel",
    "ErrorSample",
    "make_generator",
    "variance_from_ier",
    "sample",
    "StepSizeSchedule",
    "Algorithm",
    "RunTrace",
    "iwf_step",
    "riwf_step",
    "aiwf_step",
    "run",
    "GainMatrix",
    "ContractionCertificate",
    "ConvergenceVerdict",
    "build_gain_matrix",
    "spectral_radius",
    "weight_vector",
    "weighted_block_max_norm",
    "weighted_max_matrix_norm",
    "contraction_certificate",
    "detect_convergence",
    "Scenario",
    "BiasStudyResult",
    "scenario_strong_interference_a",
    "scenario_strong_interference_b",
    "random_weak_network",
    "bias_study",
    "lemma4_recursion",
]
