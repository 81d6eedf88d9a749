"""Covert communication over generalized Gaussian noise.

Closed-form divergences and covertness budgets for N_p(0, alpha^p) noise, the
self-decomposable covert input law, whitening of Gaussian noise with memory,
and a seeded Monte Carlo harness for random coding and warden tests.
"""

from .budget import BudgetResult, BudgetSpec, L_theoretical, gamma_achievable, gamma_converse_max
from .colored import CodeTransport, ColoredNoiseModel, ar1_model, whiten
from .decomp import DecompositionSpec, decompose, draw_input, sample_input
from .errors import (CovertError, DecompositionError, ParameterError, QuadratureError,
                     TransportError, UnsupportedShapeError)
from .ggdist import GGParams, entropy, kl_gg, kl_numeric, sample
from .simkit import CodingExperiment, ExperimentResult, estimate_rate, run_experiment, warden_test

__version__ = "0.1.0"

__all__ = [
    "BudgetResult", "BudgetSpec", "CodeTransport", "CodingExperiment", "ColoredNoiseModel",
    "CovertError", "DecompositionError", "DecompositionSpec", "ExperimentResult", "GGParams",
    "L_theoretical", "ParameterError", "QuadratureError", "TransportError", "UnsupportedShapeError",
    "ar1_model", "decompose", "draw_input", "entropy", "estimate_rate", "gamma_achievable",
    "gamma_converse_max", "kl_gg", "kl_numeric", "run_experiment", "sample", "sample_input",
    "warden_test", "whiten",
]
