"""Empirical-Bayes multiple testing for sparse Gaussian sequences.

Local-fdr ("ell"), cumulative local-fdr ("cl") and q-value procedures on the
two-group Gaussian/quasi-Cauchy mixture, with a marginal-likelihood fit of
the mixing weight, a deterministic theory oracle for the concentration
proxies, and a reproducible Monte Carlo harness.
"""

from . import mixture, theory
from .estimator import (
    PosteriorSummaries,
    WeightEstimate,
    ell_values,
    estimate_w,
    log_likelihood,
    q_values,
    score,
)
from .procedures import (
    AnalysisResult,
    Decision,
    analyze,
    cl_procedure,
    ell_procedure,
    lambda_hat,
    post_fdr,
    q_procedure,
)
from .simulate import (
    SignalConfig,
    SimulationReport,
    bfdr_estimate,
    generate_theta0,
    run_experiment,
    simulate_replicate,
    sparsity_preservation_check,
)
from .theory import ProblemRegime, RateSequences, TheoryQuantities

__version__ = "0.1.0"

__all__ = [
    "AnalysisResult",
    "Decision",
    "PosteriorSummaries",
    "ProblemRegime",
    "RateSequences",
    "SignalConfig",
    "SimulationReport",
    "TheoryQuantities",
    "WeightEstimate",
    "analyze",
    "bfdr_estimate",
    "cl_procedure",
    "ell_procedure",
    "ell_values",
    "estimate_w",
    "generate_theta0",
    "lambda_hat",
    "log_likelihood",
    "mixture",
    "post_fdr",
    "q_procedure",
    "q_values",
    "run_experiment",
    "score",
    "simulate_replicate",
    "sparsity_preservation_check",
    "theory",
]
