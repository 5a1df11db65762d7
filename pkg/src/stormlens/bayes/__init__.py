"""Bayesian log-log regressions of attention on storm impacts."""

from .diagnostics import (
    Diagnostics,
    SummaryRow,
    SummaryTable,
    convergence_diagnostics,
    effective_sample_size,
    hpd_interval,
    split_rhat,
    summarize_posterior,
)
from .model import (
    BayesError,
    ModelKind,
    Normal,
    RegressionData,
    RegressionSpec,
    SamplerConfig,
    build_design,
    fold_change,
    log_posterior_grad,
    regression_spec,
)
from .sampler import PosteriorSamples, dump_chains, sample_posterior

__all__ = [
    "BayesError", "Diagnostics", "ModelKind", "Normal", "PosteriorSamples", "RegressionData",
    "RegressionSpec", "SamplerConfig", "SummaryRow", "SummaryTable", "build_design",
    "convergence_diagnostics", "dump_chains", "effective_sample_size", "fold_change",
    "hpd_interval", "log_posterior_grad", "regression_spec", "sample_posterior", "split_rhat",
    "summarize_posterior",
]
