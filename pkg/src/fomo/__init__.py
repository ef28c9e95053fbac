"""Output-weighted sequential data selection for expensive scalar maps."""

__version__ = "0.1.0"

from .core import (
    CandidatePool,
    InputDistribution,
    RunConfig,
    Sample,
    gaussian_distribution,
    seeded_rng,
    uniform_distribution,
)
from .density import DensityEstimate, fit_kde, surrogate_output_pdf
from .ensemble import EnsembleModel, train_ensemble
from .errors import FomoError
from .gp import GpHyperparams, GpModel, fit_gp
from .metrics import build_test_suite, log_pdf_error, normalized_mse
from .nn import Mlp, MlpArchitecture, train_mlp
from .problems import MmtConfig, mmt_problem, piecewise_map, piecewise_problem
from .selection import FomoResult, fomo_run, likelihood_ratio, score_pool

__all__ = [
    "CandidatePool",
    "DensityEstimate",
    "EnsembleModel",
    "FomoError",
    "FomoResult",
    "GpHyperparams",
    "GpModel",
    "InputDistribution",
    "Mlp",
    "MlpArchitecture",
    "MmtConfig",
    "RunConfig",
    "Sample",
    "__version__",
    "build_test_suite",
    "fit_gp",
    "fit_kde",
    "fomo_run",
    "gaussian_distribution",
    "likelihood_ratio",
    "log_pdf_error",
    "mmt_problem",
    "normalized_mse",
    "piecewise_map",
    "piecewise_problem",
    "score_pool",
    "seeded_rng",
    "surrogate_output_pdf",
    "train_ensemble",
    "train_mlp",
    "uniform_distribution",
]
