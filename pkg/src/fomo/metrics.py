"""Surrogate accuracy metrics: normalized MSE and output-PDF log error.

The PDF error integrates |log10 p_surrogate - log10 p_true| over output
space, so it weighs tail mismatches that a plain MSE never sees.  Both
densities are floored at a shared tiny fraction of their joint peak to
keep the logs finite where one estimate has no support.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import read_dataset, seeded_rng, write_dataset
from .density import DensityEstimate, GRID_POINTS, evaluate, fit_kde
from .errors import ConfigError, UndefinedNormalizationError
from .problems import Problem
from .samplers import DesignSpec, design_matrix

LOG_FLOOR_RATIO = 1e-12


def normalized_mse(y_true, y_pred, prefactor: bool = False) -> float:
    """Squared-error sum over the squared-truth sum.

    With ``prefactor`` the ratio is additionally divided by (n - 1); the
    flag travels alongside reported values so conventions stay explicit.
    """
    y_true = np.asarray(y_true, dtype=np.float64).ravel()
    y_pred = np.asarray(y_pred, dtype=np.float64).ravel()
    if y_true.size != y_pred.size:
        raise ConfigError("prediction and truth lengths differ")
    denom = float(np.sum(y_true**2))
    if denom == 0.0:
        raise UndefinedNormalizationError("all-zero reference outputs")
    value = float(np.sum((y_true - y_pred) ** 2)) / denom
    if prefactor:
        if y_true.size < 2:
            raise UndefinedNormalizationError("prefactor needs at least 2 points")
        value /= y_true.size - 1
    return value


def log_pdf_error(
    p: DensityEstimate, q: DensityEstimate, grid_points: int = GRID_POINTS
) -> float:
    """Trapezoidal integral of |log10 p - log10 q| over the union support."""
    lo = min(p.eval_grid[0], q.eval_grid[0])
    hi = max(p.eval_grid[-1], q.eval_grid[-1])
    grid = np.linspace(lo, hi, grid_points)
    floor = LOG_FLOOR_RATIO * max(p.max_density, q.max_density)
    p_vals = np.maximum(np.asarray(evaluate(p, grid)), floor)
    q_vals = np.maximum(np.asarray(evaluate(q, grid)), floor)
    return float(np.trapezoid(np.abs(np.log10(p_vals) - np.log10(q_vals)), grid))


@dataclass(frozen=True)
class TestSuite:
    """Held-out evaluations for scoring surrogates of one problem.

    ``pdf_x`` and ``pdf_reference`` are None when the output-PDF metric is
    skipped (expensive maps); the MSE set is always present.
    """

    __test__ = False  # keep pytest from collecting this as a test class

    x_mse: np.ndarray
    y_mse: np.ndarray
    pdf_x: np.ndarray | None = None
    pdf_weights: np.ndarray | None = None
    pdf_reference: DensityEstimate | None = None

    @property
    def has_pdf(self) -> bool:
        return self.pdf_reference is not None


def build_test_suite(
    problem: Problem,
    n_mse: int = 100,
    n_pdf: int = 0,
    seed: int = 0,
    cache_dir=None,
    pdf_scheme: str = "lhs",
) -> TestSuite:
    """Evaluate the true map on held-out designs, reusing cached CSVs.

    The MSE set follows the input distribution.  The PDF set covers the
    input box (``pdf_scheme`` "lhs" or "uniform"; the low-dimensional GP
    study uses plain uniform draws) with density weights, and its true
    outputs define the reference output KDE.
    """
    dist = problem.distribution
    scheme = "gaussian" if dist.kind == "independent-gaussian" else "uniform"
    x_mse, y_mse = _cached_eval(
        problem,
        DesignSpec(n_mse, scheme, dist),
        seeded_rng(seed, "test-suite-mse"),
        _cache_path(cache_dir, problem.name, "mse", scheme, n_mse, seed),
    )
    if n_pdf <= 0:
        return TestSuite(x_mse, y_mse)
    x_pdf, y_pdf = _cached_eval(
        problem,
        DesignSpec(n_pdf, pdf_scheme, dist),
        seeded_rng(seed, "test-suite-pdf"),
        _cache_path(cache_dir, problem.name, "pdf", pdf_scheme, n_pdf, seed),
    )
    weights = dist.density(x_pdf)
    return TestSuite(x_mse, y_mse, x_pdf, weights, fit_kde(y_pdf, weights))


def _cache_path(cache_dir, name, tag, scheme, count, seed):
    if cache_dir is None:
        return None
    return Path(cache_dir) / f"{name}-{tag}-{scheme}-n{count}-s{seed}.csv"


def _cached_eval(problem, spec, rng, path):
    if path is not None and path.exists():
        x, y = read_dataset(path)
        if x.shape == (spec.count, problem.dim):
            return x, y
    x = design_matrix(spec, rng)
    y = problem.evaluate(x)
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        write_dataset(path, x, y)
    return x, y


def evaluate_surrogate(model, suite: TestSuite, prefactor: bool = False) -> dict:
    """Score a trained surrogate against a test suite.

    Returns e_mse always and e_log_pdf when the suite carries a PDF
    reference; the surrogate's output KDE reuses the suite's design and
    weights so both densities see identical input coverage.
    """
    out = {
        "e_mse": normalized_mse(suite.y_mse, model.predict_mean(suite.x_mse), prefactor),
        "mse_prefactor": prefactor,
        "e_log_pdf": None,
    }
    if suite.has_pdf:
        mu = model.predict_mean(suite.pdf_x)
        out["e_log_pdf"] = log_pdf_error(
            fit_kde(mu, suite.pdf_weights), suite.pdf_reference
        )
    return out
