"""Sequential data selection driven by output-weighted uncertainty.

Each candidate x is scored by a(x) = w(x) * var(x), where var is the
surrogate's predictive variance and w(x) = p_x(x) / p_mu(mu(x)) is the
ratio of the input density to the estimated density of the surrogate's
own output at that point.  Rare, badly-resolved outputs get large w, so
the scan concentrates samples where the output PDF is thin.

The driver trains on the full pool once to bootstrap w, seeds the chosen
set with the best-w points, then alternates scoring and retraining until
the top-ranked batch stops adding new points.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import CandidatePool, InputDistribution, RunConfig, seeded_rng
from .density import DensityEstimate, evaluate, surrogate_output_pdf
from .errors import ConfigError

PDF_FLOOR_RATIO = 1e-12

CONVERGED = "converged"
MAX_ITERATIONS = "max-iterations"
POOL_EXHAUSTED = "pool-exhausted"


def likelihood_ratio(
    input_density, output_pdf: DensityEstimate, surrogate_means
) -> np.ndarray:
    """w = p_x / max(p_mu(mean), floor); the floor guards empty PDF tails."""
    input_density = np.asarray(input_density, dtype=np.float64)
    floor = PDF_FLOOR_RATIO * output_pdf.max_density
    p_mu = np.maximum(np.asarray(evaluate(output_pdf, surrogate_means)), floor)
    return input_density / p_mu


@dataclass(frozen=True)
class AcquisitionReport:
    """Per-candidate scoring of a pool under one trained surrogate."""

    weights: np.ndarray
    variances: np.ndarray
    scores: np.ndarray

    @property
    def ranking(self) -> np.ndarray:
        """Candidate indices by descending score; ties keep the lower index."""
        return np.argsort(-self.scores, kind="stable")


def score_pool(
    model, pool: CandidatePool, output_pdf: DensityEstimate, distribution: InputDistribution
) -> AcquisitionReport:
    mean, var = model.predict(pool.x)
    weights = likelihood_ratio(distribution.density(pool.x), output_pdf, mean)
    return AcquisitionReport(weights, var, weights * var)


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    n_chosen: int
    new_count: int
    extra: dict = field(default_factory=dict)


@dataclass(frozen=True)
class FomoResult:
    pool: CandidatePool
    model: object
    history: tuple
    reason: str

    @property
    def n_chosen(self) -> int:
        return len(self.pool.chosen)


def _top_new(ranking, chosen_mask, count):
    picks = []
    for idx in ranking[:count]:
        if not chosen_mask[idx]:
            picks.append(int(idx))
    return picks


def fomo_run(
    pool: CandidatePool,
    distribution: InputDistribution,
    surrogate_factory,
    config: RunConfig,
    metrics_callback=None,
) -> FomoResult:
    """Run the selection loop over a fully evaluated candidate pool.

    ``surrogate_factory(x, y, seed, iteration)`` must return a trained model
    with predict/predict_mean.  Iteration 0 trains on the whole pool to
    bootstrap the density ratio and picks the ``n_init`` largest-w points;
    later iterations add the top ``n_a`` scored points not yet chosen.
    Stops after ``convergence_patience`` consecutive iterations with no new
    points, when every candidate is chosen, or at ``n_iter_max``.
    """
    if pool.n < 2:
        raise ConfigError("candidate pool is too small")
    n_init = min(config.n_init, pool.n)

    def retrain(active: CandidatePool, iteration: int):
        x, y = active.training_arrays()
        return surrogate_factory(x, y, config.seed, iteration)

    def output_pdf(model, iteration: int):
        rng = seeded_rng(config.seed, f"output-pdf-iter-{iteration}")
        return surrogate_output_pdf(model, distribution, config.pdf_sample_count, rng)

    history = []

    def record(iteration, active, new_count, model, report=None):
        extra = {}
        if metrics_callback is not None:
            extra = dict(metrics_callback(iteration, model, active, report) or {})
        history.append(IterationRecord(iteration, len(active.chosen), new_count, extra))

    # bootstrap: fit everything once, then keep only the rarest outputs
    full = pool.with_chosen(range(pool.n))
    model = retrain(full, 0)
    pdf = output_pdf(model, 0)
    mean_all = model.predict_mean(pool.x)
    w = likelihood_ratio(distribution.density(pool.x), pdf, mean_all)
    seed_order = np.argsort(-w, kind="stable")
    active = pool.with_chosen(seed_order[:n_init])
    model = retrain(active, 0)
    record(0, active, n_init, model)

    reason = MAX_ITERATIONS
    zero_streak = 0
    for iteration in range(1, config.n_iter_max + 1):
        pdf = output_pdf(model, iteration)
        report = score_pool(model, active, pdf, distribution)
        mask = active.chosen_mask()
        picks = _top_new(report.ranking, mask, config.n_a)
        new_count = len(picks)
        if new_count:
            active = active.with_chosen(tuple(active.chosen) + tuple(picks))
            model = retrain(active, iteration)
            zero_streak = 0
        else:
            zero_streak += 1
        record(iteration, active, new_count, model, report)
        if zero_streak >= config.convergence_patience:
            reason = CONVERGED
            break
        if len(active.chosen) == pool.n:
            reason = POOL_EXHAUSTED
            break

    return FomoResult(active, model, tuple(history), reason)
