"""Tests for the acquisition scoring and the sequential selection loop.

The loop is exercised with hand-built surrogate stand-ins whose variance
fields are chosen to force each stopping path, so no real model training
happens here.
"""

import numpy as np
import pytest

from fomo.core import CandidatePool, RunConfig, gaussian_distribution, uniform_distribution
from fomo.density import fit_kde
from fomo.errors import ConfigError
from fomo.selection import (
    CONVERGED,
    MAX_ITERATIONS,
    PDF_FLOOR_RATIO,
    POOL_EXHAUSTED,
    AcquisitionReport,
    FomoResult,
    _top_new,
    fomo_run,
    likelihood_ratio,
    score_pool,
)


class TestLikelihoodRatio:
    def test_hand_ratio(self):
        pdf = fit_kde(np.array([0.0, 1.0, 2.0]), bandwidth=0.5)
        means = np.array([0.5, 1.5])
        from fomo.density import evaluate

        p_mu = evaluate(pdf, means)
        p_x = np.array([0.3, 0.7])
        w = likelihood_ratio(p_x, pdf, means)
        np.testing.assert_allclose(w, p_x / p_mu, rtol=1e-14)

    def test_floor_guards_empty_tail(self):
        pdf = fit_kde(np.array([0.0, 1.0, 2.0]), bandwidth=0.1)
        w = likelihood_ratio(np.array([1.0]), pdf, np.array([500.0]))
        assert w[0] == 1.0 / (PDF_FLOOR_RATIO * pdf.max_density)

    def test_rare_outputs_outweigh_common_ones(self):
        rng = np.random.default_rng(0)
        pdf = fit_kde(rng.normal(size=2000))
        w = likelihood_ratio(np.array([1.0, 1.0]), pdf, np.array([0.0, 3.5]))
        assert w[1] > 10 * w[0]


class TestRanking:
    def test_ties_keep_lower_index(self):
        report = AcquisitionReport(
            weights=np.ones(4),
            variances=np.ones(4),
            scores=np.array([3.0, 1.0, 3.0, 2.0]),
        )
        np.testing.assert_array_equal(report.ranking, [0, 2, 3, 1])

    def test_ranking_descends(self):
        rng = np.random.default_rng(1)
        scores = rng.uniform(size=50)
        report = AcquisitionReport(scores, scores, scores)
        assert np.all(np.diff(scores[report.ranking]) <= 0)

    def test_top_new_filters_chosen(self):
        ranking = np.array([5, 2, 7, 1, 0])
        mask = np.zeros(8, dtype=bool)
        mask[2] = True
        assert _top_new(ranking, mask, 3) == [5, 7]


class FakeModel:
    """Deterministic predict stand-in; variance comes from a closure."""

    is_trained = True

    def __init__(self, var_fn):
        self.var_fn = var_fn

    def predict_mean(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        return np.tanh(x[:, 0])

    def predict(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        return self.predict_mean(x), self.var_fn(x)


def make_factory(var_builder):
    """var_builder(train_x) -> var_fn over query points."""

    def factory(x, y, seed, iteration):
        return FakeModel(var_builder(np.atleast_2d(x)))

    return factory


def _is_near_training(q, train_x, tol=1e-9):
    d = np.abs(q[:, None, 0] - train_x[None, :, 0])
    return d.min(axis=1) < tol


def chosen_heavy(train_x):
    # already-chosen points dominate the ranking: no new picks, converges
    def var_fn(q):
        return np.where(_is_near_training(q, train_x), 1.0, 1e-9)

    return var_fn


def unchosen_heavy(train_x):
    # unchosen points dominate: the loop keeps adding until the pool is gone
    def var_fn(q):
        return np.where(_is_near_training(q, train_x), 1e-12, 1.0)

    return var_fn


def linear_pool(n=8):
    x = np.linspace(-2.0, 2.0, n)[:, None]
    return CandidatePool(x, np.tanh(x[:, 0]))


DIST = gaussian_distribution(1)


class TestFomoLoop:
    def test_converges_when_chosen_points_dominate(self):
        pool = linear_pool(10)
        config = RunConfig(n_a=2, n_iter_max=20, pdf_sample_count=1000, seed=0, n_init=5)
        result = fomo_run(pool, DIST, make_factory(chosen_heavy), config)
        assert result.reason == CONVERGED
        assert result.n_chosen == 5
        new_counts = [rec.new_count for rec in result.history]
        assert new_counts == [5, 0, 0, 0]
        assert [rec.iteration for rec in result.history] == [0, 1, 2, 3]

    def test_exhausts_small_pool(self):
        pool = linear_pool(8)
        config = RunConfig(n_a=2, n_iter_max=50, pdf_sample_count=1000, seed=0, n_init=3)
        result = fomo_run(pool, DIST, make_factory(unchosen_heavy), config)
        assert result.reason == POOL_EXHAUSTED
        assert result.n_chosen == 8
        assert [rec.new_count for rec in result.history] == [3, 2, 2, 1]

    def test_stops_at_iteration_budget(self):
        pool = linear_pool(100)
        config = RunConfig(n_a=2, n_iter_max=2, pdf_sample_count=1000, seed=0, n_init=3)
        result = fomo_run(pool, DIST, make_factory(unchosen_heavy), config)
        assert result.reason == MAX_ITERATIONS
        assert result.n_chosen == 3 + 2 * 2
        assert len(result.history) == 3

    def test_bookkeeping_invariants(self):
        pool = linear_pool(12)
        config = RunConfig(n_a=3, n_iter_max=30, pdf_sample_count=1000, seed=1, n_init=4)
        result = fomo_run(pool, DIST, make_factory(unchosen_heavy), config)
        counts = [rec.n_chosen for rec in result.history]
        news = [rec.new_count for rec in result.history]
        for prev, cur, new in zip(counts, counts[1:], news[1:]):
            assert cur == prev + new
        assert counts[-1] == result.n_chosen <= pool.n
        assert len(set(result.pool.chosen)) == len(result.pool.chosen)

    def test_dominating_chosen_point_shrinks_the_batch(self):
        # one chosen candidate with a huge score occupies a slot in the
        # top-n_a window, so only n_a - 1 genuinely new points come in
        pool = linear_pool(12)

        def var_builder(train_x):
            first = train_x[0, 0]

            def var_fn(q):
                near = _is_near_training(q, train_x)
                spike = np.abs(q[:, 0] - first) < 1e-9
                return np.where(spike, 1e6, np.where(near, 1e-12, 1.0))

            return var_fn

        config = RunConfig(n_a=2, n_iter_max=4, pdf_sample_count=1000, seed=0, n_init=3)
        result = fomo_run(pool, DIST, make_factory(var_builder), config)
        later = [rec.new_count for rec in result.history[1:]]
        assert later == [1, 1, 1, 1]

    def test_oversized_init_request_is_capped(self):
        pool = linear_pool(4)
        config = RunConfig(n_a=2, n_iter_max=10, pdf_sample_count=1000, seed=0, n_init=10)
        result = fomo_run(pool, DIST, make_factory(unchosen_heavy), config)
        assert result.reason == POOL_EXHAUSTED
        assert result.n_chosen == 4

    def test_score_rescaling_leaves_choices_unchanged(self):
        pool = linear_pool(10)
        config = RunConfig(n_a=2, n_iter_max=6, pdf_sample_count=1000, seed=0, n_init=3)

        def scaled(factor):
            def builder(train_x):
                base = unchosen_heavy(train_x)
                return lambda q: factor * base(q)

            return fomo_run(pool, DIST, make_factory(builder), config)

        a = scaled(1.0)
        b = scaled(1e6)
        assert a.pool.chosen == b.pool.chosen
        assert [r.new_count for r in a.history] == [r.new_count for r in b.history]

    def test_runs_repeat_bitwise(self):
        pool = linear_pool(10)
        config = RunConfig(n_a=2, n_iter_max=6, pdf_sample_count=1000, seed=3, n_init=3)
        a = fomo_run(pool, DIST, make_factory(unchosen_heavy), config)
        b = fomo_run(pool, DIST, make_factory(unchosen_heavy), config)
        assert a.pool.chosen == b.pool.chosen
        assert a.reason == b.reason
        assert [r.n_chosen for r in a.history] == [r.n_chosen for r in b.history]

    def test_metrics_callback_is_recorded(self):
        pool = linear_pool(8)
        config = RunConfig(n_a=2, n_iter_max=3, pdf_sample_count=1000, seed=0, n_init=3)
        seen = []

        def callback(iteration, model, active, report):
            seen.append((iteration, report is None))
            return {"tag": iteration * 10}

        result = fomo_run(pool, DIST, make_factory(unchosen_heavy), config, callback)
        assert seen[0] == (0, True)
        assert all(not flag for _, flag in seen[1:])
        assert [rec.extra["tag"] for rec in result.history] == [
            10 * rec.iteration for rec in result.history
        ]

    def test_tiny_pool_rejected(self):
        pool = CandidatePool(np.array([[0.0]]), np.array([1.0]))
        config = RunConfig(n_a=1, n_iter_max=2, pdf_sample_count=1000, seed=0)
        with pytest.raises(ConfigError):
            fomo_run(pool, DIST, make_factory(unchosen_heavy), config)


class TestScorePool:
    def test_composition(self):
        pool = linear_pool(6)
        dist = uniform_distribution(1, -2.0, 2.0)
        model = FakeModel(lambda q: np.full(q.shape[0], 0.25))
        pdf = fit_kde(np.tanh(np.linspace(-2, 2, 500)))
        report = score_pool(model, pool, pdf, dist)
        np.testing.assert_allclose(report.scores, report.weights * 0.25, rtol=1e-14)
        expected_w = likelihood_ratio(
            dist.density(pool.x), pdf, model.predict_mean(pool.x)
        )
        np.testing.assert_allclose(report.weights, expected_w, rtol=1e-14)

    def test_front_separation(self):
        # every picked score must beat every unpicked unchosen score
        pool = linear_pool(9)
        dist = uniform_distribution(1, -2.0, 2.0)
        rng = np.random.default_rng(2)
        var = rng.uniform(0.1, 1.0, size=9)
        model = FakeModel(lambda q: var[: q.shape[0]])
        pdf = fit_kde(np.tanh(np.linspace(-2, 2, 500)))
        report = score_pool(model, pool, pdf, dist)
        mask = np.zeros(9, dtype=bool)
        mask[[1, 4]] = True
        picks = _top_new(report.ranking, mask, 3)
        others = [i for i in range(9) if i not in picks and not mask[i]]
        assert min(report.scores[picks]) > max(report.scores[others])
