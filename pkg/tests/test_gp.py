import numpy as np
import pytest

from fomo.core import seeded_rng
from fomo.errors import IllConditionedKernelError, InsufficientDataError
from fomo.gp import (
    GpHyperparams,
    GpModel,
    fit_gp,
    kernel,
    kernel_value,
    log_marginal_likelihood,
)


def random_problem(rng, n=None, d=None, noise=0.0, ls_lo=0.5, ls_hi=2.0):
    n = n or int(rng.integers(3, 9))
    d = d or int(rng.integers(1, 4))
    x = rng.normal(size=(n, d)) * rng.uniform(0.5, 2.0)
    y = rng.normal(size=n) * rng.uniform(0.5, 3.0)
    hyper = GpHyperparams(
        signal_variance=float(np.exp(rng.uniform(-1, 1.5))),
        lengthscales=np.exp(rng.uniform(np.log(ls_lo), np.log(ls_hi), size=d)),
        noise_variance=noise,
    )
    return x, y, hyper


def fd_gradient(x, y, hyper, eps=1e-6):
    """Central finite differences of the evidence in log-parameter space."""
    d = hyper.lengthscales.size
    base = np.concatenate(
        [
            np.log(hyper.lengthscales),
            [np.log(hyper.signal_variance)],
            [np.log(hyper.noise_variance)] if hyper.noise_variance > 0 else [],
        ]
    )

    def value(z):
        h = GpHyperparams(
            signal_variance=np.exp(z[d]),
            lengthscales=np.exp(z[:d]),
            noise_variance=np.exp(z[d + 1]) if z.size > d + 1 else 0.0,
            mean_constant=hyper.mean_constant,
        )
        return log_marginal_likelihood(x, y, h)

    grad = np.empty(base.size)
    for i in range(base.size):
        zp, zm = base.copy(), base.copy()
        zp[i] += eps
        zm[i] -= eps
        grad[i] = (value(zp) - value(zm)) / (2 * eps)
    return grad


class TestKernel:
    def test_diagonal_is_signal_variance(self):
        hyper = GpHyperparams(2.5, np.array([0.7, 1.3]))
        x = seeded_rng(0, "k").normal(size=(6, 2))
        k = kernel(x, x, hyper)
        np.testing.assert_allclose(np.diag(k), 2.5, rtol=1e-15)
        np.testing.assert_allclose(k, k.T, rtol=1e-15)

    def test_matches_scalar_formula(self):
        hyper = GpHyperparams(1.7, np.array([0.5, 2.0]))
        a = np.array([0.3, -1.0])
        b = np.array([1.1, 0.4])
        expected = 1.7 * np.exp(
            -0.5 * ((0.3 - 1.1) ** 2 / 0.25 + (-1.0 - 0.4) ** 2 / 4.0)
        )
        assert kernel_value(a, b, hyper) == pytest.approx(expected, rel=1e-15)

    def test_anisotropy_matters(self):
        iso = GpHyperparams(1.0, np.array([1.0, 1.0]))
        aniso = GpHyperparams(1.0, np.array([1.0, 10.0]))
        a = np.zeros(2)
        b = np.array([0.0, 3.0])
        assert kernel_value(a, b, aniso) > kernel_value(a, b, iso)


class TestPosteriorOracle:
    def test_cholesky_equals_explicit_inverse(self):
        # a noise floor keeps the kernel condition number ~1e6 so the
        # explicit-inverse oracle itself stays accurate to ~1e-10
        rng = seeded_rng(1, "gp-oracle")
        for _ in range(50):
            noise = float(np.exp(rng.uniform(np.log(1e-6), np.log(1e-2))))
            x, y, hyper = random_problem(rng, noise=noise)
            model = GpModel(x, y, hyper)
            queries = rng.normal(size=(12, x.shape[1]))
            mean_c, var_c = model.predict(queries)
            mean_d, var_d = model.predict_dense(queries)
            np.testing.assert_allclose(mean_c, mean_d, rtol=1e-8, atol=1e-8)
            np.testing.assert_allclose(
                var_c, np.maximum(var_d, 0.0), rtol=1e-8, atol=1e-8
            )

    def test_interpolates_training_data(self):
        rng = seeded_rng(2, "gp")
        x = np.linspace(-2, 2, 9)[:, None]
        y = np.sin(2 * x[:, 0])
        model = GpModel(x, y, GpHyperparams(1.0, np.array([0.8])))
        mean, var = model.predict(x)
        np.testing.assert_allclose(mean, y, atol=1e-5)
        assert np.all(var < 1e-6)
        assert np.all(var >= 0.0)

    def test_reverts_to_prior_far_away(self):
        x = np.zeros((3, 1)) + np.array([[0.0], [0.1], [0.2]])
        y = np.array([4.0, 4.2, 4.1])
        hyper = GpHyperparams(2.0, np.array([0.5]), mean_constant=float(y.mean()))
        model = GpModel(x, y, hyper)
        mean, var = model.predict(np.array([[50.0]]))
        assert mean[0] == pytest.approx(y.mean(), abs=1e-12)
        assert var[0] == pytest.approx(2.0, rel=1e-12)


class TestEvidenceGradient:
    def test_matches_finite_differences_zero_noise(self):
        # short lengthscales keep the zero-noise kernel well-conditioned,
        # so the finite-difference oracle is trustworthy at rtol 1e-5
        rng = seeded_rng(3, "gp-grad")
        for _ in range(20):
            x, y, hyper = random_problem(rng, ls_lo=0.1, ls_hi=0.4)
            _, grad = log_marginal_likelihood(x, y, hyper, with_grad=True)
            expected = fd_gradient(x, y, hyper)
            np.testing.assert_allclose(grad, expected, rtol=1e-5, atol=1e-7)

    def test_matches_finite_differences_with_noise(self):
        rng = seeded_rng(4, "gp-grad")
        for _ in range(10):
            x, y, hyper = random_problem(rng, noise=float(np.exp(rng.uniform(-3, 0))))
            _, grad = log_marginal_likelihood(x, y, hyper, with_grad=True)
            expected = fd_gradient(x, y, hyper)
            assert grad.size == x.shape[1] + 2
            np.testing.assert_allclose(grad, expected, rtol=1e-5, atol=1e-7)

    def test_value_consistent_with_gradless_call(self):
        rng = seeded_rng(5, "gp")
        x, y, hyper = random_problem(rng)
        v1 = log_marginal_likelihood(x, y, hyper)
        v2, _ = log_marginal_likelihood(x, y, hyper, with_grad=True)
        assert v1 == v2


class TestFit:
    def test_recovers_lengthscale_from_prior_draws(self):
        # draw functions from a known GP and check the fitted lengthscale
        true_ls = 0.8
        logs = []
        for trial in range(20):
            rng = seeded_rng(trial, "gp-recover")
            x = np.sort(rng.uniform(-3, 3, size=24))[:, None]
            hyper = GpHyperparams(1.0, np.array([true_ls]))
            k = kernel(x, x, hyper) + 1e-10 * np.eye(24)
            y = np.linalg.cholesky(k) @ rng.standard_normal(24)
            model = fit_gp(x, y, rng, restarts=5)
            logs.append(np.log(model.hyper.lengthscales[0]))
        assert abs(np.median(logs) - np.log(true_ls)) < 0.5

    def test_fit_beats_random_hyperparameters(self):
        rng = seeded_rng(6, "gp-fit")
        x = rng.uniform(-2, 2, size=(15, 1))
        y = np.tanh(x[:, 0]) + 0.3 * x[:, 0] ** 2
        model = fit_gp(x, y, rng)
        fitted = log_marginal_likelihood(x, y, model.hyper)
        worse = log_marginal_likelihood(
            x, y, GpHyperparams(np.var(y), np.array([0.01]), mean_constant=y.mean())
        )
        assert fitted > worse

    def test_duplicates_rejected_without_noise(self):
        x = np.array([[0.0], [1.0], [1.0]])
        y = np.array([0.0, 1.0, 1.0])
        with pytest.raises(IllConditionedKernelError):
            fit_gp(x, y, seeded_rng(0, "dup"))

    def test_constant_outputs(self):
        x = np.linspace(0, 1, 6)[:, None]
        model = fit_gp(x, np.full(6, 2.5), seeded_rng(0, "const"))
        mean, var = model.predict(np.array([[0.37], [5.0]]))
        np.testing.assert_allclose(mean, 2.5, atol=1e-9)
        assert np.all(var < 1e-9)

    def test_requires_two_points(self):
        with pytest.raises(InsufficientDataError):
            fit_gp(np.zeros((1, 1)), np.zeros(1), seeded_rng(0, "n1"))

    def test_deterministic_given_rng(self):
        rng_data = seeded_rng(7, "gp")
        x = rng_data.uniform(-2, 2, size=(12, 2))
        y = np.sin(x[:, 0]) * np.cos(x[:, 1])
        m1 = fit_gp(x, y, seeded_rng(8, "fit"))
        m2 = fit_gp(x, y, seeded_rng(8, "fit"))
        assert m1.hyper.signal_variance == m2.hyper.signal_variance
        np.testing.assert_array_equal(m1.hyper.lengthscales, m2.hyper.lengthscales)

    def test_subsampled_hyperparameters_still_condition_on_all(self):
        rng = seeded_rng(9, "gp-big")
        x = rng.uniform(-3, 3, size=(60, 1))
        y = np.sin(x[:, 0])
        model = fit_gp(x, y, rng, hyper_subsample=30)
        assert model.n == 60
        mean, _ = model.predict(x)
        np.testing.assert_allclose(mean, y, atol=1e-4)


class TestJitter:
    def test_jitter_grows_until_factorization_succeeds(self):
        # nearly coincident points force a larger jitter rung
        x = np.array([[0.0], [1e-7], [1.0]])
        y = np.array([0.0, 0.0, 1.0])
        model = GpModel(x, y, GpHyperparams(1.0, np.array([1.0])))
        assert model.jitter >= 1e-10
        mean, var = model.predict(x)
        assert np.all(np.isfinite(mean)) and np.all(var >= 0)

    def test_hyperparameter_validation(self):
        with pytest.raises(ValueError):
            GpHyperparams(-1.0, np.array([1.0]))
        with pytest.raises(ValueError):
            GpHyperparams(1.0, np.array([0.0]))
        with pytest.raises(ValueError):
            GpHyperparams(1.0, np.array([1.0]), noise_variance=-0.5)
