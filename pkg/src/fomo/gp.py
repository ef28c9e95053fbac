"""Gaussian process regression with an anisotropic squared-exponential kernel.

Constant-mean GP with per-dimension lengthscales, trained by maximizing the
log marginal likelihood over log-hyperparameters with multi-start L-BFGS.
The noise variance defaults to zero (the target maps are noiseless); a tiny
adaptive jitter proportional to the signal variance is added only so the
Cholesky factorization succeeds, never to regularize the fit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular
from scipy.spatial.distance import pdist

from .errors import ConfigError, IllConditionedKernelError, InsufficientDataError

JITTER_START = 1e-10
JITTER_MAX = 1e-6
DUPLICATE_TOL = 1e-10
QUERY_CHUNK = 4096
HYPER_SUBSAMPLE = 400
_LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class GpHyperparams:
    """Kernel and mean parameters: k(x,x') = sf2 * exp(-sum_j dx_j^2/(2 l_j^2))."""

    signal_variance: float
    lengthscales: np.ndarray
    noise_variance: float = 0.0
    mean_constant: float = 0.0

    def __post_init__(self):
        ls = np.atleast_1d(np.asarray(self.lengthscales, dtype=np.float64))
        object.__setattr__(self, "lengthscales", ls)
        if self.signal_variance <= 0 or np.any(ls <= 0) or self.noise_variance < 0:
            raise ValueError("hyperparameters out of range")


def kernel(x, x2, hyper: GpHyperparams) -> np.ndarray:
    """Kernel matrix between the rows of ``x`` and ``x2``."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    x2 = np.atleast_2d(np.asarray(x2, dtype=np.float64))
    diff = x[:, None, :] - x2[None, :, :]
    sq = np.sum((diff / hyper.lengthscales) ** 2, axis=2)
    return hyper.signal_variance * np.exp(-0.5 * sq)


def kernel_value(x, x2, hyper: GpHyperparams) -> float:
    """Kernel between two single points."""
    return float(kernel(np.atleast_2d(x), np.atleast_2d(x2), hyper)[0, 0])


def _pairwise_sq_diffs(x):
    # (d, n, n) per-dimension squared differences, reused across evaluations
    diff = x[:, None, :] - x[None, :, :]
    return np.transpose(diff**2, (2, 0, 1))


def _assemble(sq_by_dim, hyper):
    scaled = np.tensordot(1.0 / hyper.lengthscales**2, sq_by_dim, axes=(0, 0))
    corr = np.exp(-0.5 * scaled)
    return hyper.signal_variance * corr, corr


def _factorize(k_signal, hyper):
    """Cholesky of K = k_signal + (noise + jitter*sf2) I with growing jitter."""
    n = k_signal.shape[0]
    jitter = JITTER_START
    while True:
        diag = hyper.noise_variance + jitter * hyper.signal_variance
        try:
            chol = cholesky(k_signal + diag * np.eye(n), lower=True)
            return chol, jitter
        except np.linalg.LinAlgError:
            if jitter >= JITTER_MAX:
                raise IllConditionedKernelError(
                    f"kernel factorization failed at relative jitter {jitter:g}",
                    jitter=jitter,
                ) from None
            jitter *= 10.0


class GpModel:
    """Fitted GP caching the Cholesky factor and weight vector alpha."""

    def __init__(self, x, y, hyper: GpHyperparams):
        self.train_x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        self.train_y = np.asarray(y, dtype=np.float64).ravel()
        self.hyper = hyper
        k_signal, _ = _assemble(_pairwise_sq_diffs(self.train_x), hyper)
        self.chol, self.jitter = _factorize(k_signal, hyper)
        resid = self.train_y - hyper.mean_constant
        self.alpha = cho_solve((self.chol, True), resid)
        self.is_trained = True

    @property
    def n(self) -> int:
        return self.train_y.size

    def predict(self, x):
        """Posterior mean and (clamped nonnegative) variance at query rows."""
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        mean = np.empty(x.shape[0])
        var = np.empty(x.shape[0])
        for lo in range(0, x.shape[0], QUERY_CHUNK):
            k_star = kernel(x[lo : lo + QUERY_CHUNK], self.train_x, self.hyper)
            mean[lo : lo + k_star.shape[0]] = (
                self.hyper.mean_constant + k_star @ self.alpha
            )
            v = solve_triangular(self.chol, k_star.T, lower=True)
            var[lo : lo + k_star.shape[0]] = self.hyper.signal_variance - np.sum(
                v**2, axis=0
            )
        return mean, np.maximum(var, 0.0)

    def predict_mean(self, x):
        """Posterior mean only; skips the triangular solve the variance needs."""
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        mean = np.empty(x.shape[0])
        for lo in range(0, x.shape[0], QUERY_CHUNK):
            k_star = kernel(x[lo : lo + QUERY_CHUNK], self.train_x, self.hyper)
            mean[lo : lo + k_star.shape[0]] = (
                self.hyper.mean_constant + k_star @ self.alpha
            )
        return mean

    def predict_dense(self, x):
        """Same posterior equations via an explicit inverse (test oracle)."""
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        n = self.n
        diag = self.hyper.noise_variance + self.jitter * self.hyper.signal_variance
        k_full = kernel(self.train_x, self.train_x, self.hyper) + diag * np.eye(n)
        k_inv = np.linalg.inv(k_full)
        k_star = kernel(x, self.train_x, self.hyper)
        mean = self.hyper.mean_constant + k_star @ k_inv @ (self.train_y - self.hyper.mean_constant)
        var = self.hyper.signal_variance - np.einsum("ij,jk,ik->i", k_star, k_inv, k_star)
        return mean, var


def log_marginal_likelihood(x, y, hyper: GpHyperparams, with_grad: bool = False):
    """GP log evidence; optionally with the gradient in log-hyperparameter space.

    The gradient covers [log lengthscales (d), log signal_variance] and, when
    the noise variance is positive, log noise_variance as a final entry.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).ravel()
    sq_by_dim = _pairwise_sq_diffs(x)
    return _lml_impl(sq_by_dim, y, hyper, with_grad)


def _lml_impl(sq_by_dim, y, hyper, with_grad):
    n = y.size
    k_signal, corr = _assemble(sq_by_dim, hyper)
    chol, jitter = _factorize(k_signal, hyper)
    resid = y - hyper.mean_constant
    alpha = cho_solve((chol, True), resid)
    value = (
        -0.5 * float(resid @ alpha)
        - float(np.sum(np.log(np.diag(chol))))
        - 0.5 * n * _LOG_2PI
    )
    if not with_grad:
        return value
    k_inv = cho_solve((chol, True), np.eye(n))
    p_mat = np.outer(alpha, alpha) - k_inv
    d = hyper.lengthscales.size
    grad = np.empty(d + (2 if hyper.noise_variance > 0 else 1))
    sf2_corr = hyper.signal_variance * corr
    for j in range(d):
        dk = sf2_corr * (sq_by_dim[j] / hyper.lengthscales[j] ** 2)
        grad[j] = 0.5 * float(np.sum(p_mat * dk))
    # jitter scales with sf2, so dK/dlog sf2 includes the jitter diagonal
    dk_sf = k_signal + jitter * hyper.signal_variance * np.eye(n)
    grad[d] = 0.5 * float(np.sum(p_mat * dk_sf))
    if hyper.noise_variance > 0:
        grad[d + 1] = 0.5 * hyper.noise_variance * float(np.trace(p_mat))
    return value, grad


def _has_near_duplicates(x) -> bool:
    if x.shape[0] < 2:
        return False
    return bool(pdist(x).min() < DUPLICATE_TOL)


def fit_gp(
    x,
    y,
    rng: np.random.Generator,
    restarts: int = 10,
    max_opt_iter: int = 200,
    noise_variance: float = 0.0,
    hyper_subsample: int = HYPER_SUBSAMPLE,
) -> GpModel:
    """Maximum-likelihood GP fit with multi-start L-BFGS in log-space.

    The mean constant is fixed at the training-output mean.  The best
    restart wins by evidence, ties resolved by restart index.  Beyond
    ``hyper_subsample`` points the hyperparameter search runs on a random
    subset (cubic-cost likelihood evaluations); the returned model still
    conditions on every training point.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).ravel()
    n, d = x.shape
    if n < 2:
        raise InsufficientDataError("GP fit requires at least 2 samples")
    if not (np.isfinite(x).all() and np.isfinite(y).all()):
        raise ConfigError("GP training data must be finite")
    if noise_variance == 0.0 and _has_near_duplicates(x):
        raise IllConditionedKernelError(
            "training inputs contain near-duplicate rows with zero noise",
            jitter=JITTER_MAX,
        )
    m0 = float(np.mean(y))
    y_var = float(np.var(y))
    ranges = np.maximum(x.max(axis=0) - x.min(axis=0), 0.0)
    ranges = np.where(ranges > 0, ranges, 1.0)
    if y_var == 0.0:
        # constant outputs: any lengthscale works, signal variance -> 0
        hyper = GpHyperparams(1e-12, ranges, noise_variance, m0)
        return GpModel(x, y, hyper)

    if n > hyper_subsample:
        subset = np.sort(rng.choice(n, size=hyper_subsample, replace=False))
        x_opt, y_opt = x[subset], y[subset]
    else:
        x_opt, y_opt = x, y
    sq_by_dim = _pairwise_sq_diffs(x_opt)
    lo = np.log(np.concatenate([1e-3 * ranges, [1e-6 * y_var]]))
    hi = np.log(np.concatenate([1e3 * ranges, [1e6 * y_var]]))
    bounds = list(zip(lo, hi))

    def evidence(z):
        hyper = GpHyperparams(np.exp(z[d]), np.exp(z[:d]), noise_variance, m0)
        try:
            value, grad = _lml_impl(sq_by_dim, y_opt, hyper, with_grad=True)
        except IllConditionedKernelError:
            return -np.inf, np.zeros_like(z)
        if not np.isfinite(value):
            return -np.inf, np.zeros_like(z)
        return value, grad[: d + 1]

    starts = [np.log(np.concatenate([0.3 * ranges, [y_var]]))]
    for _ in range(restarts - 1):
        ls = ranges * np.exp(rng.uniform(np.log(0.02), np.log(2.0), size=d))
        sf2 = y_var * np.exp(rng.uniform(np.log(0.05), np.log(20.0)))
        starts.append(np.log(np.concatenate([ls, [sf2]])))

    best_z, best_val = None, -np.inf
    for z0 in starts:
        z, val = _ascend(evidence, np.clip(z0, lo, hi), lo, hi, max_opt_iter)
        if val > best_val:
            best_val, best_z = val, z
    hyper = GpHyperparams(np.exp(best_z[d]), np.exp(best_z[:d]), noise_variance, m0)
    return GpModel(x, y, hyper)


def _ascend(evidence, z, lo, hi, max_iter):
    """Projected gradient ascent with a backtracking (Armijo) line search."""
    val, grad = evidence(z)
    step = 1.0
    for _ in range(max_iter):
        if not np.isfinite(val):
            break
        if np.abs(grad).max() < 1e-9:
            break
        moved = False
        for _ in range(30):
            cand = np.clip(z + step * grad, lo, hi)
            shift = cand - z
            if np.abs(shift).max() < 1e-14:
                break
            cand_val, cand_grad = evidence(cand)
            if cand_val >= val + 1e-4 * float(grad @ shift):
                z, val, grad = cand, cand_val, cand_grad
                step = min(step * 2.0, 1e3)
                moved = True
                break
            step *= 0.5
        if not moved:
            break
    return z, val
