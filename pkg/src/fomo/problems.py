"""Benchmark maps: a piecewise 1-D function and a dispersive wave model.

The 1-D map composes a linear ramp with logistic shelves beyond |x| = 2,
scaled so the three branches join continuously.  The wave benchmark evolves
a complex field under a one-dimensional dispersive equation with cubic
nonlinearity and high-wavenumber dissipation, starting from random fields
drawn through a truncated Karhunen-Loeve expansion; the scalar output is
the largest surface elevation at the final time.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.fft import fft, ifft

from .core import InputDistribution, gaussian_distribution
from .errors import BlowUpError, ConfigError, DomainError, StabilityError

COEFF_BOUND = 6.0
PHI_SERIES_RADIUS = 0.5
PHI_SERIES_TERMS = 24
BLOWUP_LIMIT = 1e10
GROWTH_LIMIT = 1e4
CHECK_INTERVAL = 100


@dataclass(frozen=True)
class Problem:
    """A scalar map with its input distribution, as used by the experiments."""

    name: str
    distribution: InputDistribution
    evaluate: Callable = field(repr=False)

    @property
    def dim(self) -> int:
        return self.distribution.dim


# ---------------------------------------------------------------------------
# piecewise 1-D map

RAMP_SLOPE = 1.0
SHELF_HEIGHT = 20.0
SHELF_STEEPNESS = 1.0
OUTPUT_SCALE = 10.0
KNEE = 2.0


def piecewise_map(x):
    """Continuous ramp with logistic shelves outside |x| = 2."""
    x = np.asarray(x, dtype=np.float64)
    shift = np.where(x >= 0, -KNEE, KNEE)
    shelf = SHELF_HEIGHT / (1.0 + np.exp(-SHELF_STEEPNESS * (x + shift)))
    outer = (RAMP_SLOPE * x + shelf - SHELF_HEIGHT / 2.0) / OUTPUT_SCALE + 1.0
    inner = RAMP_SLOPE * x / OUTPUT_SCALE + 1.0
    return np.where(np.abs(x) >= KNEE, outer, inner)


def piecewise_problem() -> Problem:
    # 4-sigma box: keeps the uniform size sweeps dense around the logistic
    # bends, where noiseless refits go unstable as samples accumulate
    dist = gaussian_distribution(1, cutoff_sigmas=4.0)

    def evaluate(x):
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        return piecewise_map(x[:, 0])

    return Problem("piecewise-1d", dist, evaluate)


# ---------------------------------------------------------------------------
# Karhunen-Loeve expansion of the random initial field


@dataclass(frozen=True)
class KlBasis:
    """Leading eigenpairs of the periodic complex field covariance."""

    grid: np.ndarray
    eigenvalues: np.ndarray
    modes: np.ndarray  # (n_x, n_modes) complex columns

    @property
    def n_modes(self) -> int:
        return self.eigenvalues.size

    @property
    def n_coeffs(self) -> int:
        return 2 * self.n_modes


def field_covariance(grid, variance: float, corr_length: float) -> np.ndarray:
    """Covariance matrix of the periodic field on ``grid`` (unit period)."""
    delta = grid[:, None] - grid[None, :]
    delta = delta - np.round(delta)  # wrap so conjugate symmetry is exact
    return variance * np.exp(1j * delta - delta**2 / corr_length)


def build_kl_basis(
    n_x: int, n_modes: int = 4, variance: float = 1.0, corr_length: float = 0.35
) -> KlBasis:
    if not 0 < n_modes <= n_x:
        raise ConfigError("mode count must lie in [1, n_x]")
    grid = np.arange(n_x) / n_x
    cov = field_covariance(grid, variance, corr_length)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1][:n_modes]
    return KlBasis(grid, eigvals[order], eigvecs[:, order])


def initial_condition(basis: KlBasis, coeffs) -> np.ndarray:
    """Complex fields from stacked real coefficient pairs, shape (batch, n_x).

    Row layout: (re_0, im_0, re_1, im_1, ...); every entry must lie in
    [-COEFF_BOUND, COEFF_BOUND].
    """
    coeffs = np.atleast_2d(np.asarray(coeffs, dtype=np.float64))
    if coeffs.shape[1] != basis.n_coeffs:
        raise ConfigError(
            f"expected {basis.n_coeffs} coefficients, got {coeffs.shape[1]}"
        )
    if np.any(np.abs(coeffs) > COEFF_BOUND):
        raise DomainError(f"coefficients outside [-{COEFF_BOUND}, {COEFF_BOUND}]")
    z = coeffs[:, 0::2] + 1j * coeffs[:, 1::2]
    return (z * np.sqrt(basis.eigenvalues / 2.0)) @ basis.modes.T


# ---------------------------------------------------------------------------
# dispersive wave model


@dataclass(frozen=True)
class MmtConfig:
    """Discretization and physics parameters for the wave model."""

    n_x: int = 512
    dispersion_power: float = 0.5
    nonlinearity_power: float = 0.0
    nonlinearity_coeff: float = -4.0
    dissipation_coeff: float = 100.0
    dissipation_exponent: int = 8
    dissipation_band: float = 1.0 / 3.0  # fraction of top |k| that is damped
    t_final: float = 20.0
    dt: float = 1e-3
    kl_modes: int = 4
    kl_variance: float = 1.0
    kl_corr_length: float = 0.35

    def __post_init__(self):
        if self.n_x < 4 or self.n_x % 2:
            raise ConfigError("grid size must be an even integer >= 4")
        if self.dt <= 0 or self.t_final <= 0:
            raise ConfigError("time step and final time must be positive")
        if not 0.0 <= self.dissipation_band <= 1.0:
            raise ConfigError("dissipation band fraction must lie in [0, 1]")

    @property
    def wavenumbers(self) -> np.ndarray:
        return 2.0 * np.pi * np.fft.fftfreq(self.n_x, d=1.0 / self.n_x)

    @property
    def n_steps(self) -> int:
        return max(1, int(round(self.t_final / self.dt)))


def spectral_multiplier(k, power: float) -> np.ndarray:
    """|k|^power acting in Fourier space; the k=0 mode is zeroed unless power=0."""
    k = np.asarray(k, dtype=np.float64)
    if power == 0.0:
        return np.ones_like(k)
    out = np.zeros_like(k)
    nonzero = k != 0
    out[nonzero] = np.abs(k[nonzero]) ** power
    return out


def dissipation_profile(config: MmtConfig) -> np.ndarray:
    k = config.wavenumbers
    k_abs = np.abs(k)
    k_max = k_abs.max()
    profile = np.zeros_like(k_abs)
    band = k_abs >= (1.0 - config.dissipation_band) * k_max
    profile[band] = -config.dissipation_coeff * (
        k_abs[band] / k_max
    ) ** config.dissipation_exponent
    return profile


def linear_symbol(config: MmtConfig) -> np.ndarray:
    """Diagonal Fourier symbol of the linear part (dispersion + damping)."""
    k = config.wavenumbers
    return -1j * spectral_multiplier(k, config.dispersion_power) + dissipation_profile(
        config
    )


def _factorial(n: int) -> float:
    result = 1.0
    for i in range(2, n + 1):
        result *= i
    return result


def phi_functions(z):
    """phi_1, phi_2, phi_3 for complex ``z``, series-stabilized near zero."""
    z = np.asarray(z, dtype=np.complex128)
    small = np.abs(z) < PHI_SERIES_RADIUS
    zs = np.where(small, 0.0, z)  # keep the direct path division finite
    ez = np.exp(zs)
    phi1 = np.where(small, _phi1_series(z), (ez - 1.0) / np.where(small, 1.0, zs))
    phi2 = np.where(
        small, _phi2_series(z), (ez - 1.0 - zs) / np.where(small, 1.0, zs**2)
    )
    phi3 = np.where(
        small,
        _phi3_series(z),
        (ez - 1.0 - zs - zs**2 / 2.0) / np.where(small, 1.0, zs**3),
    )
    return phi1, phi2, phi3


def _phi1_series(z):
    out = np.zeros_like(z)
    for j in range(PHI_SERIES_TERMS, -1, -1):
        out = out * z + 1.0 / _factorial(j + 1)
    return out


def _phi2_series(z):
    out = np.zeros_like(z)
    for j in range(PHI_SERIES_TERMS, -1, -1):
        out = out * z + 1.0 / _factorial(j + 2)
    return out


def _phi3_series(z):
    out = np.zeros_like(z)
    for j in range(PHI_SERIES_TERMS, -1, -1):
        out = out * z + 1.0 / _factorial(j + 3)
    return out


@dataclass(frozen=True)
class Etdrk4Coefficients:
    step: float
    e_full: np.ndarray
    e_half: np.ndarray
    q_half: np.ndarray
    f1: np.ndarray
    f2: np.ndarray
    f3: np.ndarray


def etdrk4_coefficients(symbol, step: float) -> Etdrk4Coefficients:
    """Exponential-integrator weights for a diagonal linear symbol."""
    z = step * np.asarray(symbol, dtype=np.complex128)
    phi1_h, _, _ = phi_functions(z / 2.0)
    phi1, phi2, phi3 = phi_functions(z)
    return Etdrk4Coefficients(
        step=step,
        e_full=np.exp(z),
        e_half=np.exp(z / 2.0),
        q_half=(step / 2.0) * phi1_h,
        f1=step * (phi1 - 3.0 * phi2 + 4.0 * phi3),
        f2=step * (phi2 - 2.0 * phi3),
        f3=step * (4.0 * phi3 - phi2),
    )


def mmt_evolve(u0, config: MmtConfig, check_growth: bool = True) -> np.ndarray:
    """Advance fields (batch, n_x) to t_final; returns the final fields.

    Raises BlowUpError on non-finite amplitudes and StabilityError when the
    largest amplitude grows beyond GROWTH_LIMIT times its initial value.
    """
    u0 = np.atleast_2d(np.asarray(u0, dtype=np.complex128))
    if u0.shape[1] != config.n_x:
        raise ConfigError("field resolution does not match the configuration")
    n_steps = config.n_steps
    h = config.t_final / n_steps
    coeff = etdrk4_coefficients(linear_symbol(config), h)
    mult = spectral_multiplier(config.wavenumbers, -config.nonlinearity_power / 4.0)
    lam = config.nonlinearity_coeff

    def nonlinear(v_hat):
        v = ifft(mult * v_hat, axis=-1)
        return -1j * lam * mult * fft(np.abs(v) ** 2 * v, axis=-1)

    u_hat = fft(u0, axis=-1)
    initial_peak = max(float(np.max(np.abs(u0))), 1e-30)
    for step in range(n_steps):
        n_u = nonlinear(u_hat)
        a = coeff.e_half * u_hat + coeff.q_half * n_u
        n_a = nonlinear(a)
        b = coeff.e_half * u_hat + coeff.q_half * n_a
        n_b = nonlinear(b)
        c = coeff.e_half * a + coeff.q_half * (2.0 * n_b - n_u)
        n_c = nonlinear(c)
        u_hat = (
            coeff.e_full * u_hat
            + coeff.f1 * n_u
            + 2.0 * coeff.f2 * (n_a + n_b)
            + coeff.f3 * n_c
        )
        if check_growth and (step % CHECK_INTERVAL == CHECK_INTERVAL - 1):
            _check_field(u_hat, (step + 1) * h, config.n_x, initial_peak)
    _check_field(u_hat, config.t_final, config.n_x, initial_peak)
    return ifft(u_hat, axis=-1)


def _check_field(u_hat, time, n_x, initial_peak):
    if not np.all(np.isfinite(u_hat.view(np.float64))):
        raise BlowUpError("field amplitude is no longer finite", time=time)
    # Parseval bound: max|u| <= sum|u_hat|/n_x
    peak_bound = float(np.max(np.sum(np.abs(u_hat), axis=-1))) / n_x
    if peak_bound > BLOWUP_LIMIT:
        raise BlowUpError(f"field amplitude exceeded {BLOWUP_LIMIT:g}", time=time)
    if peak_bound > GROWTH_LIMIT * initial_peak:
        raise StabilityError(
            f"amplitude grew {GROWTH_LIMIT:g}-fold; reduce the time step", time=time
        )


def wave_height_map(fields) -> np.ndarray:
    """Largest surface elevation max_x |Re u(x)| per field."""
    fields = np.atleast_2d(np.asarray(fields, dtype=np.complex128))
    return np.max(np.abs(fields.real), axis=-1)


def mmt_problem(
    config: MmtConfig | None = None, batch_chunk: int = 500
) -> Problem:
    """Wave-height map over KL coefficients, with a Gaussian input density."""
    config = config or MmtConfig()
    basis = build_kl_basis(
        config.n_x, config.kl_modes, config.kl_variance, config.kl_corr_length
    )
    dist = gaussian_distribution(basis.n_coeffs, cutoff_sigmas=COEFF_BOUND)

    def evaluate(x):
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        out = np.empty(x.shape[0])
        for start in range(0, x.shape[0], batch_chunk):
            block = x[start : start + batch_chunk]
            u0 = initial_condition(basis, block)
            out[start : start + block.shape[0]] = wave_height_map(
                mmt_evolve(u0, config)
            )
        return out

    return Problem("mmt-wave-height", dist, evaluate)
