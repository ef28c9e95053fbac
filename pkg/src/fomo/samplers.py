"""Candidate and test designs: uniform, truncated-Gaussian, and Latin Hypercube."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import InputDistribution
from .errors import ConfigError

SCHEMES = ("uniform", "gaussian", "lhs")


@dataclass(frozen=True)
class DesignSpec:
    """How to draw a design matrix over a distribution's input box."""

    count: int
    scheme: str
    distribution: InputDistribution

    def __post_init__(self):
        if self.count < 1:
            raise ConfigError("design count must be >= 1")
        if self.scheme not in SCHEMES:
            raise ConfigError(f"unknown sampling scheme: {self.scheme!r}")

    @property
    def dims(self) -> int:
        return self.distribution.dim


def latin_hypercube(spec: DesignSpec, rng: np.random.Generator) -> np.ndarray:
    """Stratified (count x dims) design on the distribution's box.

    Per dimension, exactly one point lands in each of ``count`` equal-width
    strata; the stratum order is an independent uniform permutation and the
    position within each stratum is uniform (plain LHS, no maximin step).
    """
    if spec.scheme != "lhs":
        raise ConfigError("latin_hypercube requires scheme='lhs'")
    n, d = spec.count, spec.dims
    dist = spec.distribution
    unit = np.empty((n, d))
    for j in range(d):
        perm = rng.permutation(n)
        unit[:, j] = (perm + rng.uniform(size=n)) / n
    return dist.lo + unit * (dist.hi - dist.lo)


def uniform_design(spec: DesignSpec, rng: np.random.Generator) -> np.ndarray:
    """I.i.d. uniform draws over the box."""
    if spec.scheme != "uniform":
        raise ConfigError("uniform_design requires scheme='uniform'")
    dist = spec.distribution
    return rng.uniform(dist.lo, dist.hi, size=(spec.count, spec.dims))


def gaussian_design(spec: DesignSpec, rng: np.random.Generator) -> np.ndarray:
    """I.i.d. Gaussian draws per dimension, truncated to the box by rejection."""
    if spec.scheme != "gaussian":
        raise ConfigError("gaussian_design requires scheme='gaussian'")
    dist = spec.distribution
    if dist.kind != "independent-gaussian":
        raise ConfigError("gaussian scheme requires an independent-gaussian distribution")
    n, d = spec.count, spec.dims
    out = np.empty((n, d))
    for j in range(d):
        remaining = n
        col = np.empty(0)
        while remaining > 0:
            draw = rng.normal(dist.means[j], dist.stdevs[j], size=max(remaining, 16))
            keep = draw[(draw >= dist.lo[j]) & (draw <= dist.hi[j])]
            col = np.concatenate([col, keep[:remaining]])
            remaining = n - col.size
        out[:, j] = col
    return out


def design_matrix(spec: DesignSpec, rng: np.random.Generator) -> np.ndarray:
    """Dispatch on the spec's scheme."""
    if spec.scheme == "lhs":
        return latin_hypercube(spec, rng)
    if spec.scheme == "uniform":
        return uniform_design(spec, rng)
    return gaussian_design(spec, rng)


def density_at(distribution: InputDistribution, x) -> float | np.ndarray:
    """Input density p_x at one point or at each row of a matrix."""
    return distribution.density(x)
