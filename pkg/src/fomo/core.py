"""Domain types, deterministic RNG streams, and the candidate-pool model.

Everything downstream works on a fixed in-memory pool of input-output
samples partitioned into a chosen (training) subset and the remaining
samples.  All scalars are float64: the instabilities this package studies
live in near-singular linear algebra, and lower precision would confound
them with roundoff.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, fields

import numpy as np

from .errors import ConfigError, DomainError


@dataclass(frozen=True)
class Sample:
    """One input-output pair; ``x`` has fixed dimension across a pool."""

    x: np.ndarray
    y: float

    def __post_init__(self):
        x = np.atleast_1d(np.asarray(self.x, dtype=np.float64))
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", float(self.y))
        if x.ndim != 1 or x.size < 1:
            raise ConfigError("sample input must be a 1-D vector with d >= 1")
        if not (np.all(np.isfinite(x)) and np.isfinite(self.y)):
            raise ConfigError("sample components must be finite")


class CandidatePool:
    """Fixed dataset plus the set of indices currently chosen for training.

    Inputs are stored as an (n, d) float64 matrix and outputs as a length-n
    vector; the index set is kept sorted.  The pool itself is immutable --
    ``with_chosen`` returns a new pool sharing the data arrays.
    """

    def __init__(self, x, y, chosen=()):
        x = np.ascontiguousarray(np.atleast_2d(np.asarray(x, dtype=np.float64)))
        y = np.ascontiguousarray(np.asarray(y, dtype=np.float64).ravel())
        if x.shape[0] != y.shape[0]:
            raise ConfigError(
                f"row mismatch: {x.shape[0]} inputs vs {y.shape[0]} outputs"
            )
        if x.shape[0] < 1:
            raise ConfigError("pool must hold at least one sample")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ConfigError("pool entries must be finite")
        chosen = tuple(sorted(int(i) for i in set(chosen)))
        if chosen and (chosen[0] < 0 or chosen[-1] >= x.shape[0]):
            raise ConfigError("chosen indices out of range")
        self.x = x
        self.y = y
        self.chosen = chosen
        self.x.setflags(write=False)
        self.y.setflags(write=False)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def dim(self) -> int:
        return self.x.shape[1]

    def samples(self):
        return [Sample(self.x[i], self.y[i]) for i in range(self.n)]

    def with_chosen(self, chosen) -> "CandidatePool":
        return CandidatePool(self.x, self.y, chosen)

    def chosen_mask(self) -> np.ndarray:
        mask = np.zeros(self.n, dtype=bool)
        mask[list(self.chosen)] = True
        return mask

    def training_arrays(self):
        idx = list(self.chosen)
        return self.x[idx], self.y[idx]

    def __eq__(self, other):
        if not isinstance(other, CandidatePool):
            return NotImplemented
        return (
            self.chosen == other.chosen
            and self.x.shape == other.x.shape
            and np.array_equal(self.x, other.x)
            and np.array_equal(self.y, other.y)
        )


def pool_partition(pool: CandidatePool):
    """Split the pool into (training, remaining) sample lists by chosen index."""
    mask = pool.chosen_mask()
    training = [Sample(pool.x[i], pool.y[i]) for i in np.flatnonzero(mask)]
    remaining = [Sample(pool.x[i], pool.y[i]) for i in np.flatnonzero(~mask)]
    return training, remaining


@dataclass(frozen=True)
class InputDistribution:
    """Input density p_x: independent Gaussian marginals or a uniform box.

    The Gaussian form reports the untruncated product density even though
    sampling is truncated to the box: the mass beyond the +-6 sigma default
    box (~2e-9) is negligible and the likelihood-ratio weight uses the plain
    density with no renormalization constant.
    """

    kind: str
    means: np.ndarray
    stdevs: np.ndarray
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        for name in ("means", "stdevs", "lo", "hi"):
            object.__setattr__(
                self, name, np.atleast_1d(np.asarray(getattr(self, name), dtype=np.float64))
            )
        if self.kind not in ("independent-gaussian", "uniform-box"):
            raise ConfigError(f"unknown distribution kind: {self.kind!r}")
        d = self.means.size
        if not (self.stdevs.size == d and self.lo.size == d and self.hi.size == d):
            raise ConfigError("distribution field lengths disagree")
        if np.any(self.stdevs <= 0):
            raise ConfigError("stdevs must be positive")
        if np.any(self.lo >= self.hi):
            raise ConfigError("each bound must satisfy lo < hi")

    @property
    def dim(self) -> int:
        return self.means.size

    def contains(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        return np.all((x >= self.lo) & (x <= self.hi), axis=1)

    def density(self, x) -> np.ndarray:
        """Product of per-dimension marginal densities at each row of ``x``.

        Raises DomainError if any point lies outside the box.
        """
        x = np.asarray(x, dtype=np.float64)
        scalar = x.ndim == 1
        pts = np.atleast_2d(x)
        if pts.shape[1] != self.dim:
            raise DomainError(f"expected dimension {self.dim}, got {pts.shape[1]}")
        if not np.all(self.contains(pts)):
            raise DomainError("point outside the distribution bounds")
        if self.kind == "uniform-box":
            vol = float(np.prod(self.hi - self.lo))
            out = np.full(pts.shape[0], 1.0 / vol)
        else:
            z = (pts - self.means) / self.stdevs
            log_marg = -0.5 * z**2 - np.log(self.stdevs * np.sqrt(2.0 * np.pi))
            out = np.exp(np.sum(log_marg, axis=1))
        return float(out[0]) if scalar else out


def gaussian_distribution(dims: int, mean=0.0, stdev=1.0, cutoff_sigmas=6.0) -> InputDistribution:
    """Independent N(mean, stdev^2) marginals truncated to +- cutoff_sigmas."""
    means = np.full(dims, float(mean))
    stdevs = np.full(dims, float(stdev))
    half = cutoff_sigmas * stdevs
    return InputDistribution("independent-gaussian", means, stdevs, means - half, means + half)


def uniform_distribution(dims: int, lo=-6.0, hi=6.0) -> InputDistribution:
    box_lo = np.full(dims, float(lo))
    box_hi = np.full(dims, float(hi))
    center = 0.5 * (box_lo + box_hi)
    # stdevs unused by the uniform density but must stay positive
    spread = (box_hi - box_lo) / np.sqrt(12.0)
    return InputDistribution("uniform-box", center, spread, box_lo, box_hi)


@dataclass(frozen=True)
class RunConfig:
    """Knobs for one sequential-selection run; all randomness flows from ``seed``."""

    n_a: int
    n_iter_max: int
    pdf_sample_count: int
    seed: int
    n_init: int | None = None
    convergence_patience: int = 3

    def __post_init__(self):
        if self.n_a < 1:
            raise ConfigError("n_a must be >= 1")
        if self.n_iter_max < 1:
            raise ConfigError("n_iter_max must be >= 1")
        if self.pdf_sample_count < 1000:
            raise ConfigError("pdf_sample_count must be >= 1000")
        if self.convergence_patience < 1:
            raise ConfigError("convergence_patience must be >= 1")
        if self.n_init is None:
            object.__setattr__(self, "n_init", self.n_a)
        if self.n_init < 1:
            raise ConfigError("n_init must be >= 1")

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc


def load_run_config(path) -> RunConfig:
    """Read a RunConfig from a JSON key-value file."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed config file {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    return RunConfig.from_dict(data)


def save_run_config(config: RunConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(config.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def seeded_rng(seed: int, stream_label: str) -> np.random.Generator:
    """Deterministic, label-separated random stream.

    Built on the counter-based Philox generator so that streams derived for
    parallel workers reproduce independently of scheduling order.  Identical
    (seed, label) pairs always yield the same draws; distinct labels or
    seeds yield independent streams.
    """
    digest = hashlib.sha256(stream_label.encode("utf-8")).digest()
    label_words = np.frombuffer(digest[:16], dtype="<u4").tolist()
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, *label_words])
    return np.random.Generator(np.random.Philox(ss))


# ---------------------------------------------------------------------------
# Dataset CSV format: header x0,...,x{d-1},y; one sample per row; float64
# decimal text with 17 significant digits so round-trips are bit-exact.
# ---------------------------------------------------------------------------

def format_float(v: float) -> str:
    return np.format_float_scientific(v, precision=16, trim="-")


def write_dataset(path, x, y) -> None:
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape[0] != y.shape[0]:
        raise ConfigError("row mismatch between inputs and outputs")
    header = ",".join([f"x{i}" for i in range(x.shape[1])] + ["y"])
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(header + "\n")
        for row, out in zip(x, y):
            fh.write(",".join(format_float(v) for v in row))
            fh.write("," + format_float(out) + "\n")


def read_dataset(path, allow_missing_y: bool = False):
    """Return (x, y) arrays from a dataset CSV; validates the header shape.

    With ``allow_missing_y`` a file holding only x columns is accepted and
    y comes back as None.
    """
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        cols = header.split(",")
        has_y = cols[-1] == "y"
        if not has_y and not allow_missing_y:
            raise ConfigError(f"bad dataset header in {path}: {header!r}")
        d = len(cols) - 1 if has_y else len(cols)
        if d < 1 or cols[:d] != [f"x{i}" for i in range(d)]:
            raise ConfigError(f"bad dataset header in {path}: {header!r}")
        data = np.loadtxt(fh, delimiter=",", ndmin=2, dtype=np.float64)
    if data.shape[1] != len(cols):
        raise ConfigError(f"dataset rows in {path} disagree with header")
    return data[:, :d], (data[:, d] if has_y else None)


def save_pool(pool: CandidatePool, dataset_path, chosen_path=None) -> None:
    write_dataset(dataset_path, pool.x, pool.y)
    if chosen_path is not None:
        with open(chosen_path, "w", encoding="utf-8") as fh:
            json.dump({"chosen": list(pool.chosen)}, fh)
            fh.write("\n")


def load_pool(dataset_path, chosen_path=None) -> CandidatePool:
    x, y = read_dataset(dataset_path)
    chosen = ()
    if chosen_path is not None:
        with open(chosen_path, "r", encoding="utf-8") as fh:
            chosen = json.load(fh)["chosen"]
    return CandidatePool(x, y, chosen)
