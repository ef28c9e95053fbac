"""Experiment drivers: error-vs-size sweeps and selection campaigns.

These functions glue the pieces together for the two study problems: train
surrogates on growing training sets drawn at random (the sweep exposes the
non-monotone error-vs-data bump) and run the guided selection loop against
random-selection baselines at matched budgets.  Rows are plain dicts so
they serialize straight to CSV.
"""

from __future__ import annotations

import csv
import multiprocessing
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .core import CandidatePool, RunConfig, read_dataset, seeded_rng, write_dataset, format_float
from .ensemble import train_ensemble
from .errors import ConfigError, FomoError
from .gp import fit_gp
from .metrics import TestSuite, evaluate_surrogate
from .nn import AdamSettings, MlpArchitecture
from .problems import Problem
from .samplers import DesignSpec, design_matrix
from .selection import fomo_run


def make_surrogate_factory(
    kind: str,
    n_members: int = 2,
    epochs: int = 250,
    hidden=(64, 64, 64, 64),
    restarts: int = 10,
    learning_rate: float = 1e-3,
    noise_variance: float = 0.0,
):
    """Factory with the (x, y, seed, iteration) signature the driver expects."""
    if kind == "gp":

        def factory(x, y, seed, iteration):
            rng = seeded_rng(seed, f"gp-fit-iter-{iteration}")
            return fit_gp(x, y, rng, restarts=restarts, noise_variance=noise_variance)

    elif kind == "ensemble":

        def factory(x, y, seed, iteration):
            arch = MlpArchitecture(x.shape[1], tuple(hidden))
            return train_ensemble(
                x,
                y,
                n_members,
                arch,
                epochs,
                seed,
                settings=AdamSettings(learning_rate=learning_rate),
                stream_label=f"iter-{iteration}",
            )

    else:
        raise ConfigError(f"unknown surrogate kind: {kind}")
    return factory


def sweep_design(problem: Problem, count: int, rep: int, seed: int, scheme: str = "uniform"):
    """Master design for sweep replicate ``rep``.

    Selection studies rebuild their candidate pools from this same stream,
    so guided runs select from exactly the points the sweep trained on.
    """
    rng = seeded_rng(seed, f"sweep-design-rep-{rep}")
    return design_matrix(DesignSpec(count, scheme, problem.distribution), rng)


def build_pool(
    problem: Problem,
    count: int,
    seed: int,
    rep: int = 0,
    scheme: str = "lhs",
    cache_path=None,
) -> CandidatePool:
    """Evaluated candidate pool for one replicate (cached as CSV)."""
    if cache_path is not None:
        cache_path = Path(cache_path)
        if cache_path.exists():
            x, y = read_dataset(cache_path)
            if x.shape == (count, problem.dim):
                return CandidatePool(x, y)
    x = sweep_design(problem, count, rep, seed, scheme)
    y = problem.evaluate(x)
    if cache_path is not None:
        cache_path.parent.mkdir(parents=True, exist_ok=True)
        write_dataset(cache_path, x, y)
    return CandidatePool(x, y)


def build_pools(
    problem: Problem,
    count: int,
    replicates: int,
    seed: int,
    scheme: str = "lhs",
    cache_dir=None,
) -> list:
    """One independently drawn pool per replicate."""
    pools = []
    for rep in range(replicates):
        cache = None
        if cache_dir is not None:
            cache = Path(cache_dir) / f"{problem.name}-pool-{scheme}-n{count}-s{seed}-r{rep}.csv"
        pools.append(build_pool(problem, count, seed, rep, scheme, cache))
    return pools


# ---------------------------------------------------------------------------
# error-vs-training-size sweep


@dataclass(frozen=True)
class SweepSpec:
    """Protocol for one error-versus-training-size study."""

    problem: str
    surrogate: str
    sample_sizes: tuple
    replicates: int
    sampling: str = "uniform"
    seed: int = 0

    def __post_init__(self):
        sizes = tuple(int(n) for n in self.sample_sizes)
        object.__setattr__(self, "sample_sizes", sizes)
        if not sizes or any(b <= a for a, b in zip(sizes, sizes[1:])):
            raise ConfigError("sample_sizes must be strictly increasing")
        if sizes[0] < 2:
            raise ConfigError("sweep sizes must be at least 2")
        if self.replicates < 1:
            raise ConfigError("replicates must be >= 1")
        if self.surrogate not in ("gp", "ensemble"):
            raise ConfigError(f"unknown surrogate kind: {self.surrogate}")
        if self.sampling not in ("uniform", "lhs"):
            raise ConfigError(f"sweep sampling must be uniform or lhs: {self.sampling!r}")


def _sweep_replicate(
    problem: Problem,
    spec: SweepSpec,
    suite: TestSuite,
    prefactor: bool,
    factory_kwargs: dict | None,
    rep: int,
) -> list:
    factory = make_surrogate_factory(spec.surrogate, **(factory_kwargs or {}))
    sizes = spec.sample_sizes
    master = sweep_design(problem, sizes[-1], rep, spec.seed, spec.sampling)
    y = problem.evaluate(master)
    rows = []
    for n in sizes:
        row = {"size": n, "replicate": rep, "e_mse": None, "e_log_pdf": None,
               "wall_time_s": None, "failed": ""}
        start = time.perf_counter()
        try:
            model = factory(master[:n], y[:n], spec.seed + rep, n)
            scores = evaluate_surrogate(model, suite, prefactor)
            row["e_mse"] = scores["e_mse"]
            row["e_log_pdf"] = scores["e_log_pdf"]
        except FomoError as exc:
            row["failed"] = type(exc).__name__
        row["wall_time_s"] = time.perf_counter() - start
        rows.append(row)
    return rows


# worker context for fork-started replicate pools; closures inside Problem
# objects cannot cross a pickle boundary, inherited globals can
_FORK_CTX = {}


def _run_forked(task, args_per_item, workers: int) -> list:
    ctx = multiprocessing.get_context("fork")
    with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
        return list(pool.map(task, args_per_item))


def _sweep_worker(rep: int) -> list:
    return _sweep_replicate(*_FORK_CTX["sweep"], rep)


def run_sweep(
    problem: Problem,
    spec: SweepSpec,
    suite: TestSuite,
    prefactor: bool = False,
    factory_kwargs: dict | None = None,
    workers: int = 1,
) -> list:
    """Surrogate error at each training size, with nested draws per replicate.

    Each replicate draws one master design of max(sample_sizes) points; the
    size-n training set is its first n points, so curves within a replicate
    differ only by data volume.  A failed fit is recorded (metrics empty,
    error class in ``failed``) and the sweep moves on.  Replicates are
    independent; ``workers > 1`` fans them out over a process pool with
    identical results.
    """
    if workers > 1:
        _FORK_CTX["sweep"] = (problem, spec, suite, prefactor, factory_kwargs)
        try:
            chunks = _run_forked(_sweep_worker, range(spec.replicates), workers)
        finally:
            _FORK_CTX.pop("sweep", None)
    else:
        chunks = [
            _sweep_replicate(problem, spec, suite, prefactor, factory_kwargs, rep)
            for rep in range(spec.replicates)
        ]
    return [row for chunk in chunks for row in chunk]


def summarize_rows(rows, x_key: str, y_key: str) -> list:
    """Median/min/max of ``y_key`` grouped by ``x_key`` (None values dropped)."""
    groups = {}
    for row in rows:
        if row[y_key] is None:
            continue
        groups.setdefault(row[x_key], []).append(row[y_key])
    out = []
    for x in sorted(groups):
        vals = np.asarray(groups[x], dtype=np.float64)
        out.append(
            {
                x_key: x,
                "median": float(np.median(vals)),
                "min": float(vals.min()),
                "max": float(vals.max()),
                "count": int(vals.size),
            }
        )
    return out


# ---------------------------------------------------------------------------
# selection campaigns


def _metrics_callback(suite, prefactor):
    last = [time.perf_counter()]

    def callback(iteration, model, active, report):
        scores = evaluate_surrogate(model, suite, prefactor)
        now = time.perf_counter()
        elapsed, last[0] = now - last[0], now
        return {"e_mse": scores["e_mse"], "e_log_pdf": scores["e_log_pdf"],
                "wall_time_s": elapsed}

    return callback


def _score_sink(callback, sink: list, rep: int):
    """Wrap a metrics callback to also log per-candidate acquisition scores."""

    def wrapped(iteration, model, active, report):
        if report is not None:
            chosen = active.chosen_mask()
            log_w = np.log10(np.maximum(report.weights, 1e-300))
            log_var = np.log10(np.maximum(report.variances, 1e-300))
            for idx in range(active.n):
                sink.append(
                    {"replicate": rep, "iteration": iteration, "candidate": idx,
                     "log10_weight": float(log_w[idx]),
                     "log10_variance": float(log_var[idx]),
                     "chosen": int(chosen[idx])}
                )
        return callback(iteration, model, active, report)

    return wrapped


def _pool_for(pools, rep: int) -> CandidatePool:
    if isinstance(pools, CandidatePool):
        return pools
    return pools[rep]


def _fomo_replicate(pools, problem, config, factory, suite, prefactor,
                    capture_scores, rep):
    callback = _metrics_callback(suite, prefactor)
    score_rows = []
    if capture_scores:
        callback = _score_sink(callback, score_rows, rep)
    rep_config = replace(config, seed=config.seed + rep)
    result = fomo_run(
        _pool_for(pools, rep),
        problem.distribution,
        factory,
        rep_config,
        metrics_callback=callback,
    )
    rows = []
    for rec in result.history:
        rows.append(
            {
                "replicate": rep,
                "iteration": rec.iteration,
                "n_chosen": rec.n_chosen,
                "new_count": rec.new_count,
                "e_mse": rec.extra.get("e_mse"),
                "e_log_pdf": rec.extra.get("e_log_pdf"),
                "wall_time_s": rec.extra.get("wall_time_s"),
                "reason": result.reason,
            }
        )
    return rows, result, score_rows


def _fomo_worker(rep: int):
    return _fomo_replicate(*_FORK_CTX["fomo"], rep)


def run_fomo_replicates(
    pools,
    problem: Problem,
    config: RunConfig,
    factory,
    suite: TestSuite,
    replicates: int,
    prefactor: bool = False,
    score_rows: list | None = None,
    workers: int = 1,
):
    """Guided selection, one run per replicate; returns (rows, results).

    ``pools`` is either one shared CandidatePool or a per-replicate sequence,
    so selection studies can reuse the exact pools a sweep trained on.  Pass
    a list as ``score_rows`` to collect per-candidate acquisition scores
    (weight, variance, chosen flag) for every scored iteration.
    """
    capture = score_rows is not None
    args = (pools, problem, config, factory, suite, prefactor, capture)
    if workers > 1:
        _FORK_CTX["fomo"] = args
        try:
            outcomes = _run_forked(_fomo_worker, range(replicates), workers)
        finally:
            _FORK_CTX.pop("fomo", None)
    else:
        outcomes = [_fomo_replicate(*args, rep) for rep in range(replicates)]
    rows, results = [], []
    for rep_rows, result, rep_scores in outcomes:
        rows.extend(rep_rows)
        results.append(result)
        if capture:
            score_rows.extend(rep_scores)
    return rows, results


def run_random_replicates(
    pools,
    problem: Problem,
    config: RunConfig,
    factory,
    suite: TestSuite,
    replicates: int,
    prefactor: bool = False,
):
    """Random-selection baseline at the same addition schedule as the driver."""
    rows = []
    for rep in range(replicates):
        callback = _metrics_callback(suite, prefactor)
        pool = _pool_for(pools, rep)
        n_init = min(config.n_init, pool.n)
        seed = config.seed + rep
        rng = seeded_rng(seed, "random-baseline")
        order = rng.permutation(pool.n)
        active = pool.with_chosen(order[:n_init])
        model = factory(*active.training_arrays(), seed, 0)
        extra = callback(0, model, active, None)
        rows.append(
            {"replicate": rep, "iteration": 0, "n_chosen": n_init, "new_count": n_init,
             "reason": "baseline", **extra}
        )
        for iteration in range(1, config.n_iter_max + 1):
            start = len(active.chosen)
            if start >= pool.n:
                break
            picks = order[start : start + config.n_a]
            active = active.with_chosen(tuple(active.chosen) + tuple(int(i) for i in picks))
            model = factory(*active.training_arrays(), seed, iteration)
            extra = callback(iteration, model, active, None)
            rows.append(
                {"replicate": rep, "iteration": iteration, "n_chosen": len(active.chosen),
                 "new_count": len(picks), "reason": "baseline", **extra}
            )
    return rows


# ---------------------------------------------------------------------------
# row serialization

ROW_FORMATS = {float: format_float}


def write_rows(path, rows, columns=None) -> None:
    if not rows:
        raise ConfigError("no rows to write")
    columns = list(columns or rows[0].keys())
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_format_cell(row.get(c)) for c in columns])
    tmp.replace(path)


def _format_cell(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return format_float(value)
    if isinstance(value, (np.floating,)):
        return format_float(float(value))
    return value


def read_rows(path) -> list:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        rows = []
        for raw in reader:
            row = {}
            for key, val in raw.items():
                if val == "":
                    row[key] = None
                    continue
                try:
                    row[key] = int(val)
                except ValueError:
                    try:
                        row[key] = float(val)
                    except ValueError:
                        row[key] = val
            rows.append(row)
    return rows


def padded_median_by_iteration(rows, key: str) -> list:
    """Per-iteration median across replicates.

    Replicates that stopped early hold their final value, so the curve at
    iteration t reflects the state every run would report if queried then.
    """
    by_rep = {}
    for row in rows:
        by_rep.setdefault(row["replicate"], {})[row["iteration"]] = row[key]
    last = max(max(hist) for hist in by_rep.values())
    medians = []
    for it in range(last + 1):
        vals = []
        for hist in by_rep.values():
            have = [k for k in hist if k <= it]
            if have:
                vals.append(hist[max(have)])
        medians.append(float(np.median(vals)))
    return medians


# ---------------------------------------------------------------------------
# study profiles (desk-scale defaults sized for a laptop-class run)

GP_STUDY = {
    "pool_size": 60,
    "design_scheme": "uniform",
    "sweep_sizes": tuple(range(5, 61)),
    "sweep_replicates": 100,
    "run": dict(n_a=5, n_init=5, n_iter_max=50, pdf_sample_count=10_000),
    # selection fits carry a small noise floor so acquisition can terminate:
    # with exact interpolation the chosen-point variance collapses to jitter
    # scale and the loop sweeps up the whole pool before the front settles.
    "selection_kwargs": dict(noise_variance=1e-6),
    "replicates": 100,
    "n_mse": 100,
    "n_pdf": 100,
    "pdf_scheme": "uniform",
}

MMT_DESK = {
    "pool_size": 2000,
    # pools are drawn from the input distribution itself: box-stratified
    # designs in 8-d put most points at radii the input density never
    # visits, and the trained nets generalize worse than a constant there.
    "design_scheme": "gaussian",
    # medium horizon and unit-strength cubic term keep the coefficient ->
    # wave-height map learnable at desk pool sizes while the output stays
    # heavy-tailed; the t=20 flow at full strength is chaotic enough that
    # 2,000 samples cannot beat a constant-mean predictor. At this horizon
    # and epoch budget the random learning curve bottoms out near n=600 and
    # climbs again toward n=2000, so a well-chosen subset can win outright.
    "grid": dict(n_x=64, dt=5e-3, t_final=4.0, nonlinearity_coeff=-1.0),
    # 50 + 11*50 caps the selected set at 600 points, 30% of the pool
    "run": dict(n_a=50, n_init=50, n_iter_max=11, pdf_sample_count=100_000),
    "surrogate": dict(n_members=2, epochs=100, hidden=(64, 64, 64, 64)),
    "replicates": 5,
    "n_mse": 500,
    "pdf_scheme": "lhs",
}

MMT_PAPER = {
    "pool_size": 20_000,
    "design_scheme": "lhs",
    "grid": dict(n_x=512, dt=1e-3, t_final=20.0, nonlinearity_coeff=-4.0),
    "run": dict(n_a=50, n_init=50, n_iter_max=100, pdf_sample_count=10_000_000),
    "surrogate": dict(n_members=10, epochs=1000, hidden=(250,) * 8),
    "replicates": 25,
    "n_mse": 100_000,
    "pdf_scheme": "lhs",
}
