"""Command-line front end for dataset generation, campaigns, and scoring.

Every command that writes artifacts drops a manifest.json next to them
recording the arguments, seed, and library versions, and writes files
atomically (temp file + rename) so interrupted runs never leave partial
CSVs behind.  Exit codes: 0 success, 2 bad configuration or arguments,
3 numeric or runtime failure.
"""

from __future__ import annotations

import functools
import json
import sys
from dataclasses import asdict
from datetime import datetime, timezone
from pathlib import Path

import click
import numpy as np
import scipy

from . import __version__
from .core import (
    RunConfig,
    read_dataset,
    seeded_rng,
    write_dataset,
)
from .density import fit_kde
from .errors import ConfigError, FomoError
from .experiments import (
    GP_STUDY,
    MMT_DESK,
    SweepSpec,
    build_pools,
    make_surrogate_factory,
    read_rows,
    run_fomo_replicates,
    run_random_replicates,
    run_sweep,
    summarize_rows,
    write_rows,
)
from .metrics import build_test_suite, log_pdf_error, normalized_mse
from .problems import MmtConfig, Problem, mmt_problem, piecewise_problem
from .samplers import DesignSpec, design_matrix

EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _fail_gracefully(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (ConfigError, click.UsageError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_CONFIG)
        except FomoError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_RUNTIME)

    return wrapper


def _write_manifest(out_dir: Path, command: str, params: dict, outputs: list) -> None:
    manifest = {
        "command": command,
        "parameters": params,
        "outputs": [str(p) for p in outputs],
        "versions": {
            "package": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        "created": datetime.now(timezone.utc).isoformat(),
    }
    out_dir.mkdir(parents=True, exist_ok=True)
    tmp = out_dir / "manifest.json.tmp"
    tmp.write_text(json.dumps(manifest, indent=2, default=str) + "\n")
    tmp.replace(out_dir / "manifest.json")


def _make_problem(name: str, grid: int, dt: float, horizon: float,
                  nonlinearity: float) -> Problem:
    if name == "piecewise":
        return piecewise_problem()
    if name == "mmt":
        return mmt_problem(MmtConfig(n_x=grid, dt=dt, t_final=horizon,
                                     nonlinearity_coeff=nonlinearity))
    raise ConfigError(f"unknown problem: {name}")


def _default_pdf_scheme(problem: str, pdf_scheme) -> str:
    if pdf_scheme is not None:
        return pdf_scheme
    return GP_STUDY["pdf_scheme"] if problem == "piecewise" else MMT_DESK["pdf_scheme"]


_problem_option = click.option(
    "--problem",
    type=click.Choice(["piecewise", "mmt"]),
    required=True,
    help="Which benchmark map to use.",
)
_grid_option = click.option(
    "--grid", type=int, default=MMT_DESK["grid"]["n_x"], show_default=True,
    help="Wave-model grid size (mmt only).",
)
_dt_option = click.option(
    "--dt", type=float, default=MMT_DESK["grid"]["dt"], show_default=True,
    help="Wave-model time step (mmt only).",
)
_horizon_option = click.option(
    "--horizon", type=float, default=MMT_DESK["grid"]["t_final"],
    show_default=True, help="Wave-model evolution time (mmt only).",
)
_nonlinearity_option = click.option(
    "--nonlinearity", type=float, default=MMT_DESK["grid"]["nonlinearity_coeff"],
    show_default=True, help="Wave-model cubic coefficient (mmt only).",
)
_pdf_scheme_option = click.option(
    "--pdf-scheme", type=click.Choice(["uniform", "lhs", "gaussian"]),
    default=None, help="Design for the output-density test set "
    "(default: uniform for piecewise, lhs for mmt).",
)
_workers_option = click.option(
    "--workers", type=int, default=1, show_default=True,
    help="Process-pool size for replicate fan-out.",
)


def _load_config(ctx, param, path):
    """Config file supplies per-command defaults; explicit flags win."""
    if not path:
        return
    try:
        loaded = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise click.UsageError(f"cannot read config file {path}: {exc}")
    if not isinstance(loaded, dict):
        raise click.UsageError(f"config file {path} must hold a JSON object")
    ctx.default_map = loaded


@click.group()
@click.version_option(__version__)
@click.option("--config", type=click.Path(exists=True), callback=_load_config,
              expose_value=False, is_eager=True,
              help="JSON file of defaults, keyed by subcommand.")
def main():
    """Guided data selection for expensive maps with heavy-tailed outputs."""


@main.command()
@_problem_option
@click.option("--count", type=int, required=True, help="Number of points.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option(
    "--scheme", type=click.Choice(["lhs", "uniform", "gaussian"]), default="lhs",
    show_default=True,
)
@_grid_option
@_dt_option
@_horizon_option
@_nonlinearity_option
@click.option("--out", "out_path", type=click.Path(), required=True)
@_fail_gracefully
def generate(problem, count, seed, scheme, grid, dt, horizon, nonlinearity,
             out_path):
    """Sample an input design, evaluate the true map, write x,y CSV."""
    prob = _make_problem(problem, grid, dt, horizon, nonlinearity)
    rng = seeded_rng(seed, f"generate-{scheme}")
    spec = DesignSpec(count, scheme, prob.distribution)
    x = design_matrix(spec, rng)
    y = prob.evaluate(x)
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_dataset(out, x, y)
    _write_manifest(
        out.parent,
        "generate",
        dict(problem=problem, count=count, seed=seed, scheme=scheme, grid=grid,
             dt=dt, horizon=horizon, nonlinearity=nonlinearity),
        [out],
    )
    click.echo(f"wrote {count} evaluated points to {out}")


@main.command()
@_problem_option
@click.option("--inputs", "in_path", type=click.Path(exists=True), required=True,
              help="CSV of input points (x columns; y column ignored if present).")
@_grid_option
@_dt_option
@_horizon_option
@_nonlinearity_option
@click.option("--out", "out_path", type=click.Path(), required=True)
@_fail_gracefully
def simulate(problem, in_path, grid, dt, horizon, nonlinearity, out_path):
    """Evaluate the true map on the inputs of an existing CSV."""
    prob = _make_problem(problem, grid, dt, horizon, nonlinearity)
    x, _ = read_dataset(in_path, allow_missing_y=True)
    y = prob.evaluate(x)
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_dataset(out, x, y)
    _write_manifest(
        out.parent,
        "simulate",
        dict(problem=problem, inputs=str(in_path), grid=grid, dt=dt,
             horizon=horizon, nonlinearity=nonlinearity),
        [out],
    )
    click.echo(f"evaluated {x.shape[0]} points -> {out}")


@main.command()
@_problem_option
@click.option("--sizes", default="5:61", show_default=True,
              help="Training sizes as start:stop:step (python slice semantics).")
@click.option("--replicates", type=int, default=GP_STUDY["sweep_replicates"],
              show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--surrogate", type=click.Choice(["gp", "ensemble"]), default="gp",
              show_default=True)
@click.option("--sampling", type=click.Choice(["uniform", "lhs"]),
              default="uniform", show_default=True,
              help="How each replicate's master training design is drawn.")
@click.option("--n-mse", type=int, default=GP_STUDY["n_mse"], show_default=True)
@click.option("--n-pdf", type=int, default=GP_STUDY["n_pdf"], show_default=True)
@_pdf_scheme_option
@click.option("--prefactor", is_flag=True, help="Divide e_mse by (n-1).")
@_grid_option
@_dt_option
@_horizon_option
@_nonlinearity_option
@_workers_option
@click.option("--out", "out_dir", type=click.Path(), required=True)
@_fail_gracefully
def sweep(problem, sizes, replicates, seed, surrogate, sampling, n_mse, n_pdf,
          pdf_scheme, prefactor, grid, dt, horizon, nonlinearity, workers,
          out_dir):
    """Surrogate error versus training-set size over random nested draws."""
    prob = _make_problem(problem, grid, dt, horizon, nonlinearity)
    spec = SweepSpec(problem=problem, surrogate=surrogate,
                     sample_sizes=tuple(_parse_sizes(sizes)),
                     replicates=replicates, sampling=sampling, seed=seed)
    out = Path(out_dir)
    suite = build_test_suite(prob, n_mse=n_mse, n_pdf=n_pdf, seed=seed,
                             cache_dir=out / "cache",
                             pdf_scheme=_default_pdf_scheme(problem, pdf_scheme))
    rows = run_sweep(prob, spec, suite, prefactor=prefactor, workers=workers)
    write_rows(out / "sweep_rows.csv", rows)
    clean = [r for r in rows if not r["failed"]]
    for metric in ("e_mse", "e_log_pdf"):
        summary = summarize_rows(clean, "size", metric)
        if summary:
            write_rows(out / f"sweep_summary_{metric}.csv", summary)
    _write_manifest(
        out,
        "sweep",
        dict(problem=problem, sizes=list(spec.sample_sizes),
             replicates=replicates, seed=seed,
             surrogate=surrogate, sampling=sampling, n_mse=n_mse, n_pdf=n_pdf,
             prefactor=prefactor, grid=grid, dt=dt, horizon=horizon,
             nonlinearity=nonlinearity, workers=workers),
        [out / "sweep_rows.csv"],
    )
    failed = len(rows) - len(clean)
    note = f" ({failed} cells failed)" if failed else ""
    click.echo(
        f"swept {len(spec.sample_sizes)} sizes x {replicates} replicates{note} -> {out}"
    )


def _parse_sizes(text: str):
    try:
        parts = [int(p) for p in text.split(":")]
        if len(parts) == 1:
            return parts
        return list(range(*parts))
    except ValueError as exc:
        raise ConfigError(f"bad --sizes value: {text}") from exc


@main.command()
@_problem_option
@click.option("--pool-size", type=int, default=MMT_DESK["pool_size"],
              show_default=True)
@click.option("--pool-scheme", type=click.Choice(["uniform", "lhs", "gaussian"]),
              default=None, help="Pool design (defaults per problem).")
@click.option("--surrogate", type=click.Choice(["gp", "ensemble"]), required=True)
@click.option("--members", type=int, default=MMT_DESK["surrogate"]["n_members"],
              show_default=True)
@click.option("--epochs", type=int, default=MMT_DESK["surrogate"]["epochs"],
              show_default=True)
@click.option("--hidden", default="64,64,64,64", show_default=True,
              help="Comma-separated hidden layer widths (ensemble only).")
@click.option("--noise", type=float, default=GP_STUDY["selection_kwargs"]["noise_variance"],
              show_default=True, help="GP observation-noise variance.")
@click.option("--n-a", type=int, default=MMT_DESK["run"]["n_a"], show_default=True)
@click.option("--n-init", type=int, default=None,
              help="Initial picks (defaults to --n-a).")
@click.option("--iterations", type=int, default=MMT_DESK["run"]["n_iter_max"],
              show_default=True)
@click.option("--pdf-samples", type=int, default=MMT_DESK["run"]["pdf_sample_count"],
              show_default=True)
@click.option("--replicates", type=int, default=1, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--n-mse", type=int, default=MMT_DESK["n_mse"], show_default=True)
@click.option("--n-pdf", type=int, default=0, show_default=True)
@_pdf_scheme_option
@click.option("--baseline/--no-baseline", default=True, show_default=True,
              help="Also run the random-selection baseline.")
@click.option("--dump-scores", is_flag=True,
              help="Write per-candidate acquisition scores for every iteration.")
@click.option("--prefactor", is_flag=True)
@_grid_option
@_dt_option
@_horizon_option
@_nonlinearity_option
@_workers_option
@click.option("--out", "out_dir", type=click.Path(), required=True)
@_fail_gracefully
def fomo(problem, pool_size, pool_scheme, surrogate, members, epochs, hidden,
         noise, n_a, n_init, iterations, pdf_samples, replicates, seed,
         n_mse, n_pdf, pdf_scheme, baseline, dump_scores, prefactor, grid, dt,
         horizon, nonlinearity, workers, out_dir):
    """Run the guided selection loop (plus a random baseline) on pools."""
    prob = _make_problem(problem, grid, dt, horizon, nonlinearity)
    out = Path(out_dir)
    if pool_scheme is None:
        pool_scheme = (GP_STUDY if problem == "piecewise" else MMT_DESK)["design_scheme"]
    pools = build_pools(prob, pool_size, replicates, seed, scheme=pool_scheme,
                        cache_dir=out / "cache")
    suite = build_test_suite(prob, n_mse=n_mse, n_pdf=n_pdf, seed=seed,
                             cache_dir=out / "cache",
                             pdf_scheme=_default_pdf_scheme(problem, pdf_scheme))
    factory_kwargs = dict(n_members=members, epochs=epochs,
                          hidden=tuple(int(w) for w in hidden.split(",")))
    if surrogate == "gp":
        factory_kwargs["noise_variance"] = noise
    factory = make_surrogate_factory(surrogate, **factory_kwargs)
    config = RunConfig(
        n_a=n_a, n_iter_max=iterations, pdf_sample_count=pdf_samples, seed=seed,
        n_init=n_init if n_init is not None else n_a,
    )
    score_rows = [] if dump_scores else None
    rows, results = run_fomo_replicates(
        pools, prob, config, factory, suite, replicates, prefactor,
        score_rows=score_rows, workers=workers,
    )
    write_rows(out / "fomo_history.csv", rows)
    chosen = {f"replicate_{i}": list(r.pool.chosen) for i, r in enumerate(results)}
    reasons = {f"replicate_{i}": r.reason for i, r in enumerate(results)}
    (out / "chosen.json.tmp").write_text(
        json.dumps({"chosen": chosen, "reasons": reasons}, indent=2) + "\n"
    )
    (out / "chosen.json.tmp").replace(out / "chosen.json")
    outputs = [out / "fomo_history.csv", out / "chosen.json"]
    if score_rows:
        write_rows(out / "fomo_scores.csv", score_rows)
        outputs.append(out / "fomo_scores.csv")
    if baseline:
        base_rows = run_random_replicates(
            pools, prob, config, factory, suite, replicates, prefactor
        )
        write_rows(out / "random_history.csv", base_rows)
        outputs.append(out / "random_history.csv")
    _write_manifest(
        out,
        "fomo",
        dict(problem=problem, pool_size=pool_size, pool_scheme=pool_scheme,
             surrogate=surrogate, members=members, epochs=epochs, hidden=hidden,
             noise=noise, config=config.to_dict(), replicates=replicates,
             n_mse=n_mse, n_pdf=n_pdf, baseline=baseline, prefactor=prefactor,
             grid=grid, dt=dt, horizon=horizon, nonlinearity=nonlinearity,
             workers=workers),
        outputs,
    )
    final = [len(r.pool.chosen) for r in results]
    click.echo(
        f"selection finished: chosen {final} of {pool_size} "
        f"({', '.join(r.reason for r in results)}) -> {out}"
    )


@main.command()
@click.option("--data", "data_path", type=click.Path(exists=True), required=True,
              help="CSV whose y column holds samples of the quantity.")
@click.option("--weights-from", type=click.Choice(["none", "piecewise", "mmt"]),
              default="none", show_default=True,
              help="Weight samples by this problem's input density at x.")
@_grid_option
@_dt_option
@_horizon_option
@_nonlinearity_option
@click.option("--out", "out_path", type=click.Path(), required=True)
@_fail_gracefully
def pdf(data_path, weights_from, grid, dt, horizon, nonlinearity, out_path):
    """Kernel density of a dataset's outputs, written as a y,density CSV."""
    x, y = read_dataset(data_path)
    weights = None
    if weights_from != "none":
        prob = _make_problem(weights_from, grid, dt, horizon, nonlinearity)
        weights = prob.distribution.density(x)
    est = fit_kde(y, weights)
    rows = [
        {"y": float(g), "density": float(d)}
        for g, d in zip(est.eval_grid, est.grid_density)
    ]
    out = Path(out_path)
    write_rows(out, rows)
    _write_manifest(
        out.parent,
        "pdf",
        dict(data=str(data_path), weights_from=weights_from,
             bandwidth=est.bandwidth, grid=grid, dt=dt, horizon=horizon,
             nonlinearity=nonlinearity),
        [out],
    )
    click.echo(f"density on {len(rows)} grid points -> {out}")


@main.command()
@click.option("--pred", "pred_path", type=click.Path(exists=True), required=True)
@click.option("--truth", "truth_path", type=click.Path(exists=True), required=True)
@click.option("--prefactor", is_flag=True)
@click.option("--out", "out_path", type=click.Path(), default=None)
@_fail_gracefully
def metrics(pred_path, truth_path, prefactor, out_path):
    """Score predictions against truth: normalized MSE and output-PDF error.

    Both CSVs must share the same x rows; the PDF error compares plain
    KDEs of the two y columns.
    """
    x_pred, y_pred = read_dataset(pred_path)
    x_true, y_true = read_dataset(truth_path)
    if x_pred.shape != x_true.shape or not np.allclose(x_pred, x_true):
        raise ConfigError("prediction and truth files cover different inputs")
    report = {
        "e_mse": normalized_mse(y_true, y_pred, prefactor),
        "mse_prefactor": prefactor,
        "e_log_pdf": log_pdf_error(fit_kde(y_pred), fit_kde(y_true)),
        "n": int(y_true.size),
    }
    text = json.dumps(report, indent=2)
    if out_path:
        out = Path(out_path)
        out.parent.mkdir(parents=True, exist_ok=True)
        tmp = out.with_suffix(out.suffix + ".tmp")
        tmp.write_text(text + "\n")
        tmp.replace(out)
    click.echo(text)


@main.command("plot-data")
@click.option("--history", "history_paths", type=click.Path(exists=True),
              multiple=True, required=True,
              help="History CSVs from select/sweep runs (repeatable).")
@click.option("--x-key", default="n_chosen", show_default=True)
@click.option("--y-key", default="e_mse", show_default=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@_fail_gracefully
def plot_data(history_paths, x_key, y_key, out_dir):
    """Reduce run histories to plot-ready median/min/max curves."""
    out = Path(out_dir)
    outputs = []
    for path in history_paths:
        rows = read_rows(path)
        if rows and x_key not in rows[0]:
            raise ConfigError(f"{path} has no column {x_key}")
        summary = summarize_rows(rows, x_key, y_key)
        target = out / f"{Path(path).stem}_{y_key}_curve.csv"
        write_rows(target, summary)
        outputs.append(target)
    _write_manifest(
        out,
        "plot-data",
        dict(history=[str(p) for p in history_paths], x_key=x_key, y_key=y_key),
        outputs,
    )
    click.echo(f"wrote {len(outputs)} curve files -> {out}")


if __name__ == "__main__":
    main()
