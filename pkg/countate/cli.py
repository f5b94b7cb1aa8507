"""
countate CLI interface.

JSON summaries go to stdout, bulk results to files, and everything meant for a
human (panels, tables, progress, logs) to stderr.

"The command line is where the real work happens. Everything else is just theater." — schema.cx
"""

from __future__ import annotations

import json
import logging
import math
import sys
from collections.abc import Callable, Iterator
from contextlib import contextmanager
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any

import click
import numpy as np
import pandas as pd
import typer
from dotenv import load_dotenv
from rich.table import Table

from . import __version__
from .benchmark import BenchmarkConfig, BenchmarkRow, parse_engines, run_benchmark
from .closed_form import AteVariant, fit_closed_form
from .config import ConfigManager, Engine, FitSettings
from .divergence import divergence_table
from .gibbs import run_chains
from .imputation import BetaSource, estimate_ate
from .manifest import RunManifest
from .models import Chain, Dataset, Overdispersion, ZeroPolicy
from .oracle import run_oracle
from .pipeline import (
    BinningRule,
    arm_dispersion,
    balance_rows,
    bin_outcome,
    dichotomize,
    groupwise_ate,
    load_csv,
    load_truth_csv,
    numeric_column,
    read_table,
)
from .random_streams import RngStream
from .rich_utils import (
    console,
    format_estimate,
    print_error,
    print_header,
    print_info,
    print_key_value,
    print_success,
    print_warning,
    progress_bar,
    rows_table,
    setup_logging,
)
from .synthetic import SimModel, SimSpec, generate, true_ate, write_dataset_csv, write_truth_csv
from .validation import (
    CountateError,
    NumericalError,
    ValidationError,
    parse_float_list,
    validate_dataset,
    validate_format_option,
)

# Load environment variables from .env file if it exists
# "Configuration is just organized secrets." — schema.cx
load_dotenv()

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

THREADS_ENV = "COUNTATE_THREADS"

app = typer.Typer(
    name="countate",
    help="Average treatment effects for count outcomes by fast Bayesian imputation.",
    add_completion=False,
)
diagnose_app = typer.Typer(help="Accuracy certificates of the normal approximation.")
app.add_typer(diagnose_app, name="diagnose")


class UsageError(typer.BadParameter):
    """Bad combination of command-line options."""

    exit_code = EXIT_USAGE


def _split_names(text: str | None) -> list[str] | None:
    if text is None:
        return None
    return [p.strip() for p in text.split(",") if p.strip()]


def _pair(text: str | None, name: str) -> list[float] | None:
    if text is None:
        return None
    values = parse_float_list(text, name)
    if len(values) != 2:
        raise UsageError(f"{name} takes two numbers 'shape,scale', got {text!r}")
    return values


def _exit_code(error: CountateError) -> int:
    return EXIT_NUMERIC if isinstance(error, NumericalError) else EXIT_DATA


def _report(error: CountateError) -> int:
    """Print the error where a human will see it and return the matching exit code."""
    if console.quiet:
        typer.echo(f"Error: {error}", err=True)
    else:
        print_error(str(error))
    return _exit_code(error)


def _emit(summary: dict[str, Any], path: Path | None = None) -> None:
    """Write the JSON summary to stdout (one line) and optionally to a file."""
    typer.echo(json.dumps(summary, default=_json_default))
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(summary, indent=2, default=_json_default) + "\n", encoding="utf-8")


def _json_default(value: Any) -> Any:
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"Not JSON serializable: {type(value).__name__}")


def _finite_or_none(value: float | None) -> float | None:
    return value if value is not None and math.isfinite(value) else None


@contextmanager
def _manifested(manifest: RunManifest, path: Path | None) -> Iterator[RunManifest]:
    """
    Run a command body under its manifest: ok on return, failed on any error.

    The manifest is written in both cases unless ``path`` is None. Library errors
    leave as ``typer.Exit`` with their exit code.
    """
    try:
        yield manifest
    except CountateError as e:
        manifest.fail(e)
        raise typer.Exit(_report(e)) from e
    except typer.BadParameter as e:
        manifest.fail(e)
        raise
    else:
        manifest.succeed()
    finally:
        if path is not None:
            manifest.write(path)


@contextmanager
def _sweep_progress(description: str, total: int) -> Iterator[Callable[[int], None] | None]:
    """Progress callback on the stderr console, or None when quiet."""
    if console.quiet:
        yield None
        return
    with progress_bar() as bar:
        task = bar.add_task(description, total=total)
        yield lambda done: bar.update(task, completed=done)


def version_callback(value: bool) -> None:
    """Print version and exit."""
    if value:
        typer.echo(f"countate {__version__}")
        raise typer.Exit()


@app.callback()
def main(
    version: bool | None = typer.Option(
        None,
        "--version",
        callback=version_callback,
        is_eager=True,
        help="Show version and exit.",
    ),
    verbose: bool = typer.Option(False, "--verbose", "-V", help="Debug logging on stderr."),
    quiet: bool = typer.Option(False, "--quiet", "-q", help="No panels, tables or progress."),
) -> None:
    """
    countate - average treatment effects for count outcomes.

    "In a world of missing counterfactuals, impute responsibly." — schema.cx
    """
    console.quiet = quiet
    setup_logging(verbose)


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


@app.command()
def simulate(
    out: Path = typer.Option(..., "--out", "-o", help="Observed-data CSV to write (y, w, x1..xk)"),
    model: SimModel = typer.Option(SimModel.SIMPLE, "--model", "-m", help="Coefficient set"),
    n: int = typer.Option(1000, "--n", help="Number of units (even)"),
    sigma: float = typer.Option(0.0, "--sigma", help="Standard deviation of log ε; 0 for Poisson"),
    seed: int = typer.Option(0, "--seed", help="Master random seed"),
    beta_c: str | None = typer.Option(None, "--beta-c", help="Custom control coefficients, e.g. '3.2,0.3'"),
    beta_t: str | None = typer.Option(None, "--beta-t", help="Custom treated coefficients, e.g. '3.7,0.8'"),
    truth_out: Path | None = typer.Option(
        None, "--truth-out", help="Potential-outcomes CSV (default: <out>.truth.csv)"
    ),
    summary_out: Path | None = typer.Option(None, "--summary-out", help="Also write the JSON summary here"),
    manifest_out: Path | None = typer.Option(
        None, "--manifest-out", help="Run manifest JSON (default: <out>.simulate-manifest.json)"
    ),
) -> None:
    """
    Simulate a completely randomized experiment with both potential outcomes.

    Example:
        countate simulate --model complex --n 100000 --sigma 0.5 --seed 7 --out data.csv
    """
    truth_path = truth_out or out.with_name(f"{out.stem}.truth.csv")
    manifest = RunManifest(
        command="simulate",
        config={"model": model.value, "n": n, "sigma": sigma, "beta_c": beta_c, "beta_t": beta_t},
        seed=seed,
        version=__version__,
    )
    manifest_path = manifest_out or out.with_name(f"{out.stem}.simulate-manifest.json")

    with _manifested(manifest, manifest_path):
        if n < 2 or n % 2:
            raise UsageError(f"--n must be a positive even number, got {n}")
        if (beta_c or beta_t) and model is not SimModel.CUSTOM:
            raise UsageError("--beta-c/--beta-t need --model custom")
        spec = SimSpec(
            model=model,
            n=n,
            overdispersion_sigma=sigma,
            seed=seed,
            beta_c=tuple(parse_float_list(beta_c, "--beta-c")) if beta_c else None,
            beta_t=tuple(parse_float_list(beta_t, "--beta-t")) if beta_t else None,
        )
        manifest.config = spec.to_dict()
        with manifest.phase("generate"):
            dataset = generate(spec)
        with manifest.phase("write"):
            manifest.add_output("data", write_dataset_csv(dataset, out))
            manifest.add_output("truth", write_truth_csv(dataset, truth_path))

        ate = true_ate(dataset)
        print_success(f"Simulated {dataset.N} units ({dataset.n_treated} treated)")
        print_key_value("True ATE", f"{ate:.6f}")
        print_key_value("Data", out)
        print_key_value("Truth", truth_path)
        if summary_out is not None:
            manifest.add_output("summary", summary_out)
        _emit(
            {
                "command": "simulate",
                "version": __version__,
                **spec.to_dict(),
                "k": spec.k,
                "n_treated": dataset.n_treated,
                "true_ate": ate,
                "outputs": {"data": str(out), "truth": str(truth_path)},
                "manifest": str(manifest_path),
            },
            summary_out,
        )


# ---------------------------------------------------------------------------
# fit
# ---------------------------------------------------------------------------


@dataclass
class FitOutputs:
    """Optional result files of ``fit``."""

    draws: Path | None = None
    ate: Path | None = None
    units: Path | None = None
    groups: Path | None = None
    group_col: str | None = None
    summary: Path | None = None


def _resolve_settings(
    profile: str | None, config: Path | None, overrides: dict[str, Any]
) -> FitSettings:
    """Profile or settings file first, then explicit flags on top."""
    if profile and config:
        raise UsageError("--profile and --config are mutually exclusive")
    if profile:
        base = ConfigManager().load_profile(profile)
        if base is None:
            raise UsageError(f"Profile '{profile}' not found")
    elif config:
        base = FitSettings.from_yaml(config)
    else:
        base = FitSettings()
    closed_form = base.closed_form if overrides.get("closed_form") is None else overrides["closed_form"]
    model = overrides.get("model") or base.model
    if closed_form and model != Overdispersion.POISSON.value:
        raise UsageError(f"--closed-form requires --model poisson, got {model}")
    return base.merged(overrides)


def _with_truth(dataset: Dataset, truth: Path, delimiter: str) -> Dataset:
    y0, y1 = load_truth_csv(truth, delimiter)
    if y0.shape[0] != dataset.N:
        raise ValidationError(f"Truth file has {y0.shape[0]} rows for {dataset.N} units")
    full = Dataset(
        X=dataset.X,
        W=dataset.W,
        Y_obs=dataset.Y_obs,
        Y0=y0,
        Y1=y1,
        covariate_names=dataset.covariate_names,
    )
    validate_dataset(full)
    return full


def _sample(dataset: Dataset, settings: FitSettings) -> Chain:
    """Posterior draws from the chosen engine; chain ``c`` uses stream ``(seed, c)``."""
    spec = settings.model_spec()
    if Engine(settings.engine) is Engine.APPROX:
        config = settings.gibbs_config()
        with _sweep_progress("Gibbs sweeps", config.iterations * settings.chains) as progress:
            return run_chains(dataset, spec, config, settings.chains, settings.threads, progress)

    config_exact = settings.oracle_config()
    master = RngStream(settings.seed)
    chains = []
    for c in range(settings.chains):
        with _sweep_progress(f"Exact sampler, chain {c}", config_exact.iterations) as progress:
            chain = run_oracle(dataset, spec, config_exact, master.split(c), progress)
        logger.info("Chain %d acceptance: beta=%.3f eps=%s", c, chain.accept_beta, chain.accept_eps)
        chains.append(chain)
    return chains[0] if len(chains) == 1 else Chain.concatenate(chains)


def _group_labels(data: Path, settings: FitSettings, column: str) -> list[Any]:
    frame = read_table(data, settings.delimiter)
    if column not in frame.columns:
        raise ValidationError(f"missing column '{column}'")
    return frame[column].tolist()


def _run_fit(
    data: Path, settings: FitSettings, truth: Path | None, outs: FitOutputs, manifest: RunManifest
) -> dict[str, Any]:
    spec = settings.model_spec()
    schema = settings.csv_schema()
    if outs.group_col:
        schema = replace(schema, exclude=(outs.group_col,))
    with manifest.phase("load"):
        dataset = load_csv(data, schema)
        if truth is not None:
            dataset = _with_truth(dataset, truth, settings.delimiter)

    engine = "closed-form" if settings.closed_form else settings.engine
    summary: dict[str, Any] = {
        "command": "fit",
        "version": __version__,
        "data": str(data),
        "n": dataset.N,
        "k": dataset.k,
        "model": settings.model,
        "engine": engine,
        "seed": settings.seed,
        "arm_dispersion": [row.to_dict() for row in arm_dispersion(dataset)],
    }
    if not console.quiet:
        print_header("countate fit", f"{data} · N={dataset.N}, k={dataset.k}, engine={engine}")
        console.print(rows_table("Observed counts by arm", summary["arm_dispersion"]))

    if settings.closed_form:
        if outs.draws or outs.ate or outs.groups:
            raise UsageError("--draws-out, --ate-out and --groups-out need a sampler; drop --closed-form")
        with manifest.phase("closed_form"):
            result = fit_closed_form(dataset, spec, AteVariant(settings.variant))
        summary.update(result.to_dict())
        summary["ate_sd"] = _finite_or_none(result.sd)
        if outs.units:
            units = pd.DataFrame({"unit": np.arange(dataset.N), "gamma": result.gamma, "h": result.h})
            units["nb_mean"] = units["gamma"] * units["h"]
            units.to_csv(outs.units, index=False)
            manifest.add_output("units", outs.units)
        mean, sd = result.mean, result.sd
    else:
        if outs.units:
            raise UsageError("--units-out is only available with --closed-form")
        if outs.groups and not outs.group_col:
            raise UsageError("--groups-out needs --group-col")
        with manifest.phase("sample"):
            chain = _sample(dataset, settings)
        with manifest.phase("impute"):
            # chains own streams 0..chains-1
            estimate = estimate_ate(
                dataset,
                chain,
                RngStream(settings.seed).split(settings.chains),
                spec,
                beta_source=BetaSource(settings.beta_source),
                threads=settings.threads,
                keep_imputations=outs.groups is not None,
            )
        summary.update(estimate.to_dict())
        summary["beta_source"] = settings.beta_source
        if chain.accept_beta is not None:
            summary["accept_beta"] = chain.accept_beta
            summary["accept_eps"] = chain.accept_eps
        with manifest.phase("write"):
            if outs.draws:
                chain.to_frame().to_csv(outs.draws, index=False)
                manifest.add_output("draws", outs.draws)
            if outs.ate:
                pd.DataFrame({"r": np.arange(estimate.R), "ate": estimate.per_rep}).to_csv(outs.ate, index=False)
                manifest.add_output("ate", outs.ate)
            if outs.groups and outs.group_col:
                assert estimate.imputations is not None
                labels = _group_labels(data, settings, outs.group_col)
                rows = groupwise_ate(dataset, estimate.imputations, labels)
                pd.DataFrame([r.to_dict() for r in rows]).to_csv(outs.groups, index=False)
                manifest.add_output("groups", outs.groups)
                summary["groups"] = [r.to_dict() for r in rows]
        mean, sd = estimate.mean, estimate.sd

    if dataset.has_truth:
        summary["true_ate"] = true_ate(dataset)
        summary["abs_error"] = abs(mean - summary["true_ate"])
    if outs.summary:
        manifest.add_output("summary", outs.summary)
    if not console.quiet:
        console.print(f"\n  ATE: {format_estimate(mean, sd)}")
    return summary


@app.command()
def fit(
    data: Path = typer.Argument(..., help="Dataset CSV with a header row"),
    y_col: str | None = typer.Option(None, "--y-col", help="Outcome column [y]"),
    w_col: str | None = typer.Option(None, "--w-col", help="Treatment column [w]"),
    x_cols: str | None = typer.Option(None, "--x-cols", help="Comma-separated covariates [all others]"),
    delimiter: str | None = typer.Option(None, "--delimiter", help="Field delimiter [,]"),
    model: Overdispersion | None = typer.Option(None, "--model", "-m", help="Count model [poisson]"),
    engine: Engine | None = typer.Option(None, "--engine", "-e", help="Posterior sampler [approx]"),
    closed_form: bool | None = typer.Option(
        None, "--closed-form/--no-closed-form", help="Closed-form ATE (poisson only), no sampling"
    ),
    variant: AteVariant | None = typer.Option(None, "--variant", help="Closed-form moments [nb]"),
    iters: int | None = typer.Option(None, "--iters", help="Sampler iterations per chain [2000]"),
    burn_in: int | None = typer.Option(None, "--burn-in", help="Discarded initial iterations [500]"),
    thin: int | None = typer.Option(None, "--thin", help="Keep every n-th draw [1]"),
    chains: int | None = typer.Option(None, "--chains", help="Independent chains [1]"),
    seed: int | None = typer.Option(None, "--seed", help="Master random seed [0]"),
    threads: int | None = typer.Option(
        None, "--threads", "-t", envvar=THREADS_ENV, help="Worker threads [all cores]"
    ),
    sigma_beta_sq: float | None = typer.Option(None, "--sigma-beta-sq", help="Prior variance of β [1e6]"),
    ig_c: str | None = typer.Option(None, "--ig-c", help="Control inverse-Gamma prior 'shape,scale' [2,1]"),
    ig_t: str | None = typer.Option(None, "--ig-t", help="Treated inverse-Gamma prior 'shape,scale' [2,1]"),
    zero_policy: ZeroPolicy | None = typer.Option(None, "--zero-policy", help="Zero counts [drop-row]"),
    beta_source: BetaSource | None = typer.Option(
        None, "--beta-source", help="Coefficients used per imputation [chain]"
    ),
    draws_out: Path | None = typer.Option(None, "--draws-out", help="Retained draws CSV"),
    ate_out: Path | None = typer.Option(None, "--ate-out", help="Per-imputation ATE CSV"),
    units_out: Path | None = typer.Option(None, "--units-out", help="Per-unit γ, h CSV (closed form)"),
    group_col: str | None = typer.Option(None, "--group-col", help="Column holding unit groups"),
    groups_out: Path | None = typer.Option(None, "--groups-out", help="Group-wise ATE CSV"),
    truth: Path | None = typer.Option(None, "--truth", help="Potential-outcomes CSV from simulate"),
    summary_out: Path | None = typer.Option(None, "--summary-out", help="Also write the JSON summary here"),
    manifest_out: Path | None = typer.Option(
        None, "--manifest-out", help="Run manifest JSON (default: <data>.fit-manifest.json)"
    ),
    profile: str | None = typer.Option(None, "--profile", "-p", help="Saved settings profile"),
    config: Path | None = typer.Option(None, "--config", "-c", help="Settings YAML file"),
) -> None:
    """
    Estimate the ATE of a dataset.

    Settings come from --profile or --config, with explicit flags taking
    precedence. The manifest is written even when the fit fails.

    Example:
        countate fit data.csv --model lognormal-poisson --iters 3000 --burn-in 1000
        countate fit data.csv --closed-form --units-out units.csv
    """
    overrides = {
        "y_col": y_col,
        "w_col": w_col,
        "x_cols": _split_names(x_cols),
        "delimiter": delimiter,
        "model": model.value if model else None,
        "engine": engine.value if engine else None,
        "closed_form": closed_form,
        "variant": variant.value if variant else None,
        "iters": iters,
        "burn_in": burn_in,
        "thin": thin,
        "chains": chains,
        "seed": seed,
        "threads": threads,
        "sigma_beta_sq": sigma_beta_sq,
        "ig_c": _pair(ig_c, "--ig-c"),
        "ig_t": _pair(ig_t, "--ig-t"),
        "zero_policy": zero_policy.value if zero_policy else None,
        "beta_source": beta_source.value if beta_source else None,
    }
    outs = FitOutputs(draws_out, ate_out, units_out, groups_out, group_col, summary_out)
    manifest = RunManifest(command="fit", config={"data": str(data)}, seed=seed, version=__version__)
    manifest_path = manifest_out or data.with_name(f"{data.stem}.fit-manifest.json")

    with _manifested(manifest, manifest_path):
        settings = _resolve_settings(profile, config, overrides)
        manifest.config = {"data": str(data), "truth": str(truth) if truth else None, **settings.to_dict()}
        manifest.seed = settings.seed
        summary = _run_fit(data, settings, truth, outs, manifest)

    summary["seconds"] = manifest.phases
    summary["manifest"] = str(manifest_path)
    file_summary = {k: v for k, v in summary.items() if k not in ("seconds", "manifest")}
    typer.echo(json.dumps(summary, default=_json_default))
    if summary_out is not None:
        summary_out.parent.mkdir(parents=True, exist_ok=True)
        summary_out.write_text(json.dumps(file_summary, indent=2, default=_json_default) + "\n", encoding="utf-8")
    print_success("Fit complete")


# ---------------------------------------------------------------------------
# benchmark
# ---------------------------------------------------------------------------


@app.command()
def benchmark(
    out: Path = typer.Option(..., "--out", "-o", help="Benchmark rows CSV"),
    model: SimModel = typer.Option(SimModel.SIMPLE, "--model", "-m", help="Simulation model"),
    n_grid: str = typer.Option("500,1000", "--n-grid", help="Comma-separated dataset sizes"),
    reps: int = typer.Option(3, "--reps", help="Replications per size"),
    engines: str = typer.Option("closed-form,approx", "--engines", help="closed-form, approx, exact"),
    sigma: float = typer.Option(0.0, "--sigma", help="Overdispersion of the simulated data"),
    iters: int = typer.Option(1000, "--iters", help="Gibbs iterations"),
    burn_in: int = typer.Option(200, "--burn-in", help="Gibbs burn-in"),
    oracle_iters: int = typer.Option(20000, "--oracle-iters", help="Exact sampler iterations"),
    oracle_burn_in: int | None = typer.Option(
        None, "--oracle-burn-in", help="Exact sampler burn-in [oracle iterations / 5]"
    ),
    timeout: float = typer.Option(600.0, "--timeout", help="Seconds allowed per engine run"),
    exact_max_n: int = typer.Option(2000, "--exact-max-n", help="Skip the exact engine above this N"),
    seed: int = typer.Option(0, "--seed", help="Master random seed"),
    manifest_out: Path | None = typer.Option(
        None, "--manifest-out", help="Run manifest JSON (default: <out>.benchmark-manifest.json)"
    ),
) -> None:
    """
    Time the engines and measure |ATE − true ATE| over an N grid.

    Example:
        countate benchmark --n-grid 500,10000 --reps 20 --out mae.csv
    """
    manifest = RunManifest(command="benchmark", config={"n_grid": n_grid}, seed=seed, version=__version__)
    manifest_path = manifest_out or out.with_name(f"{out.stem}.benchmark-manifest.json")

    with _manifested(manifest, manifest_path):
        try:
            grid = tuple(int(v) for v in parse_float_list(n_grid, "--n-grid"))
            config = BenchmarkConfig(
                model=model,
                n_grid=grid,
                replications=reps,
                engines=parse_engines(_split_names(engines) or []),
                sigma=sigma,
                iters=iters,
                burn_in=burn_in,
                oracle_iters=oracle_iters,
                oracle_burn_in=oracle_burn_in,
                timeout=timeout,
                exact_max_n=exact_max_n,
                seed=seed,
            )
        except ValidationError as e:
            raise UsageError(str(e)) from e
        manifest.config = config.to_dict()

        total = len(config.n_grid) * config.replications * len(config.engines)
        with manifest.phase("sweep"):
            if console.quiet:
                result = run_benchmark(config)
            else:
                with progress_bar() as bar:
                    task = bar.add_task("Benchmark cells", total=total)

                    def advance(row: BenchmarkRow) -> None:
                        bar.advance(task)

                    result = run_benchmark(config, advance)
        with manifest.phase("write"):
            manifest.add_output("rows", result.write_csv(out))

    summary = result.summary()
    if not console.quiet:
        console.print(rows_table("Benchmark summary", summary.to_dict(orient="records")))
    unfinished = sum(row.status in ("timeout", "failed") for row in result.rows)
    if unfinished:
        print_warning(f"{unfinished} cells timed out or failed")
    print_success(f"{len(result.rows)} rows written to {out}")
    _emit(
        {
            "command": "benchmark",
            "version": __version__,
            "config": config.to_dict(),
            "rows": len(result.rows),
            "summary": summary.to_dict(orient="records"),
            "outputs": {"rows": str(out)},
            "manifest": str(manifest_path),
        }
    )


# ---------------------------------------------------------------------------
# diagnose
# ---------------------------------------------------------------------------


@diagnose_app.command("divergence")
def diagnose_divergence(
    y_grid: str = typer.Option("2,5,10,50,500", "--y-grid", help="Comma-separated counts y > 0"),
    out: Path | None = typer.Option(None, "--out", "-o", help="Table file to write"),
    format: str = typer.Option("csv", "--format", "-f", help="Table format: csv or json"),
    empirical: bool = typer.Option(
        True, "--empirical/--no-empirical", help="Quadrature TV column (y >= 1 only)"
    ),
    manifest_out: Path | None = typer.Option(
        None, "--manifest-out", help="Run manifest JSON (default: <out>.diagnose-manifest.json)"
    ),
) -> None:
    """
    KL divergence, its leading term and TV bounds between the normal and
    log-Gamma laws of a log count.

    Without --out or --manifest-out nothing is written to disk.

    Example:
        countate diagnose divergence --y-grid 2,5,10,50,500 --out divergence.csv
    """
    manifest = RunManifest(
        command="diagnose divergence",
        config={"y_grid": y_grid, "format": format, "empirical": empirical},
        seed=None,
        version=__version__,
    )
    if manifest_out is None and out is not None:
        manifest_out = out.with_name(f"{out.stem}.diagnose-manifest.json")

    with _manifested(manifest, manifest_out):
        try:
            fmt = validate_format_option(format)
            grid = parse_float_list(y_grid, "--y-grid")
            with manifest.phase("evaluate"):
                rows = [r.to_dict() for r in divergence_table(grid, empirical=empirical)]
        except ValidationError as e:
            raise UsageError(str(e)) from e

        outputs: dict[str, str] = {}
        if out is not None:
            with manifest.phase("write"):
                out.parent.mkdir(parents=True, exist_ok=True)
                if fmt == "csv":
                    pd.DataFrame(rows).to_csv(out, index=False)
                else:
                    out.write_text(json.dumps(rows, indent=2) + "\n", encoding="utf-8")
            outputs["table"] = str(out)
            manifest.add_output("table", out)

    if not console.quiet:
        console.print(rows_table("Normal vs log-Gamma", rows, digits=6))
    summary: dict[str, Any] = {
        "command": "diagnose divergence", "version": __version__, "rows": rows, "outputs": outputs,
    }
    if manifest_out is not None:
        summary["manifest"] = str(manifest_out)
    _emit(summary)


# ---------------------------------------------------------------------------
# balance and bin
# ---------------------------------------------------------------------------


@app.command()
def balance(
    data: Path = typer.Argument(..., help="CSV with treatment (or exposure) and covariates"),
    out: Path = typer.Option(..., "--out", "-o", help="Balance table CSV"),
    w_col: str = typer.Option("w", "--w-col", help="Treatment column"),
    x_cols: str | None = typer.Option(None, "--x-cols", help="Comma-separated covariates [all others]"),
    exposure_col: str | None = typer.Option(
        None, "--exposure-col", help="Continuous exposure to dichotomize into the treatment"
    ),
    threshold: float | None = typer.Option(None, "--threshold", help="Treated iff exposure >= threshold"),
    matched_col: str | None = typer.Option(
        None, "--matched-col", help="0/1 column marking a matched subset to report as well"
    ),
    delimiter: str = typer.Option(",", "--delimiter", help="Field delimiter"),
) -> None:
    """
    Standardized mean differences of covariates between arms.

    Example:
        countate balance counties.csv --exposure-col ccr --threshold 70 --out balance.csv
    """
    if (exposure_col is None) != (threshold is None):
        raise UsageError("--exposure-col and --threshold go together")
    try:
        frame = read_table(data, delimiter)
        treatment_col = exposure_col or w_col
        if treatment_col not in frame.columns:
            raise ValidationError(f"missing column '{treatment_col}'")
        if exposure_col is not None:
            assert threshold is not None
            w = dichotomize(numeric_column(frame, exposure_col), threshold)
        else:
            w = numeric_column(frame, w_col).astype(np.int64)
        reserved = {treatment_col, w_col, matched_col}
        names = _split_names(x_cols) or [c for c in frame.columns if c not in reserved]
        for name in names:
            if name not in frame.columns:
                raise ValidationError(f"missing column '{name}'")
        covariates = np.column_stack([numeric_column(frame, c) for c in names])

        samples = [("all", np.ones(len(frame), dtype=bool))]
        if matched_col is not None:
            if matched_col not in frame.columns:
                raise ValidationError(f"missing column '{matched_col}'")
            samples.append(("matched", numeric_column(frame, matched_col) == 1))
        records = []
        for label, mask in samples:
            for row in balance_rows(covariates[mask], w[mask], names):
                records.append({"sample": label, **row.to_dict()})
    except CountateError as e:
        raise typer.Exit(_report(e)) from e

    out.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(records).to_csv(out, index=False)
    if not console.quiet:
        console.print(rows_table("Covariate balance", records))
    _emit({"command": "balance", "version": __version__, "rows": records, "outputs": {"table": str(out)}})


@app.command("bin")
def bin_command(
    data: Path = typer.Argument(..., help="CSV holding the column to bin"),
    column: str = typer.Option(..., "--column", help="Column of real values"),
    rule: Path = typer.Option(..., "--rule", help="Binning rule YAML {edges, open_left, open_right}"),
    out: Path = typer.Option(..., "--out", "-o", help="CSV with <column>_bin appended"),
    delimiter: str = typer.Option(",", "--delimiter", help="Field delimiter"),
) -> None:
    """
    Map a real-valued column to integer labels 1..n.

    Example:
        countate bin lalonde.csv --column re78 --rule earnings.yaml --out lalonde_binned.csv
    """
    try:
        binning = BinningRule.from_yaml(rule)
        frame = read_table(data, delimiter)
        if column not in frame.columns:
            raise ValidationError(f"missing column '{column}'")
        labels = bin_outcome(numeric_column(frame, column), binning)
    except CountateError as e:
        raise typer.Exit(_report(e)) from e

    frame[f"{column}_bin"] = labels
    out.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(out, sep=delimiter, index=False)
    counts = {int(k): int(v) for k, v in zip(*np.unique(labels, return_counts=True))}
    print_success(f"Binned {len(frame)} values into {binning.interval_count} labels")
    _emit(
        {
            "command": "bin",
            "version": __version__,
            "rule": binning.to_dict(),
            "label_counts": counts,
            "outputs": {"data": str(out)},
        }
    )


# ---------------------------------------------------------------------------
# config profiles
# ---------------------------------------------------------------------------


@app.command("config-save")
def config_save(
    name: str = typer.Argument(..., help="Profile name"),
    model: Overdispersion = typer.Option(Overdispersion.POISSON, "--model", "-m", help="Count model"),
    engine: Engine = typer.Option(Engine.APPROX, "--engine", "-e", help="Posterior sampler"),
    closed_form: bool = typer.Option(False, "--closed-form", help="Closed-form ATE (poisson only)"),
    iters: int = typer.Option(2000, "--iters", help="Sampler iterations per chain"),
    burn_in: int = typer.Option(500, "--burn-in", help="Discarded initial iterations"),
    thin: int = typer.Option(1, "--thin", help="Keep every n-th draw"),
    chains: int = typer.Option(1, "--chains", help="Independent chains"),
    seed: int = typer.Option(0, "--seed", help="Master random seed"),
    sigma_beta_sq: float = typer.Option(1000.0**2, "--sigma-beta-sq", help="Prior variance of β"),
    ig_c: str = typer.Option("2,1", "--ig-c", help="Control inverse-Gamma prior 'shape,scale'"),
    ig_t: str = typer.Option("2,1", "--ig-t", help="Treated inverse-Gamma prior 'shape,scale'"),
    zero_policy: ZeroPolicy = typer.Option(ZeroPolicy.DROP_ROW, "--zero-policy", help="Zero counts"),
    beta_source: BetaSource = typer.Option(BetaSource.CHAIN, "--beta-source", help="Imputation β"),
    y_col: str = typer.Option("y", "--y-col", help="Outcome column"),
    w_col: str = typer.Option("w", "--w-col", help="Treatment column"),
    x_cols: str | None = typer.Option(None, "--x-cols", help="Comma-separated covariates"),
    description: str = typer.Option("", "--description", help="Profile description"),
) -> None:
    """
    Save fit settings as a named profile.

    Example:
        countate config-save overdispersed --model lognormal-poisson --iters 5000 --burn-in 1000
    """
    try:
        settings = FitSettings(
            name=name,
            y_col=y_col,
            w_col=w_col,
            x_cols=_split_names(x_cols),
            model=model.value,
            sigma_beta_sq=sigma_beta_sq,
            ig_c=_pair(ig_c, "--ig-c") or [2.0, 1.0],
            ig_t=_pair(ig_t, "--ig-t") or [2.0, 1.0],
            zero_policy=zero_policy.value,
            engine=engine.value,
            closed_form=closed_form,
            beta_source=beta_source.value,
            iters=iters,
            burn_in=burn_in,
            thin=thin,
            chains=chains,
            seed=seed,
            description=description,
        )
    except ValidationError as e:
        raise UsageError(str(e)) from e

    manager = ConfigManager()
    manager.save_profile(settings)
    print_success(f"Profile '{name}' saved")
    console.print(f"   [dim]Config path: {manager.get_profile_path()}[/dim]")


@app.command("config-show")
def config_show(name: str = typer.Argument(..., help="Profile name")) -> None:
    """Display a saved profile; its settings also go to stdout as JSON."""
    settings = ConfigManager().load_profile(name)
    if settings is None:
        print_error(f"Profile '{name}' not found")
        raise typer.Exit(EXIT_USAGE)

    table = Table(title=f"Profile: {name}", border_style="cyan")
    table.add_column("Setting", style="bold cyan")
    table.add_column("Value")
    for key, value in settings.to_dict().items():
        table.add_row(key, "[dim]default[/dim]" if value is None else str(value))
    console.print(table)
    _emit(settings.to_dict())


@app.command("config-list")
def config_list() -> None:
    """List saved profiles."""
    manager = ConfigManager()
    profiles = manager.list_profiles()
    if not profiles:
        print_info("No profiles saved yet")
        _emit({"profiles": []})
        return

    table = Table(title="Saved Profiles", border_style="cyan")
    table.add_column("Name", style="bold")
    table.add_column("Model", style="cyan")
    table.add_column("Engine", style="green")
    table.add_column("Description", style="dim", max_width=40)
    table.add_column("Updated", style="dim")
    for p in profiles:
        table.add_row(p.name, p.model, "closed-form" if p.closed_form else p.engine, p.description, p.updated_at[:10])
    console.print(table)
    _emit({"profiles": [p.name for p in profiles]})


@app.command("config-delete")
def config_delete(
    name: str = typer.Argument(..., help="Profile name to delete"),
    force: bool = typer.Option(False, "--force", "-f", help="Skip confirmation"),
) -> None:
    """Delete a saved profile."""
    if not force and not typer.confirm(f"Delete profile '{name}'?", err=True):
        print_info("Cancelled")
        return
    if not ConfigManager().delete_profile(name):
        print_error(f"Profile '{name}' not found")
        raise typer.Exit(EXIT_USAGE)
    print_success(f"Profile '{name}' deleted")


def run() -> None:
    """
    Console-script entry point.

    Maps outcomes to exit codes: 0 ok, 1 usage, 2 data error, 3 numerical error.
    """
    try:
        result = app(standalone_mode=False)
    except click.UsageError as e:
        e.show()
        sys.exit(EXIT_USAGE)
    except click.Abort:
        typer.echo("Aborted!", err=True)
        sys.exit(EXIT_USAGE)
    except CountateError as e:
        sys.exit(_report(e))
    sys.exit(result if isinstance(result, int) else EXIT_OK)
