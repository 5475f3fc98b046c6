"""
CLI interface for sslemle: fit estimators, compute gains, run simulations and the data application.
"""
import json
import logging
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, List, Optional

import numpy as np
import pandas as pd
import typer
from rich.console import Console
from rich.logging import RichHandler
from rich.panel import Panel
from rich.table import Table

from .application import DataAppProtocol, run_data_application
from .asymptotics import (
    asymptotic_covariances,
    confidence_region,
    gain_analysis,
    gain_closed_form,
    gain_generic,
    plug_in_model,
)
from .config import ESTIMATE_FROM_MATCHED, RunConfig
from .data import SemiSupervisedSample, load_csv, read_columns
from .errors import ConfigError, SSLEMLEError
from .estimators import (
    RegressionFit,
    fit_dlse,
    fit_logistic_sslemle,
    fit_matched_mle,
    fit_olse,
    fit_sslemle,
    fit_sslemle_unknown_sigma,
    matched_residual_sd,
)
from .models import EstimatorMethod, GaussianDesignModel, UniformDesignModel
from .montecarlo import SimulationSetting, beta_grid, run_coverage, run_logistic_gain, run_setting
from .noise import NoiseDensity

app = typer.Typer(
    name="sslemle",
    help="Semi-supervised linear regression from a small matched sample and a large unmatched one",
    add_completion=False,
)

console = Console()
logger = logging.getLogger("sslemle")


def _setup_logging(verbose: bool) -> None:
    root = logging.getLogger("sslemle")
    root.handlers.clear()
    root.addHandler(RichHandler(console=Console(stderr=True), show_path=False, rich_tracebacks=False))
    root.setLevel(logging.DEBUG if verbose else logging.INFO)
    root.propagate = False


@contextmanager
def _reported_errors() -> Iterator[None]:
    """Turn library errors into one stderr line and the matching exit code."""
    try:
        yield
    except SSLEMLEError as e:
        typer.echo(e.one_line(), err=True)
        raise typer.Exit(e.exit_code)


def _split_list(value: Optional[str]) -> Optional[List[str]]:
    if value is None:
        return None
    return [item.strip() for item in value.split(",") if item.strip()]


def _floats(value: Optional[str], flag: str) -> Optional[List[float]]:
    items = _split_list(value)
    if items is None:
        return None
    try:
        return [float(item) for item in items]
    except ValueError as e:
        raise ConfigError(f"{flag}: expected comma-separated numbers, got '{value}'") from e


def _ints(value: Optional[str], flag: str) -> Optional[List[int]]:
    items = _split_list(value)
    if items is None:
        return None
    try:
        return [int(item) for item in items]
    except ValueError as e:
        raise ConfigError(f"{flag}: expected comma-separated integers, got '{value}'") from e


def _load_config(config_path: Optional[Path], overrides: dict) -> RunConfig:
    return RunConfig.load(config_path).merged(overrides)


def _output_path(config: RunConfig, default: str) -> Path:
    return config.output.path or Path(default)


def _write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _read_fit_sample(config: RunConfig) -> SemiSupervisedSample:
    fit = config.fit
    if fit.matched_path is None:
        raise ConfigError("fit.matched_path is required (use --matched)")
    matched = load_csv(fit.matched_path, config.response_column, config.covariate_columns)
    p = len(config.covariate_columns)
    if fit.unmatched_path is None:
        return SemiSupervisedSample(matched.x, matched.y, np.empty((0, p)), np.empty(0))
    if fit.unmatched_response_path is None:
        unmatched = load_csv(fit.unmatched_path, config.response_column, config.covariate_columns)
        return SemiSupervisedSample(matched.x, matched.y, unmatched.x, unmatched.y)
    unmatched_x = read_columns(fit.unmatched_path, config.covariate_columns)
    unmatched_y = read_columns(fit.unmatched_response_path, [config.response_column])[:, 0]
    return SemiSupervisedSample(matched.x, matched.y, unmatched_x, unmatched_y)


def _noise_for(config: RunConfig, sample: SemiSupervisedSample) -> NoiseDensity:
    scale = config.noise.scale
    if scale == ESTIMATE_FROM_MATCHED:
        scale = matched_residual_sd(sample, with_intercept=config.fit.intercept)
        logger.info(f"Noise sd estimated from matched residuals: {scale:.6g}")
    return NoiseDensity.standardized(config.noise.alpha, float(scale))


def _attach_ellipsoid(fit: RegressionFit, sample: SemiSupervisedSample, noise: NoiseDensity, level: float, report):
    """Plug-in confidence ellipsoid for slope-only SSLEMLE and matched fits."""
    if fit.intercept is not None or sample.m <= sample.p:
        return report
    covariates = np.vstack([sample.matched_x, sample.unmatched_x])
    model = plug_in_model(fit.beta, covariates, noise)
    if fit.method is EstimatorMethod.SSLEMLE:
        if sample.n == 0:
            return report
        covariance = asymptotic_covariances(model, sample.m / sample.n, numeric=noise.alpha != 2.0).sigma_ssl_tilde
    else:
        covariance = asymptotic_covariances(model, 1.0).sigma_mmle
    report.ellipsoid = confidence_region(fit, covariance, level, sample.m).to_report()
    return report


def _print_fit(report) -> None:
    table = Table(show_header=True, header_style="bold magenta")
    table.add_column("Coefficient", style="cyan")
    table.add_column("Estimate", justify="right", style="green")
    if report.intercept is not None:
        table.add_row("intercept", f"{report.intercept:.6g}")
    for k, value in enumerate(report.beta, start=1):
        table.add_row(f"beta_{k}", f"{value:.6g}")
    console.print(table)


@app.command()
def fit(
    config_path: Optional[Path] = typer.Option(None, "--config", "-c", help="JSON run configuration"),
    matched: Optional[Path] = typer.Option(None, "--matched", help="CSV of matched (linked) rows"),
    unmatched: Optional[Path] = typer.Option(None, "--unmatched", help="CSV of unmatched covariates (and responses)"),
    unmatched_responses: Optional[Path] = typer.Option(None, "--unmatched-responses", help="CSV of unmatched responses"),
    response: Optional[str] = typer.Option(None, "--response", help="Response column name"),
    covariates: Optional[str] = typer.Option(None, "--covariates", help="Comma-separated covariate columns"),
    estimator: Optional[str] = typer.Option(None, "--estimator", "-e", help="sslemle, mmle, olse, dlse or logistic"),
    intercept: Optional[bool] = typer.Option(None, "--intercept/--no-intercept", help="Fit an intercept"),
    alpha: Optional[float] = typer.Option(None, "--alpha", help="Noise shape exponent (2 Gaussian, 1 Laplace)"),
    scale: Optional[str] = typer.Option(None, "--scale", help="Noise sd or 'estimate-from-matched'"),
    unknown_sigma: Optional[bool] = typer.Option(None, "--unknown-sigma/--known-sigma", help="Estimate sigma jointly"),
    level: Optional[float] = typer.Option(None, "--level", help="Confidence ellipsoid level"),
    seed: Optional[int] = typer.Option(None, "--seed", help="Seed for optimizer restarts"),
    threads: Optional[int] = typer.Option(None, "--threads", help="Worker cap (no effect on results)"),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="Output JSON report"),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Debug logging"),
) -> None:
    """Fit an estimator on CSV data and write a JSON report."""
    _setup_logging(verbose)
    with _reported_errors():
        config = _load_config(
            config_path,
            {
                "seed": seed,
                "threads": threads,
                "response_column": response,
                "covariate_columns": _split_list(covariates),
                "noise": {"alpha": alpha, "scale": scale},
                "fit": {
                    "matched_path": matched,
                    "unmatched_path": unmatched,
                    "unmatched_response_path": unmatched_responses,
                    "estimator": estimator,
                    "intercept": intercept,
                    "unknown_sigma": unknown_sigma,
                    "level": level,
                },
                "output": {"path": out},
            },
        )
        sample = _read_fit_sample(config)
        settings = config.fit
        optimizer = config.optimizer.build(seed=config.seed or 0, n_jobs=config.threads)
        console.print(f"[bold blue]Fitting {settings.estimator} with m={sample.m}, n={sample.n}, p={sample.p}[/bold blue]")

        if settings.estimator == "olse":
            result = fit_olse(sample, with_intercept=settings.intercept)
            noise = None
        elif settings.estimator == "logistic":
            result = fit_logistic_sslemle(sample, optimizer, with_intercept=settings.intercept)
            noise = None
        elif settings.unknown_sigma:
            if settings.estimator != "sslemle":
                raise ConfigError("fit.unknown_sigma is only available for the sslemle estimator")
            result = fit_sslemle_unknown_sigma(sample, config.noise.alpha, optimizer, with_intercept=settings.intercept)
            noise = None
        else:
            noise = _noise_for(config, sample)
            if settings.estimator == "sslemle":
                result = fit_sslemle(sample, noise, optimizer, with_intercept=settings.intercept)
            elif settings.estimator == "mmle":
                result = fit_matched_mle(sample, noise, optimizer, with_intercept=settings.intercept)
            else:
                if settings.intercept:
                    raise ConfigError("fit.intercept is not supported for the dlse estimator")
                result = fit_dlse(sample, noise, optimizer)

        report = result.to_report()
        if noise is not None and settings.estimator in ("sslemle", "mmle"):
            report = _attach_ellipsoid(result, sample, noise, settings.level, report)
        elif settings.estimator == "olse" and config.noise.scale != ESTIMATE_FROM_MATCHED:
            report = _attach_ellipsoid(result, sample, _noise_for(config, sample), settings.level, report)

        path = _output_path(config, "fit_report.json")
        _write_json(path, report.model_dump(mode="json"))
        _print_fit(report)
        for warning in report.warnings:
            console.print(f"[yellow]{warning}[/yellow]")
        console.print(f"[green]Report saved to {path}[/green]")


def _gain_model(config: RunConfig):
    section = config.gain
    beta0 = np.asarray(section.beta0, dtype=float)
    p = beta0.shape[0]
    mu = np.asarray(section.mu_x, dtype=float) if section.mu_x is not None else np.zeros(p)
    sigma = np.asarray(section.sigma_x, dtype=float) if section.sigma_x is not None else np.eye(p)
    if section.law == "gaussian":
        return GaussianDesignModel(beta0, mu, sigma, section.sigma_eps, config.noise.alpha)
    half = np.sqrt(3.0 * np.diag(sigma))
    return UniformDesignModel(beta0, mu - half, mu + half, section.sigma_eps, config.noise.alpha)


@app.command()
def gain(
    config_path: Optional[Path] = typer.Option(None, "--config", "-c", help="JSON run configuration"),
    beta0: Optional[str] = typer.Option(None, "--beta0", help="Comma-separated true coefficients"),
    mu: Optional[str] = typer.Option(None, "--mu", help="Comma-separated covariate mean"),
    sigma_eps: Optional[float] = typer.Option(None, "--sigma-eps", help="Noise standard deviation"),
    lam: Optional[float] = typer.Option(None, "--lambda", help="Ratio m/n in (0, 1)"),
    alpha: Optional[float] = typer.Option(None, "--alpha", help="Noise shape exponent"),
    law: Optional[str] = typer.Option(None, "--law", help="gaussian or uniform covariates"),
    numeric: Optional[bool] = typer.Option(None, "--numeric/--closed-form", help="Force quadrature"),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="Output JSON report"),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Debug logging"),
) -> None:
    """Compute the statistical gain of a population model."""
    _setup_logging(verbose)
    with _reported_errors():
        config = _load_config(
            config_path,
            {
                "noise": {"alpha": alpha},
                "gain": {
                    "beta0": _floats(beta0, "--beta0"),
                    "mu_x": _floats(mu, "--mu"),
                    "sigma_eps": sigma_eps,
                    "lam": lam,
                    "law": law,
                    "numeric": numeric,
                },
                "output": {"path": out},
            },
        )
        model = _gain_model(config)
        lam_value = config.gain.lam
        closed = isinstance(model, GaussianDesignModel) and model.alpha == 2.0 and not config.gain.numeric
        matrix = gain_generic(asymptotic_covariances(model, lam_value, numeric=not closed))
        payload = {"matrix": matrix.model_dump(mode="json")}
        if closed:
            report = gain_closed_form(model, lam_value)
            payload["closed_form"] = report.model_dump(mode="json")
            if model.rho is None:
                payload["unimodality"] = gain_analysis(lam_value).model_dump(mode="json")
        else:
            report = matrix.model_copy(update={"eta": model.eta})
        payload["gain"] = report.gain

        path = _output_path(config, "gain_report.json")
        _write_json(path, payload)
        console.print(
            Panel(
                f"Gain: {report.gain:.6f}\nSource: {report.source}\nlambda: {lam_value:g}\neta: {model.eta:.6g}",
                title="Statistical gain",
                border_style="blue",
            )
        )
        console.print(f"[green]Report saved to {path}[/green]")


@app.command()
def simulate(
    seed: int = typer.Option(..., "--seed", help="Master seed (required)"),
    config_path: Optional[Path] = typer.Option(None, "--config", "-c", help="JSON run configuration"),
    kind: Optional[str] = typer.Option(None, "--kind", help="table, coverage or logistic"),
    setting: Optional[int] = typer.Option(None, "--setting", help="Simulation table index 1..6"),
    lam: Optional[float] = typer.Option(None, "--lambda", help="Ratio m/n"),
    n: Optional[int] = typer.Option(None, "--n", help="Unmatched sample size"),
    replications: Optional[int] = typer.Option(None, "--replications", "-r", help="Replications per point"),
    points: Optional[str] = typer.Option(None, "--points", help="Comma-separated beta-grid indices 0..14"),
    threads: Optional[int] = typer.Option(None, "--threads", help="Worker cap (no effect on results)"),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="Output CSV"),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Debug logging"),
) -> None:
    """Run a seeded Monte Carlo experiment and write a CSV."""
    _setup_logging(verbose)
    with _reported_errors():
        config = _load_config(
            config_path,
            {
                "seed": seed,
                "threads": threads,
                "simulation": {
                    "kind": kind,
                    "index": setting,
                    "lam": lam,
                    "n": n,
                    "replications": replications,
                    "points": _ints(points, "--points"),
                },
                "output": {"path": out},
            },
        )
        section = config.simulation
        path = _output_path(config, f"simulation_{section.kind}.csv")

        if section.kind == "logistic":
            rows = run_logistic_gain(
                m=section.logistic_m,
                n_values=section.logistic_n,
                replications=section.replications,
                seed=seed,
                n_jobs=config.threads,
            )
            frame = pd.DataFrame([vars(row) for row in rows])
        else:
            study = SimulationSetting(
                index=section.index,
                lam=section.lam,
                n=section.n,
                replications=section.replications,
                points=tuple(section.points),
                seed=seed,
                perturbation_sd=section.perturbation_sd,
                restarts=section.restarts,
            )
            if section.kind == "coverage":
                coverage = run_coverage(study, section.coverage_point, section.level, n_jobs=config.threads)
                beta0 = beta_grid(seed, section.perturbation_sd)[section.coverage_point]
                frame = pd.DataFrame(
                    [
                        {
                            "setting_index": study.index,
                            "point": section.coverage_point,
                            "snr": study.model(beta0).snr,
                            "level": section.level,
                            "coverage": coverage,
                            "replications": study.replications,
                            "n": study.n,
                            "m": study.m,
                        }
                    ]
                )
            else:
                frame = run_setting(study, n_jobs=config.threads).to_frame()

        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False, float_format="%.10g")
        table = Table(show_header=True, header_style="bold magenta")
        for column in frame.columns:
            table.add_column(str(column), justify="right")
        for record in frame.itertuples(index=False):
            table.add_row(*[f"{value:.4g}" if isinstance(value, float) else str(value) for value in record])
        console.print(table)
        console.print(f"[green]Results saved to {path}[/green]")


@app.command("data-app")
def data_app(
    seed: int = typer.Option(..., "--seed", help="Master seed (required)"),
    config_path: Optional[Path] = typer.Option(None, "--config", "-c", help="JSON run configuration"),
    dataset: Optional[Path] = typer.Option(None, "--dataset", help="Power-plant style CSV"),
    replications: Optional[int] = typer.Option(None, "--replications", "-r", help="Number of random splits"),
    threads: Optional[int] = typer.Option(None, "--threads", help="Worker cap (no effect on results)"),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="Per-n summary CSV"),
    coefficients_out: Optional[Path] = typer.Option(None, "--coefficients-out", help="Per-replication coefficients CSV"),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Debug logging"),
) -> None:
    """Compare the semi-supervised fit with matched OLS on repeated train/test splits."""
    _setup_logging(verbose)
    with _reported_errors():
        config = _load_config(
            config_path,
            {
                "seed": seed,
                "threads": threads,
                "dataset_path": dataset,
                "data_app": {"replications": replications},
                "output": {"path": out, "coefficients_path": coefficients_out},
            },
        )
        if config.dataset_path is None:
            raise ConfigError("dataset_path is required (use --dataset or SSLEMLE_DATASET_PATH)")
        block = load_csv(config.dataset_path, config.response_column, config.covariate_columns)
        section = config.data_app
        protocol = DataAppProtocol(
            matched_count=section.matched_count,
            unmatched_counts=tuple(section.unmatched_counts),
            replications=section.replications,
            train_fraction=section.train_fraction,
            noise_sd=section.noise_sd,
            restarts=section.restarts,
        )
        result = run_data_application(block, protocol, seed, n_jobs=config.threads)
        path = _output_path(config, "data_app_summary.csv")
        result.write(path, config.output.coefficients_path)

        console.print(
            Panel(
                f"Residual sd: {result.prefit.residual_sd:.4f}\nR^2: {result.prefit.r_squared:.4f}\n"
                f"Noise sd used: {result.noise_sd:.4f}",
                title="Full-data OLS",
                border_style="blue",
            )
        )
        table = Table(show_header=True, header_style="bold magenta")
        for column in ("n", "wins", "win fraction", "MSE ratio", "failed"):
            table.add_column(column, justify="right")
        for row in result.rows:
            table.add_row(str(row.n), str(row.wins), f"{row.win_fraction:.3f}", f"{row.mse_ratio:.4f}", str(row.failed))
        console.print(table)
        console.print(f"[green]Summary saved to {path}[/green]")


if __name__ == "__main__":
    app()
