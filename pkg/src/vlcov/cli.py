import logging
import os
import sys
import tempfile
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import click
import numpy as np
import pandas as pd

from .analytic import CoverageCurve, Scenario, corollary_transform, coverage_curve, coverage_curves, interference_cdf, \
    mean_interference, median_rate, rate_coverage_curves, typical_coverage_curve, typical_rate_coverage_curve
from .channel import derive_constants
from .config import TYPICAL_NAME, ConfigError, Engine, ExperimentConfig, dump_config, load_config
from .geometry import Point
from .quadrature import ToleranceNotReachedError
from .simulator import TYPICAL, Location, Mode, empirical_interference_cdf, estimate_coverage, \
    estimate_median_rate, estimate_rate_coverage, run_trials

logger = logging.getLogger(__name__)

COLUMNS = ["location_name", "y1", "y2", "threshold", "engine", "value", "ci_halfwidth", "K", "eta"]

VALIDATION_COLUMNS = ["check", "location_name", "threshold", "expected", "observed", "delta", "tolerance", "passed"]

INTERFERENCE_COLUMNS = COLUMNS + ["mean_interference", "mean_interference_w"]

VALIDATION_TAUS_DB = (0.0, 3.0, 6.0, 9.0)
COROLLARY_TAUS = (1.0, 2.0, 5.0)
COROLLARY_TOLERANCE = 1e-3
INTERFERENCE_LEVELS = tuple(0.05 + 0.1 * i for i in range(10))
"""Quantiles of the empirical interference where the CDFs are compared"""

EXIT_CONFIG = 1
EXIT_TOLERANCE = 2
EXIT_VALIDATION = 3

Row = Dict[str, Any]


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Log debugging output")
def main(verbose: bool) -> None:
    """Coverage of indoor visible light attocell networks, analytic and simulated"""
    logging.basicConfig(level=logging.DEBUG if verbose else logging.INFO,
                        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s")


def experiment_options(command: Callable[..., None]) -> Callable[..., None]:
    """The options shared by every experiment command."""
    options = [
        click.option("--config", "config_path", type=click.Path(dir_okay=False), help="Configuration file"),
        click.option("--out", "out", type=click.Path(dir_okay=False), help="CSV output, stdout when omitted"),
        click.option("--seed", type=int, help="Base seed of the Monte Carlo streams"),
        click.option("--trials", type=int, help="Monte Carlo trials per location"),
        click.option("--engine", type=click.Choice(["analytic", "mc", "both"], case_sensitive=False)),
        click.option("--k", "k", type=int, help="Highest reflection order"),
        click.option("--eta", type=float, help="Wall reflection coefficient"),
        click.option("--mode", type=click.Choice(["independent", "mirrored"], case_sensitive=False)),
        click.option("--workers", type=int, help="Parallel workers, capped by VLCOV_THREADS"),
        click.option("--dump-config", "dump_path", type=click.Path(dir_okay=False),
                     help="Also write the effective configuration here"),
    ]
    for option in reversed(options):
        command = option(command)
    return command


def resolve_config(config_path: Optional[str], seed: Optional[int], trials: Optional[int], engine: Optional[str],
                   k: Optional[int], eta: Optional[float], mode: Optional[str], workers: Optional[int],
                   out: Optional[str]) -> ExperimentConfig:
    """Defaults < configuration file < command line options."""
    config = load_config(config_path) if config_path else ExperimentConfig()
    changes: Dict[str, object] = {}
    if seed is not None:
        changes["seed"] = seed
    if trials is not None:
        changes["trials"] = trials
    if engine is not None:
        changes["engine"] = Engine[engine.upper()]
    if mode is not None:
        changes["mode"] = Mode[mode.upper()]
    if workers is not None:
        changes["workers"] = workers
    if out is not None:
        changes["output"] = out
    param_changes: Dict[str, float] = {}
    if k is not None:
        param_changes["max_order"] = k
    if eta is not None:
        param_changes["eta"] = eta
    if param_changes:
        try:
            changes["params"] = config.params.with_changes(**param_changes)
        except ValueError as e:
            raise ConfigError(f"Invalid command line option: {e}")
    config = config.with_changes(**changes)
    config.validate()
    return config


def write_csv(rows: List[Row], columns: Sequence[str], output: Optional[str]) -> None:
    """Write the rows as CSV, atomically when going to a file."""
    frame = pd.DataFrame(rows, columns=list(columns))
    if output is None:
        click.echo(frame.to_csv(index=False, lineterminator="\n"), nl=False)
        return
    target = Path(output)
    target.parent.mkdir(parents=True, exist_ok=True)
    handle, temporary = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.", suffix=".tmp")
    try:
        with os.fdopen(handle, "w", encoding="utf-8", newline="") as file:
            frame.to_csv(file, index=False, lineterminator="\n")
        os.replace(temporary, target)
    except BaseException:
        Path(temporary).unlink(missing_ok=True)
        raise
    logger.info("Wrote %d rows to %s", len(rows), target)


def _coordinates(location: Location) -> Tuple[Optional[float], Optional[float]]:
    if location is TYPICAL:
        return None, None
    y1, y2 = location  # type: ignore
    return float(y1), float(y2)


def curve_rows(name: str, location: Location, curve: CoverageCurve, engine: str, config: ExperimentConfig) -> List[Row]:
    y1, y2 = _coordinates(location)
    halfwidths = curve.ci_halfwidth or (None,) * len(curve)
    return [{"location_name": name, "y1": y1, "y2": y2, "threshold": threshold, "engine": engine, "value": value,
             "ci_halfwidth": halfwidth, "K": config.K, "eta": config.params.eta}
            for threshold, value, halfwidth in zip(curve.thresholds, curve.values, halfwidths)]


def _progress(index: int, total: int, what: str) -> None:
    click.echo(f"Progress: {index}/{total} {what}", err=True)


def _run(command: str, config_args: Dict[str, Any]) -> None:
    """Resolve the configuration and run a command, turning failures into the documented exit codes."""
    dump_path = config_args.pop("dump_path", None)
    try:
        config = resolve_config(**config_args)
        if dump_path:
            Path(dump_path).write_text(dump_config(config), encoding="utf-8")
        code = run(command, config)
    except ConfigError as e:
        click.echo(f"Configuration error: {e}", err=True)
        sys.exit(EXIT_CONFIG)
    except ToleranceNotReachedError as e:
        click.echo(f"Numerical tolerance not certified: {e} (estimate {e.estimate}, error {e.error:g})", err=True)
        sys.exit(EXIT_TOLERANCE)
    sys.exit(code)


def _points(config: ExperimentConfig) -> List[Tuple[str, Point]]:
    return [(name, location) for name, location in config.locations if location is not TYPICAL]  # type: ignore


def _has_typical(config: ExperimentConfig) -> bool:
    return any(location is TYPICAL for _, location in config.locations)


def coverage_rows(config: ExperimentConfig) -> List[Row]:
    """One row per (location, engine, tau)."""
    workers = config.effective_workers()
    analytic: Dict[str, CoverageCurve] = {}
    if config.engine.runs_analytic():
        points = _points(config)
        curves = coverage_curves(config.params, [y for _, y in points], config.taus, config.K, config.quadrature,
                                 workers)
        analytic.update((name, curve) for (name, _), curve in zip(points, curves))
        if _has_typical(config):
            analytic[TYPICAL_NAME] = typical_coverage_curve(config.params, config.taus, config.K, config.grid_n,
                                                            config.quadrature, workers)
    rows: List[Row] = []
    for index, (name, location) in enumerate(config.locations, start=1):
        if name in analytic:
            rows.extend(curve_rows(name, location, analytic[name], "analytic", config))
        if config.engine.runs_mc():
            curve = estimate_coverage(config.params, location, config.taus, config.K, config.mode, config.trials,
                                      config.seed, workers)
            rows.extend(curve_rows(name, location, curve, "mc", config))
        _progress(index, len(config.locations), name)
    return rows


def _median_drop_row(name: str, location: Location, engine: str, reflected: Optional[float],
                     direct: Optional[float], config: ExperimentConfig) -> Optional[Row]:
    if reflected is None or direct is None:
        logger.warning("No median rate drop at %s (%s): the median is out of reach", name, engine)
        return None
    y1, y2 = _coordinates(location)
    return {"location_name": name, "y1": y1, "y2": y2, "threshold": reflected, "engine": f"{engine}_median_drop",
            "value": 1 - reflected / direct, "ci_halfwidth": None, "K": config.K, "eta": config.params.eta}


def median_drop_rows(config: ExperimentConfig) -> List[Row]:
    """
    For K > 0, the relative loss of median rate against line of sight only. The threshold column holds the median
    rate with reflections and the value column the relative drop.
    """
    if config.K == 0:
        return []
    rows: List[Row] = []
    workers = config.effective_workers()
    for name, location in config.locations:
        if config.engine.runs_analytic() and location is not TYPICAL:
            scenario = Scenario(config.params, location)  # type: ignore
            row = _median_drop_row(name, location, "analytic", median_rate(scenario, config.K, config.quadrature),
                                   median_rate(scenario, 0, config.quadrature), config)
            if row:
                rows.append(row)
        if config.engine.runs_mc():
            reflected = estimate_median_rate(config.params, location, config.K, config.mode, config.trials,
                                             config.seed, workers)
            direct = estimate_median_rate(config.params, location, 0, config.mode, config.trials, config.seed, workers)
            row = _median_drop_row(name, location, "mc", reflected, direct, config)
            if row:
                rows.append(row)
    return rows


def rate_rows(config: ExperimentConfig) -> List[Row]:
    """One row per (location, engine, rho); the analytic engine leaves out rates below its validity."""
    workers = config.effective_workers()
    analytic: Dict[str, CoverageCurve] = {}
    if config.engine.runs_analytic():
        points = _points(config)
        curves = rate_coverage_curves(config.params, [y for _, y in points], config.rhos, config.K,
                                      config.quadrature, workers)
        analytic.update((name, curve) for (name, _), curve in zip(points, curves))
        if _has_typical(config):
            analytic[TYPICAL_NAME] = typical_rate_coverage_curve(config.params, config.rhos, config.K, config.grid_n,
                                                                 config.quadrature, workers)
    rows: List[Row] = []
    for index, (name, location) in enumerate(config.locations, start=1):
        if name in analytic:
            rows.extend(curve_rows(name, location, analytic[name], "analytic", config))
        if config.engine.runs_mc():
            curve = estimate_rate_coverage(config.params, location, config.rhos, config.K, config.mode,
                                           config.trials, config.seed, workers)
            rows.extend(curve_rows(name, location, curve, "mc", config))
        _progress(index, len(config.locations), name)
    return rows


def _check(check: str, name: str, threshold: float, expected: float, observed: float, tolerance: float,
           informational: bool = False) -> Row:
    delta = observed - expected
    passed = "info" if informational else ("pass" if abs(delta) <= tolerance else "fail")
    return {"check": check, "location_name": name, "threshold": threshold, "expected": expected,
            "observed": observed, "delta": delta, "tolerance": tolerance, "passed": passed}


def corollary_rows(config: ExperimentConfig) -> List[Row]:
    """The three corner/center equivalences at tau = 1, 2, 5, line of sight only."""
    rows: List[Row] = []
    corner = Scenario(config.params, (config.params.a, config.params.a))
    for which in (1, 2, 3):
        first, second = corollary_transform(which, corner)
        expected = coverage_curve(first, COROLLARY_TAUS, 0, config.quadrature)
        observed = coverage_curve(second, COROLLARY_TAUS, 0, config.quadrature)
        for tau, e, o in zip(COROLLARY_TAUS, expected.values, observed.values):
            rows.append(_check(f"corollary_{which}", "corner_vs_center", tau, e, o, COROLLARY_TOLERANCE))
        _progress(which, 3, "corner/center equivalences")
    return rows


def cross_engine_rows(config: ExperimentConfig) -> List[Row]:
    """Analytic against independent Monte Carlo at every point location, and the mirrored deviations."""
    workers = config.effective_workers()
    taus = tuple(10 ** (db / 10) for db in VALIDATION_TAUS_DB)
    points = _points(config)
    analytic = coverage_curves(config.params, [y for _, y in points], taus, config.K, config.quadrature, workers)
    rows: List[Row] = []
    for index, ((name, y), curve) in enumerate(zip(points, analytic), start=1):
        independent = estimate_coverage(config.params, y, taus, config.K, Mode.INDEPENDENT, config.trials,
                                        config.seed, workers)
        for tau, expected, observed, halfwidth in zip(taus, curve.values, independent.values,
                                                      independent.ci_halfwidth or ()):
            tolerance = max(0.01, 3 * halfwidth)
            rows.append(_check(f"analytic_vs_mc_k{config.K}", name, tau, expected, observed, tolerance))
        if config.K > 0:
            mirrored = estimate_coverage(config.params, y, taus, config.K, Mode.MIRRORED, config.trials,
                                         config.seed, workers)
            for tau, expected, observed in zip(taus, independent.values, mirrored.values):
                rows.append(_check("mirrored_vs_independent", name, tau, expected, observed, 0.0, True))
        _progress(index, len(points), name)
    return rows


def interference_rows(config: ExperimentConfig) -> List[Row]:
    """
    The interference CDF of both engines at ten levels bracketing the empirical median (or around the mean when
    only the analytic engine runs). The typical user is left out.
    """
    workers = config.effective_workers()
    params = config.params
    consts = derive_constants(params)
    watts = params.tx_power * consts.alpha ** 2
    rows: List[Row] = []
    points = _points(config)
    for index, (name, y) in enumerate(points, start=1):
        scenario = Scenario(params, y)
        mean = mean_interference(scenario, config.K)
        y1, y2 = _coordinates(y)
        base = {"location_name": name, "y1": y1, "y2": y2, "K": config.K, "eta": params.eta,
                "mean_interference": mean, "mean_interference_w": mean * watts}
        estimates = None
        if config.engine.runs_mc():
            _, samples = run_trials(params, y, config.K, config.mode,
                                    config.trials, config.seed, workers)
            levels = np.unique(np.quantile(samples, INTERFERENCE_LEVELS))
            estimates = empirical_interference_cdf(samples, levels)
        else:
            levels = mean * np.linspace(0.5, 1.5, len(INTERFERENCE_LEVELS))
        if config.engine.runs_analytic():
            cdf = interference_cdf(scenario, levels, config.K, config.quadrature)
            rows.extend({**base, "threshold": float(s), "engine": "analytic", "value": float(p),
                         "ci_halfwidth": None} for s, p in zip(levels, cdf))
        if estimates is not None:
            rows.extend({**base, "threshold": float(s), "engine": "mc", "value": e.value,
                         "ci_halfwidth": e.ci_halfwidth} for s, e in zip(levels, estimates))
        _progress(index, len(points), name)
    return rows


def _validation_report(config: ExperimentConfig) -> int:
    rows = corollary_rows(config) + cross_engine_rows(config)
    write_csv(rows, VALIDATION_COLUMNS, config.output)
    failures = [row for row in rows if row["passed"] == "fail"]
    for row in failures:
        logger.warning("Validation failed: %s at %s, tau = %g, delta = %.3g", row["check"], row["location_name"],
                       row["threshold"], row["delta"])
    return EXIT_VALIDATION if failures else 0


def run(command: str, config: ExperimentConfig) -> int:
    """
    Run one experiment and write its CSV report to config.output (stdout when None).

    :param command: coverage, rate, validate or interference
    :returns: the exit code, EXIT_VALIDATION when a validation check fails
    :raises ToleranceNotReachedError: when an analytic value cannot be certified
    """
    if command == "coverage":
        write_csv(coverage_rows(config), COLUMNS, config.output)
    elif command == "rate":
        write_csv(rate_rows(config) + median_drop_rows(config), COLUMNS, config.output)
    elif command == "validate":
        return _validation_report(config)
    elif command == "interference":
        write_csv(interference_rows(config), INTERFERENCE_COLUMNS, config.output)
    else:
        raise ValueError(f"Unknown command {command!r}")
    return 0


@main.command()
@experiment_options
def coverage(**options: Any) -> None:
    """SINR coverage per location and threshold"""
    _run("coverage", options)


@main.command()
@experiment_options
def rate(**options: Any) -> None:
    """Rate coverage per location and rate, with the median rate drop due to reflections"""
    _run("rate", options)


@main.command()
@experiment_options
def validate(**options: Any) -> None:
    """Check the corner/center equivalences and the analytic engine against Monte Carlo"""
    _run("validate", options)


@main.command()
@experiment_options
def interference(**options: Any) -> None:
    """The CDF of the total received interference, analytic and empirical"""
    _run("interference", options)


if __name__ == "__main__":
    main()
