"""Command-line entry point: ``rcdensity {estimate,simulate,rates,spacings-check}``.

Exit codes: 0 success, 2 configuration or parameter error, 3 data error,
4 unsupported regime.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from rcdensity.errors import InsufficientDataError, RCDensityError, SampleSizeError
from rcdensity.estimator import EstimatorConfig, EvalPoint, estimate_grid, nonnegative
from rcdensity.transform import load_csv, to_polar
from rcdensity.tuning import MIN_SAMPLE, lepski_select, select_delta, select_h_known_alpha
from studies.config import COMMANDS, ConfigError, RunConfig
from studies.designs import DesignSpec
from studies.reports import write_gnuplot, write_json, write_table
from studies.simulate import (
    MonteCarloRun,
    boundary_bound_check,
    log_power_for,
    rate_fit,
    run_replications,
    spacings_bound_check,
    spawn_seeds,
)

logger = logging.getLogger(__name__)

_LOGGER_NAMES = ("rcdensity", "studies")
_RECORD_COLUMNS = ("replication", "estimate", "truth", "sq_error", "delta", "h", "k_hat")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rcdensity",
        description="Density estimation for random coefficients in Y = A0 + A1 X.",
    )
    parser.add_argument(
        "command",
        nargs="?",
        choices=COMMANDS,
        help="command to run (default: the config's 'command')",
    )
    parser.add_argument("--config", type=Path, help="JSON run configuration")
    parser.add_argument("--seed", type=int, help="root seed (unsigned 64-bit)")
    parser.add_argument("--threads", type=int, help="worker thread cap")
    parser.add_argument("--output", help="output directory")
    parser.add_argument("--input", help="CSV file with x,y columns (estimate)")
    parser.add_argument(
        "--print-config",
        action="store_true",
        help="print the fully defaulted configuration and exit",
    )
    parser.add_argument("--verbose", action="store_true", help="log at DEBUG level")
    return parser


def load_config(args: argparse.Namespace) -> RunConfig:
    """Config file (or defaults) with command-line overrides applied and revalidated."""
    cfg = RunConfig.from_json(args.config) if args.config is not None else RunConfig()
    data = cfg.to_dict()
    overrides = {
        "command": args.command,
        "seed": args.seed,
        "threads": args.threads,
        "output_path": args.output,
        "input_path": args.input,
    }
    data.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig.from_dict(data)


def _attach_handlers(out_dir: Path, command: str, verbose: bool) -> list[logging.Handler]:
    formatter = logging.Formatter(
        "%(asctime)s | %(levelname)s | %(message)s",
        datefmt="%H:%M:%S",
    )
    stream = logging.StreamHandler()
    file_handler = logging.FileHandler(out_dir / f"rcdensity_{command}.log", encoding="utf-8")
    handlers: list[logging.Handler] = [stream, file_handler]
    level = logging.DEBUG if verbose else logging.INFO
    for handler in handlers:
        handler.setFormatter(formatter)
    for name in _LOGGER_NAMES:
        log = logging.getLogger(name)
        log.setLevel(level)
        for handler in handlers:
            log.addHandler(handler)
    return handlers


def _detach_handlers(handlers: list[logging.Handler]) -> None:
    for name in _LOGGER_NAMES:
        log = logging.getLogger(name)
        for handler in handlers:
            log.removeHandler(handler)
        log.setLevel(logging.NOTSET)
    for handler in handlers:
        handler.close()


def _record_rows(run: MonteCarloRun, *prefix) -> list[tuple]:
    return [
        (*prefix, r.replication, r.estimate, r.truth, r.sq_error, r.delta, r.h, r.k_hat)
        for r in run.records
    ]


# ------------------------------------------------------------------ commands
def cmd_estimate(cfg: RunConfig) -> int:
    """Estimate ``f_A`` on the configured grid from an ``x,y`` CSV."""
    if cfg.input_path is None:
        raise ConfigError("estimate needs an input file (--input or 'input_path')")
    data = to_polar(load_csv(cfg.input_path))
    if data.n < MIN_SAMPLE:
        raise SampleSizeError(f"estimate needs at least {MIN_SAMPLE} observations, got {data.n}")
    tuning = cfg.tuning
    kernel = cfg.kernel_spec()
    points = cfg.grid.evaluation_points()
    diagnostics: dict = {
        "n": data.n, "mode": tuning.mode, "points": len(points), "ell": kernel.ell
    }

    if tuning.mode == "fixed":
        if tuning.h is None or tuning.delta is None:
            raise ConfigError("tuning.mode 'fixed' needs both tuning.h and tuning.delta")
        est = EstimatorConfig(tuning.h, tuning.delta, kernel, cfg.kernel.tabulated)
        values = estimate_grid(data, est, points, max_workers=cfg.threads)
        diagnostics.update(h=tuning.h, delta=tuning.delta)
        logger.info(f"[cli] fixed h={tuning.h:.6g} delta={tuning.delta:.6g}")
    elif tuning.mode == "prop1":
        selection = select_delta(data)
        h = select_h_known_alpha(selection.criterion_value, cfg.holder.alpha)
        est = EstimatorConfig(h, selection.delta_hat, kernel, cfg.kernel.tabulated)
        values = estimate_grid(data, est, points, max_workers=cfg.threads)
        diagnostics.update(
            delta_hat=selection.delta_hat, criterion=selection.criterion_value, h=h
        )
        logger.info(
            f"[cli] delta_hat={selection.delta_hat:.6g} "
            f"C_n={selection.criterion_value:.6g} h_hat={h:.6g}"
        )
    elif tuning.mode == "lepski":
        selection = select_delta(data)
        results = [
            lepski_select(
                data, pt, kernel, tuning.lepski(), delta=selection, max_workers=cfg.threads
            )
            for pt in points
        ]
        values = np.array([r.estimate for r in results])
        diagnostics.update(
            delta_hat=selection.delta_hat,
            criterion=selection.criterion_value,
            k_hat=[r.k_hat for r in results],
            h=[r.h_selected for r in results],
        )
        logger.info(
            f"[cli] delta_hat={selection.delta_hat:.6g} "
            f"k_hat range {min(diagnostics['k_hat'])}..{max(diagnostics['k_hat'])}"
        )
    else:
        raise ConfigError(
            "tuning.mode 'oracle' needs a known design; use it with simulate or rates"
        )

    if cfg.output.clip_negative:
        values = nonnegative(values)
    out_dir = cfg.ensure_out_dir()
    write_table(
        out_dir / "estimate.csv",
        ("a0", "a1", "estimate"),
        [(pt.a0, pt.a1, float(v)) for pt, v in zip(points, values)],
    )
    write_json(out_dir / "estimate.json", {**diagnostics, "config": cfg.to_dict()})
    logger.info(f"[cli] wrote {len(points)} estimates to {out_dir}")
    return 0


def cmd_simulate(cfg: RunConfig) -> int:
    """Monte Carlo replications of one scenario."""
    sim = cfg.simulation
    rule = cfg.tuning.rule(cfg.holder.alpha)
    points = cfg.grid.evaluation_points()
    # a single configured point means "use the default uniform grid"
    grid = points if len(points) > 1 else None
    run = run_replications(
        cfg.design.spec(),
        cfg.coeffs.spec(),
        EvalPoint(*sim.point),
        rule,
        sim.n,
        sim.replications,
        cfg.seed,
        kernel=cfg.kernel_spec(),
        metric=sim.metric,
        grid=grid,
        tabulated=cfg.kernel.tabulated,
        max_workers=cfg.threads,
    )
    out_dir = cfg.ensure_out_dir()
    write_table(
        out_dir / "replications.csv",
        ("scenario_id", "n", *_RECORD_COLUMNS),
        _record_rows(run, sim.scenario_id, sim.n),
    )
    summary = {
        "scenario_id": sim.scenario_id,
        "n": sim.n,
        "replications": sim.replications,
        "seed": cfg.seed,
        "metric": sim.metric,
        "tuning": rule.mode,
        "mse": run.mse,
        "median_mse": run.median_mse,
        "config": cfg.to_dict(),
    }
    write_json(out_dir / "summary.json", summary)
    return 0


def cmd_rates(cfg: RunConfig) -> int:
    """Monte Carlo risk over a grid of sample sizes and a log-log slope fit."""
    rates, sim = cfg.rates, cfg.simulation
    n_values = sorted(rates.n_values)
    if len(set(n_values)) != len(n_values):
        raise ConfigError(f"rates.n_values must be distinct, got {rates.n_values}")
    if len(n_values) < 4:
        raise InsufficientDataError(f"rates needs at least 4 sample sizes, got {len(n_values)}")
    alpha, beta = cfg.holder.alpha, cfg.design.beta
    rule = cfg.tuning.rule(alpha)
    design, coeffs = cfg.design.spec(), cfg.coeffs.spec()
    points = cfg.grid.evaluation_points()
    grid = points if len(points) > 1 else None

    runs: list[MonteCarloRun] = []
    for n, child in zip(n_values, spawn_seeds(cfg.seed, len(n_values))):
        logger.info(f"[rates] n={n} ({rates.replications} replications)")
        runs.append(
            run_replications(
                design,
                coeffs,
                EvalPoint(*sim.point),
                rule,
                n,
                rates.replications,
                child,
                kernel=cfg.kernel_spec(),
                metric=sim.metric,
                grid=grid,
                tabulated=cfg.kernel.tabulated,
                max_workers=cfg.threads,
            )
        )

    log_power = 0.0
    if rates.remove_log_factor:
        log_power = log_power_for(sim.metric, rule.mode, alpha, beta)
    report = rate_fit(
        [(run.n, run.mse) for run in runs],
        alpha=alpha,
        beta=beta,
        replications=rates.replications,
        median_mse=[run.median_mse for run in runs],
        log_power=log_power,
    )
    logger.info(
        f"[rates] slope={report.slope:.4f} +/- {report.slope_se:.4f} "
        f"theory={report.theory_slope:.4f}"
    )

    out_dir = cfg.ensure_out_dir()
    write_table(
        out_dir / "rates_replications.csv",
        ("n", *_RECORD_COLUMNS),
        [row for run in runs for row in _record_rows(run, run.n)],
    )
    fitted = report.fitted(n_values)
    theory = report.theory_line(n_values)
    write_table(
        out_dir / "rates.csv",
        ("n", "mse", "median_mse", "fitted", "theory"),
        [
            (run.n, run.mse, run.median_mse, float(f), float(t))
            for run, f, t in zip(runs, fitted, theory)
        ],
    )
    payload = {
        **report.to_dict(),
        "scenario_id": sim.scenario_id,
        "metric": sim.metric,
        "tuning": rule.mode,
        "seed": cfg.seed,
        "config": cfg.to_dict(),
    }
    write_json(out_dir / "rates.json", payload)
    if cfg.output.gnuplot:
        write_gnuplot(out_dir / "rates.gp", report)
    return 0


def cmd_spacings_check(cfg: RunConfig) -> int:
    """Spacings and boundary bounds over every configured (beta, n) cell."""
    sp = cfg.spacings
    cells = [(beta, n) for beta in sp.betas for n in sp.n_values]
    rows, records = [], []
    for (beta, n), child in zip(cells, spawn_seeds(cfg.seed, len(cells))):
        design = DesignSpec(beta=beta)
        delta = sp.delta_for(beta, n)
        spacing_seed, boundary_seed = child.spawn(2)
        spacing = spacings_bound_check(design, n, delta, sp.kappa, sp.replications, spacing_seed)
        boundary = boundary_bound_check(design, n, delta, sp.replications, boundary_seed)
        logger.info(
            f"[cli] beta={beta:g} n={n} spacings {spacing.empirical:.4g} <= {spacing.bound:.4g}: "
            f"{spacing.holds}; boundary: {boundary.holds}"
        )
        rows.append(
            (
                beta,
                n,
                delta,
                sp.kappa,
                spacing.empirical,
                spacing.bound,
                spacing.holds,
                boundary.left_gap_mean,
                boundary.right_gap_mean,
                boundary.gap_bound,
                boundary.empty_fraction,
                boundary.empty_bound,
                boundary.holds,
            )
        )
        records.append(
            {"beta": beta, "n": n, "delta": delta, "spacings": spacing, "boundary": boundary}
        )
    out_dir = cfg.ensure_out_dir()
    header = (
        "beta",
        "n",
        "delta",
        "kappa",
        "empirical",
        "bound",
        "holds",
        "left_gap_mean",
        "right_gap_mean",
        "gap_bound",
        "empty_fraction",
        "empty_bound",
        "boundary_holds",
    )
    write_table(out_dir / "spacings.csv", header, rows)
    all_hold = all(r["spacings"].holds and r["boundary"].holds for r in records)
    payload = {
        "all_hold": all_hold,
        "cells": [dict(zip(header, row)) for row in rows],
        "replications": sp.replications,
        "seed": cfg.seed,
        "config": cfg.to_dict(),
    }
    write_json(out_dir / "spacings.json", payload)
    if not all_hold:
        logger.warning("[cli] at least one cell exceeded its bound")
    return 0


_DISPATCH: dict[str, Callable[[RunConfig], int]] = {
    "estimate": cmd_estimate,
    "simulate": cmd_simulate,
    "rates": cmd_rates,
    "spacings-check": cmd_spacings_check,
}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
    except RCDensityError as exc:
        print(f"rcdensity: error: {exc}", file=sys.stderr)
        return exc.exit_code
    if args.print_config:
        sys.stdout.write(cfg.to_json_text())
        return 0

    handlers = _attach_handlers(cfg.ensure_out_dir(), cfg.command, args.verbose)
    try:
        logger.debug(f"[cli] command={cfg.command} seed={cfg.seed} threads={cfg.threads}")
        return _DISPATCH[cfg.command](cfg)
    except RCDensityError as exc:
        logger.error(f"[cli] {type(exc).__name__}: {exc}")
        return exc.exit_code
    finally:
        _detach_handlers(handlers)


if __name__ == "__main__":
    raise SystemExit(main())
