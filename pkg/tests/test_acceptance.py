"""Desk-scale Monte Carlo checks of the convergence rates.

These take minutes; run them with ``pytest -m slow``.
"""

import json
import math

import numpy as np
import pytest
from scipy import stats

from rcdensity.estimator import EvalPoint
from rcdensity.transform import to_polar
from rcdensity.tuning import LepskiConfig, select_delta
from studies.cli import main
from studies.designs import CoefficientSpec, DesignSpec, simulate_sample
from studies.simulate import (
    LepskiTuning,
    OracleTuning,
    rate_fit,
    run_replications,
    spacings_bound_check,
    spawn_seeds,
)

pytestmark = pytest.mark.slow

N_GRID = [1_000, 3_000, 10_000, 30_000, 100_000]
ORIGIN = EvalPoint(0.0, 0.0)
WORKERS = 8


def test_pointwise_rate():
    design, coeffs = DesignSpec(beta=2.0), CoefficientSpec()
    runs = [
        run_replications(design, coeffs, ORIGIN, OracleTuning(), n, 200, seed, max_workers=WORKERS)
        for n, seed in zip(N_GRID, spawn_seeds(2024, len(N_GRID)))
    ]
    report = rate_fit(
        [(run.n, run.mse) for run in runs],
        replications=200,
        median_mse=[run.median_mse for run in runs],
    )
    assert report.theory_slope == pytest.approx(-1.0 / 3.0)
    assert report.slope <= report.theory_slope + 0.15
    medians = report.median_mse
    assert all(a > b for a, b in zip(medians, medians[1:]))


def test_selected_threshold_scaling():
    design, coeffs = DesignSpec(beta=2.0), CoefficientSpec()
    medians = []
    for n, seed in zip(N_GRID, spawn_seeds(7, len(N_GRID))):
        deltas = [
            select_delta(to_polar(simulate_sample(design, coeffs, n, child).dataset)).delta_hat
            for child in seed.spawn(50)
        ]
        medians.append(float(np.median(deltas)))
    fit = stats.linregress(np.log(N_GRID), np.log(medians))
    assert fit.slope == pytest.approx(-1.0 / 3.0, abs=0.2)


def test_lepski_close_to_oracle():
    design, coeffs = DesignSpec(beta=2.0), CoefficientSpec()
    n, reps = 100_000, 100
    lepski = run_replications(
        design, coeffs, ORIGIN, LepskiTuning(LepskiConfig()), n, reps, 31, max_workers=WORKERS
    )
    oracle = run_replications(
        design, coeffs, ORIGIN, OracleTuning(), n, reps, 31, max_workers=WORKERS
    )
    assert all(r.k_hat is not None and r.k_hat >= 0 for r in lepski.records)
    assert lepski.mse <= 10.0 * oracle.mse


def test_uniform_risk_decreases():
    design, coeffs = DesignSpec(beta=2.0), CoefficientSpec()
    rule = OracleTuning(log_variant=True)
    small, large = (
        run_replications(
            design, coeffs, ORIGIN, rule, n, 40, seed, metric="uniform", max_workers=WORKERS
        )
        for n, seed in zip((1_000, 100_000), spawn_seeds(5, 2))
    )
    assert large.median_mse < small.median_mse


@pytest.mark.parametrize("beta", [1.5, 2.0, 3.0])
@pytest.mark.parametrize("n", [100, 1000])
def test_spacings_bound_every_cell(beta, n):
    delta = min(n ** (-1.0 / (beta + 1.0)), math.pi / 4)
    check = spacings_bound_check(DesignSpec(beta=beta), n, delta, 2.0, 500, 11)
    assert check.holds, (check.empirical, check.bound)


COMMAND_OUTPUTS = {
    "simulate": ("replications.csv", "summary.json"),
    "rates": ("rates.csv", "rates_replications.csv", "rates.json", "rates.gp"),
    "spacings-check": ("spacings.csv", "spacings.json"),
}


@pytest.mark.parametrize("command", sorted(COMMAND_OUTPUTS))
def test_cli_runs_are_byte_identical(command, tmp_path):
    out = tmp_path / command
    config = {
        "command": command,
        "output_path": str(out),
        "seed": 2**63 + 5,
        "coeffs": {"family": "gaussian"},
        "simulation": {"n": 300, "replications": 4},
        "rates": {"n_values": [100, 200, 400, 800], "replications": 4},
        "spacings": {"betas": [2.0], "n_values": [100, 300], "replications": 20},
    }
    path = tmp_path / "run.json"
    path.write_text(json.dumps(config), encoding="utf-8")
    assert main(["--config", str(path), "--threads", "4"]) == 0
    first = {name: (out / name).read_bytes() for name in COMMAND_OUTPUTS[command]}
    assert main(["--config", str(path), "--threads", "4"]) == 0
    second = {name: (out / name).read_bytes() for name in COMMAND_OUTPUTS[command]}
    assert first == second
