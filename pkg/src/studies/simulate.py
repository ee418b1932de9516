"""Monte Carlo risk experiments, rate fits and spacings checks.

Every replication draws from its own child of one ``SeedSequence``, so results
are reproducible for a seed and do not depend on the number of worker threads.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import ClassVar, Literal, Sequence

import numpy as np
from numpy.typing import NDArray
from scipy import special, stats

from rcdensity.errors import (
    InsufficientDataError,
    ParameterError,
    UnsupportedRegimeError,
)
from rcdensity.estimator import (
    MAX_DELTA,
    EstimatorConfig,
    EvalPoint,
    estimate_grid,
    grid_points,
)
from rcdensity.kernel import KernelSpec, make_weight
from rcdensity.transform import HALF_PI, TransformedDataset, spacing_power_sum, to_polar, window
from rcdensity.tuning import LepskiConfig, lepski_select, select_delta, select_h_known_alpha
from studies.designs import (
    CoefficientSpec,
    DesignSpec,
    SpacingsBoundParams,
    sample_design,
    simulate_sample,
    spacings_bound_params,
    true_density,
)

FloatArray = NDArray[np.float64]
Metric = Literal["pointwise", "uniform"]
SeedLike = int | np.random.SeedSequence

logger = logging.getLogger(__name__)


def spawn_seeds(seed: SeedLike, count: int) -> list[np.random.SeedSequence]:
    """Independent child streams of ``seed``, one per replication or cell."""
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return root.spawn(count)


# ------------------------------------------------------------------ tuning rules
@dataclass(frozen=True, slots=True)
class OracleTuning:
    """``delta = c_delta n**(-1/(beta+1))`` and ``h = c_h n**(-1/((alpha+2)(beta+1)))``.

    ``log_variant`` replaces ``n`` by ``n / log n``.
    """

    alpha: float = 2.0
    c_delta: float = 1.0
    c_h: float = 1.0
    log_variant: bool = False
    mode: ClassVar[str] = "oracle"


@dataclass(frozen=True, slots=True)
class Prop1Tuning:
    """Data-driven ``delta_hat`` with the known-smoothness bandwidth."""

    alpha: float = 2.0
    mode: ClassVar[str] = "prop1"


@dataclass(frozen=True, slots=True)
class LepskiTuning:
    """Data-driven ``delta_hat`` with Lepski's bandwidth; ``alpha`` fixes the kernel order."""

    config: LepskiConfig = field(default_factory=LepskiConfig)
    alpha: float = 2.0
    mode: ClassVar[str] = "lepski"


TuningRule = OracleTuning | Prop1Tuning | LepskiTuning


def _require_supported(beta: float, what: str) -> None:
    if beta <= 1.0:
        raise UnsupportedRegimeError(
            f"{what} requires a design tail exponent beta > 1 (got beta={beta:g}); "
            "the beta <= 1 regime is not supported"
        )


def oracle_tuning(
    n: int,
    alpha: float,
    beta: float,
    c_delta: float = 1.0,
    c_h: float = 1.0,
    *,
    log_variant: bool = False,
) -> tuple[float, float]:
    """Rate-optimal ``(delta, h)`` for known ``alpha`` and ``beta``.

    Raises:
        UnsupportedRegimeError: if ``beta <= 1``.
        ParameterError: for nonpositive ``alpha``, constants or ``n``.
    """
    _require_supported(beta, "oracle tuning")
    if not alpha > 0:
        raise ParameterError(f"alpha must be positive, got {alpha!r}")
    if not (c_delta > 0 and c_h > 0):
        raise ParameterError("c_delta and c_h must be positive")
    if n < 1 or (log_variant and n < 2):
        raise ParameterError(f"sample size too small for oracle tuning: n={n}")
    base = n / math.log(n) if log_variant else float(n)
    delta = c_delta * base ** (-1.0 / (beta + 1.0))
    h = c_h * base ** (-1.0 / ((alpha + 2.0) * (beta + 1.0)))
    return delta, h


def theory_slope(alpha: float, beta: float) -> float:
    """Exponent ``-2 alpha / ((alpha + 2)(beta + 1))`` of the squared risk in ``n``."""
    return -2.0 * alpha / ((alpha + 2.0) * (beta + 1.0))


def log_power_for(metric: Metric, mode: str, alpha: float, beta: float) -> float:
    """Power of ``log n`` multiplying the theoretical risk.

    Uniform risk carries ``(log n) ** (2 alpha / ((alpha + 2)(beta + 1)))``;
    pointwise Lepski adaptation carries ``(log n) ** (alpha / (alpha + 2))``.
    """
    if metric == "uniform":
        return -theory_slope(alpha, beta)
    if mode == "lepski":
        return alpha / (alpha + 2.0)
    return 0.0


# ------------------------------------------------------------------ replications
@dataclass(frozen=True, slots=True)
class ReplicationRecord:
    replication: int
    estimate: float
    truth: float
    sq_error: float
    delta: float
    h: float
    k_hat: int | None = None


@dataclass(frozen=True)
class MonteCarloRun:
    """Per-replication records for one scenario and sample size."""

    n: int
    metric: Metric
    records: tuple[ReplicationRecord, ...]

    @property
    def sq_errors(self) -> FloatArray:
        return np.array([r.sq_error for r in self.records])

    @property
    def mse(self) -> float:
        return float(np.mean(self.sq_errors))

    @property
    def median_mse(self) -> float:
        return float(np.median(self.sq_errors))


def default_uniform_grid(half_width: float = 1.0, count: int = 11) -> list[EvalPoint]:
    axis = np.linspace(-half_width, half_width, count)
    return grid_points(axis, axis)


def _tuned_estimates(
    rule: TuningRule,
    data: TransformedDataset,
    design: DesignSpec,
    kernel: KernelSpec,
    points: list[EvalPoint],
    tabulated: bool,
) -> tuple[FloatArray, float, FloatArray, list[int] | None]:
    if isinstance(rule, OracleTuning):
        delta, h = oracle_tuning(
            data.n, rule.alpha, design.beta, rule.c_delta, rule.c_h, log_variant=rule.log_variant
        )
        delta = min(delta, MAX_DELTA)
        cfg = EstimatorConfig(h=h, delta=delta, kernel=kernel, tabulated=tabulated)
        return estimate_grid(data, cfg, points), delta, np.full(len(points), h), None
    selection = select_delta(data)
    if isinstance(rule, Prop1Tuning):
        h = select_h_known_alpha(selection.criterion_value, rule.alpha)
        cfg = EstimatorConfig(h=h, delta=selection.delta_hat, kernel=kernel, tabulated=tabulated)
        values = estimate_grid(data, cfg, points)
        return values, selection.delta_hat, np.full(len(points), h), None
    results = [lepski_select(data, pt, kernel, rule.config, delta=selection) for pt in points]
    values = np.array([r.estimate for r in results])
    bandwidths = np.array([r.h_selected for r in results])
    return values, selection.delta_hat, bandwidths, [r.k_hat for r in results]


def run_replications(
    design: DesignSpec,
    coeffs: CoefficientSpec,
    a: EvalPoint,
    tuning: TuningRule,
    n: int,
    replications: int,
    seed: SeedLike,
    *,
    kernel: KernelSpec | None = None,
    metric: Metric = "pointwise",
    grid: Sequence[EvalPoint] | None = None,
    tabulated: bool = False,
    max_workers: int | None = None,
) -> MonteCarloRun:
    """Run ``replications`` independent estimates and record their errors.

    Args:
        design: Design density of ``X``.
        coeffs: Density of ``(A0, A1)``; supplies the truth.
        a: Target point for the pointwise metric.
        tuning: Oracle, Prop1 or Lepski rule.
        n: Sample size per replication.
        replications: Number of independent replications.
        seed: Root seed; replication ``r`` uses the ``r``-th spawned child.
        kernel: Weight; defaults to order ``2 floor(alpha)`` of the rule.
        metric: ``"pointwise"`` records the squared error at ``a``;
            ``"uniform"`` records the squared sup error over ``grid``.
        grid: Points for the uniform metric (11x11 on ``[-1, 1]**2`` if
            omitted).
        tabulated: Use the interpolated kernel table for grid evaluation.
        max_workers: Thread cap for replications.

    Returns:
        All records in replication order.
    """
    if replications < 1:
        raise ParameterError(f"replications must be at least 1, got {replications}")
    if metric not in ("pointwise", "uniform"):
        raise ParameterError(f"unknown risk metric {metric!r}")
    _require_supported(design.beta, f"{tuning.mode} tuning")
    kernel = kernel or make_weight(2 * math.floor(tuning.alpha))
    points = [a] if metric == "pointwise" else list(grid or default_uniform_grid())
    truths = np.array([true_density(coeffs, pt) for pt in points])
    children = spawn_seeds(seed, replications)

    def _one(r: int) -> ReplicationRecord:
        rng = np.random.default_rng(children[r])
        sample = simulate_sample(design, coeffs, n, rng)
        data = to_polar(sample.dataset)
        values, delta, bandwidths, k_hats = _tuned_estimates(
            tuning, data, design, kernel, points, tabulated
        )
        errors = np.abs(values - truths)
        at = int(np.argmax(errors))
        return ReplicationRecord(
            replication=r,
            estimate=float(values[at]),
            truth=float(truths[at]),
            sq_error=float(errors[at] ** 2),
            delta=float(delta),
            h=float(bandwidths[at]),
            k_hat=None if k_hats is None else k_hats[at],
        )

    if max_workers is not None and max_workers > 1 and replications > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            records = list(pool.map(_one, range(replications)))
    else:
        records = [_one(r) for r in range(replications)]
    run = MonteCarloRun(n=n, metric=metric, records=tuple(records))
    logger.info(
        f"[mc] {tuning.mode} n={n} reps={replications} mse={run.mse:.4g} "
        f"median={run.median_mse:.4g}"
    )
    return run


def mc_risk(
    design: DesignSpec,
    coeffs: CoefficientSpec,
    a: EvalPoint,
    tuning: TuningRule,
    n: int,
    replications: int,
    seed: SeedLike,
    **options,
) -> float:
    """Monte Carlo mean squared error; see :func:`run_replications` for options."""
    return run_replications(design, coeffs, a, tuning, n, replications, seed, **options).mse


# ------------------------------------------------------------------ rate fits
@dataclass(frozen=True)
class RiskReport:
    """Log-log fit of Monte Carlo risk against sample size."""

    n_values: tuple[int, ...]
    mse: tuple[float, ...]
    replications: int
    slope: float
    slope_se: float
    theory_slope: float
    intercept: float
    log_power: float = 0.0
    median_mse: tuple[float, ...] | None = None

    def fitted(self, n: Sequence[float] | FloatArray) -> FloatArray:
        """Fitted risk, log factor included."""
        n = np.asarray(n, dtype=float)
        log_n = np.log(n)
        return np.exp(self.intercept + self.slope * log_n + self.log_power * np.log(log_n))

    def theory_line(self, n: Sequence[float] | FloatArray) -> FloatArray:
        """Theoretical rate anchored at the first Monte Carlo point."""
        n = np.asarray(n, dtype=float)
        first = float(self.n_values[0])
        log_ratio = self.theory_slope * np.log(n / first)
        log_factor = self.log_power * (np.log(np.log(n)) - math.log(math.log(first)))
        return self.mse[0] * np.exp(log_ratio + log_factor)

    def to_dict(self) -> dict:
        data = asdict(self)
        data["n_values"] = list(self.n_values)
        data["mse"] = list(self.mse)
        if self.median_mse is not None:
            data["median_mse"] = list(self.median_mse)
        return data


def rate_fit(
    report_input: Sequence[tuple[int, float]],
    *,
    alpha: float = 2.0,
    beta: float = 2.0,
    replications: int = 0,
    median_mse: Sequence[float] | None = None,
    log_power: float = 0.0,
) -> RiskReport:
    """Ordinary least squares of ``log mse - log_power * log log n`` on ``log n``.

    Args:
        report_input: ``(n, mse)`` pairs, at least four distinct ``n``.
        alpha: Declared smoothness for the theory slope.
        beta: Design tail exponent for the theory slope.
        replications: Replications behind each mse (reported only).
        median_mse: Optional medians aligned with ``report_input``.
        log_power: Power of ``log n`` removed before fitting.

    Raises:
        InsufficientDataError: with fewer than four points.
        ParameterError: for duplicate ``n`` or nonpositive mse.
    """
    pairs = [(int(n), float(m)) for n, m in report_input]
    if len(pairs) < 4:
        raise InsufficientDataError(f"rate fit needs at least 4 sample sizes, got {len(pairs)}")
    order = sorted(range(len(pairs)), key=lambda i: pairs[i][0])
    n_values = np.array([pairs[i][0] for i in order], dtype=float)
    mse = np.array([pairs[i][1] for i in order])
    if np.any(np.diff(n_values) == 0):
        raise ParameterError("rate fit needs distinct sample sizes")
    if np.any(n_values < 2) or not np.all((mse > 0) & np.isfinite(mse)):
        raise ParameterError("rate fit needs n >= 2 and positive finite mse values")
    response = np.log(mse) - log_power * np.log(np.log(n_values))
    fit = stats.linregress(np.log(n_values), response)
    medians = None if median_mse is None else tuple(float(median_mse[i]) for i in order)
    return RiskReport(
        n_values=tuple(int(v) for v in n_values),
        mse=tuple(float(v) for v in mse),
        replications=int(replications),
        slope=float(fit.slope),
        slope_se=float(fit.stderr),
        theory_slope=theory_slope(alpha, beta),
        intercept=float(fit.intercept),
        log_power=float(log_power),
        median_mse=medians,
    )


def plot_rate_fit(report: RiskReport, path: str | Path | None = None, show: bool = False):
    """Log-log plot of Monte Carlo risk with fitted and theoretical lines."""
    import matplotlib.pyplot as plt

    n = np.asarray(report.n_values, dtype=float)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.loglog(n, report.mse, "o", label="Monte Carlo MSE")
    if report.median_mse is not None:
        ax.loglog(n, report.median_mse, "s", mfc="none", label="median sq. error")
    ax.loglog(n, report.fitted(n), "-", label=f"fit slope {report.slope:.3f}")
    ax.loglog(n, report.theory_line(n), "--", label=f"theory slope {report.theory_slope:.3f}")
    ax.set_xlabel("n")
    ax.set_ylabel("risk")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    if path is not None:
        fig.savefig(Path(path).expanduser(), dpi=150)
    if show:
        plt.show()
    else:
        plt.close(fig)
    return fig


# ------------------------------------------------------------------ spacings
@dataclass(frozen=True, slots=True)
class SpacingsCheck:
    empirical: float
    bound: float
    holds: bool


@dataclass(frozen=True, slots=True)
class BoundaryCheck:
    left_gap_mean: float
    right_gap_mean: float
    gap_bound: float
    empty_fraction: float
    empty_bound: float
    holds: bool


def window_integral(beta: float, kappa: float, delta: float) -> float:
    """``int_delta^{pi/2} u**(-beta (kappa - 1)) du`` in closed form."""
    e = beta * (kappa - 1.0)
    if math.isclose(e, 1.0, rel_tol=0.0, abs_tol=1e-12):
        return math.log(HALF_PI / delta)
    return (HALF_PI ** (1.0 - e) - delta ** (1.0 - e)) / (1.0 - e)


def spacings_bound(
    params: SpacingsBoundParams, beta: float, n: int, delta: float, kappa: float
) -> float:
    """``2 kappa C_Z c_Z**-kappa Gamma(kappa) n (n-1)**-kappa`` times :func:`window_integral`."""
    lead = 2.0 * kappa * params.C_Z * params.c_Z ** (-kappa) * float(special.gamma(kappa))
    return lead * n * (n - 1.0) ** (-kappa) * window_integral(beta, kappa, delta)


def _angles(design: DesignSpec, n: int, rng: np.random.Generator) -> TransformedDataset:
    z = np.sort(np.arctan(sample_design(design, n, rng)))
    return TransformedDataset(z, np.zeros(n))


def _check_window_args(n: int, delta: float, replications: int) -> None:
    if n < 2:
        raise ParameterError(f"n must be at least 2, got {n}")
    if not (0.0 < delta <= MAX_DELTA):
        raise ParameterError(f"delta must lie in (0, pi/4], got {delta!r}")
    if replications < 1:
        raise ParameterError(f"replications must be at least 1, got {replications}")


def spacings_bound_check(
    design: DesignSpec,
    n: int,
    delta: float,
    kappa: float,
    replications: int,
    seed: SeedLike,
) -> SpacingsCheck:
    """Compare the mean windowed spacing power sum with its analytic bound."""
    if not kappa > 1.0:
        raise ParameterError(f"kappa must exceed 1, got {kappa!r}")
    _check_window_args(n, delta, replications)
    children = spawn_seeds(seed, replications)
    sums = [
        spacing_power_sum(_angles(design, n, np.random.default_rng(child)), delta, kappa)
        for child in children
    ]
    empirical = float(np.mean(sums))
    bound = spacings_bound(spacings_bound_params(design), design.beta, n, delta, kappa)
    logger.debug(f"[spacings] beta={design.beta:g} n={n} mean={empirical:.4g} bound={bound:.4g}")
    return SpacingsCheck(empirical, bound, empirical <= bound)


def boundary_bound_check(
    design: DesignSpec,
    n: int,
    delta: float,
    replications: int,
    seed: SeedLike,
) -> BoundaryCheck:
    """Compare boundary gaps and empty-window frequency with their bounds.

    The gap bound is ``2 (delta + 1/(c_Z n delta**beta))**2
    + pi**2 exp(-c_Z n (pi/2 - delta) delta**beta)``; the empty-window bound
    for ``delta = pi/4`` is ``n exp(-c_Z (n-1) (pi/2) (pi/4)**beta)``.
    """
    _check_window_args(n, delta, replications)
    params = spacings_bound_params(design)
    beta, c_z = design.beta, params.c_Z
    children = spawn_seeds(seed, replications)
    left, right, empty = [], [], []
    for child in children:
        data = _angles(design, n, np.random.default_rng(child))
        info = window(data, delta)
        left.append((info.left + HALF_PI) ** 2)
        right.append((HALF_PI - info.right) ** 2)
        empty.append(window(data, MAX_DELTA).is_empty)
    gap_bound = 2.0 * (delta + 1.0 / (c_z * n * delta**beta)) ** 2 + math.pi**2 * math.exp(
        -c_z * n * (HALF_PI - delta) * delta**beta
    )
    empty_bound = min(1.0, n * math.exp(-c_z * (n - 1) * HALF_PI * MAX_DELTA**beta))
    left_mean, right_mean = float(np.mean(left)), float(np.mean(right))
    empty_fraction = float(np.mean(empty))
    holds = left_mean <= gap_bound and right_mean <= gap_bound and empty_fraction <= empty_bound
    return BoundaryCheck(left_mean, right_mean, gap_bound, empty_fraction, empty_bound, holds)


__all__ = [
    "BoundaryCheck",
    "LepskiTuning",
    "MonteCarloRun",
    "OracleTuning",
    "Prop1Tuning",
    "ReplicationRecord",
    "RiskReport",
    "SpacingsCheck",
    "TuningRule",
    "boundary_bound_check",
    "default_uniform_grid",
    "log_power_for",
    "mc_risk",
    "oracle_tuning",
    "plot_rate_fit",
    "rate_fit",
    "run_replications",
    "spacings_bound",
    "spacings_bound_check",
    "spawn_seeds",
    "theory_slope",
    "window_integral",
]
