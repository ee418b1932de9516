"""Data-driven threshold and bandwidth selection.

``criterion`` evaluates

    C_n(delta) = S2 + S3 / delta + (L_n + pi/2)**2 + (pi/2 - R_n)**2 + delta**2,

where ``S2`` and ``S3`` are the sums of squared and cubed spacings inside the
window. ``select_delta`` minimises it over ``[n**-0.5, pi/4]``,
``select_h_known_alpha`` turns the minimum into a bandwidth when the
smoothness is known, and ``lepski_select`` adapts the bandwidth when it is
not.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from numpy.typing import ArrayLike, NDArray

from rcdensity.errors import ParameterError, SampleSizeError
from rcdensity.estimator import EstimatorConfig, EvalPoint, MAX_DELTA, estimate_point
from rcdensity.kernel import KernelSpec, make_weight
from rcdensity.transform import HALF_PI, TransformedDataset, window

FloatArray = NDArray[np.float64]

MIN_SAMPLE = 5
_EXACT_RECHECK = 8

logger = logging.getLogger(__name__)


@dataclass(frozen=True, slots=True)
class CriterionBreakdown:
    """The five nonnegative terms of ``C_n(delta)`` and their total."""

    sum_sq: float
    sum_cube_over_delta: float
    left_gap_sq: float
    right_gap_sq: float
    delta_sq: float

    @property
    def total(self) -> float:
        return (
            self.sum_sq
            + self.sum_cube_over_delta
            + self.left_gap_sq
            + self.right_gap_sq
            + self.delta_sq
        )


@dataclass(frozen=True, slots=True)
class DeltaSelection:
    delta_hat: float
    criterion_value: float
    candidate_count: int
    breakdown: CriterionBreakdown


@dataclass(frozen=True, slots=True)
class LepskiConfig:
    """Bandwidth grid ratio ``q`` and threshold constant ``kappa_le``.

    ``log_n_factor`` overrides the natural log of the sample size used in the
    noise thresholds; ``None`` means ``log(n)``.
    """

    q: float = 1.25
    kappa_le: float = 400.0
    log_n_factor: float | None = None

    def __post_init__(self) -> None:
        if not self.q > 1.0:
            raise ParameterError(f"q must exceed 1, got {self.q!r}")
        if not self.kappa_le > 0.0:
            raise ParameterError(f"kappa_le must be positive, got {self.kappa_le!r}")
        if self.log_n_factor is not None and not self.log_n_factor > 0.0:
            raise ParameterError("log_n_factor must be positive when given")

    @classmethod
    def practical(cls, q: float = 1.25) -> "LepskiConfig":
        """Smaller threshold constant used for simulations (``kappa_le = 4``)."""
        return cls(q=q, kappa_le=4.0)

    def for_sample(self, n: int) -> "LepskiConfig":
        return replace(self, log_n_factor=math.log(n))

    def grid_size(self, n: int) -> int:
        """``K = floor(log_q n)``."""
        ratio = math.log(n) / math.log(self.q)
        return int(math.floor(ratio + 1e-12))


@dataclass(frozen=True, slots=True)
class LepskiStep:
    k: int
    h: float
    estimate: float
    sigma: float


@dataclass(frozen=True)
class LepskiResult:
    k_hat: int
    h_selected: float
    estimates: tuple[LepskiStep, ...]
    accepted_set: frozenset[int]
    delta: DeltaSelection

    @property
    def estimate(self) -> float:
        return self.estimates[self.k_hat].estimate


@dataclass(frozen=True, slots=True)
class HolderClassSpec:
    """Smoothness ``alpha`` plus class constants kept as metadata.

    ``c_A``, ``c_B``, ``r_A`` and ``c_M`` annotate simulation targets; nothing
    checks them against the sampled densities.
    """

    alpha: float = 2.0
    c_A: float = 1.0
    c_B: float = 1.0
    r_A: float = 1.0
    c_M: float = 1.0

    def __post_init__(self) -> None:
        for name in ("alpha", "c_A", "c_B", "r_A", "c_M"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ParameterError(f"{name} must be positive, got {value!r}")

    @property
    def kernel_order(self) -> int:
        """``ell = 2 floor(alpha)``."""
        return 2 * math.floor(self.alpha)

    def kernel(self, quadrature_nodes: int = 64) -> KernelSpec:
        return make_weight(self.kernel_order, quadrature_nodes=quadrature_nodes)


# ------------------------------------------------------------------ criterion
def criterion(data: TransformedDataset, delta: float) -> CriterionBreakdown:
    """Evaluate ``C_n(delta)`` term by term.

    An empty window zeroes the sums and, through the ``L = -pi/2``,
    ``R = pi/2`` convention, the gap terms, leaving ``delta**2``.
    """
    delta = float(delta)
    if not (0.0 < delta <= MAX_DELTA):
        raise ParameterError(f"delta must lie in (0, pi/4], got {delta!r}")
    info = window(data, delta)
    if info.is_empty:
        return CriterionBreakdown(0.0, 0.0, 0.0, 0.0, delta * delta)
    span = info.active_indices
    gaps = data.spacings[span.start : span.stop]
    return CriterionBreakdown(
        sum_sq=float(np.sum(gaps**2)),
        sum_cube_over_delta=float(np.sum(gaps**3)) / delta,
        left_gap_sq=(info.left + HALF_PI) ** 2,
        right_gap_sq=(HALF_PI - info.right) ** 2,
        delta_sq=delta * delta,
    )


def _search_interval(n: int) -> tuple[float, float]:
    if n < MIN_SAMPLE:
        raise SampleSizeError(f"threshold selection needs n >= {MIN_SAMPLE}, got {n}")
    return 1.0 / math.sqrt(n), MAX_DELTA


def criterion_breakpoints(data: TransformedDataset) -> FloatArray:
    """Sorted distinct sites ``pi/2 - |Z_j|`` inside ``[n**-0.5, pi/4]``.

    ``C_n`` is smooth between consecutive sites.
    """
    lo, hi = _search_interval(data.n)
    sites = np.unique(HALF_PI - np.abs(data.z_sorted))
    return sites[(sites >= lo) & (sites <= hi)]


class _PrefixCriterion:
    """Vectorised ``C_n`` via prefix sums; same window rule as :func:`window`."""

    def __init__(self, data: TransformedDataset) -> None:
        self.z = data.z_sorted
        gaps = data.spacings
        self.sq = np.concatenate([[0.0], np.cumsum(gaps**2)])
        self.cube = np.concatenate([[0.0], np.cumsum(gaps**3)])

    def bounds(self, delta: FloatArray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        first = np.searchsorted(self.z, -HALF_PI + delta, side="left")
        last = np.searchsorted(self.z, HALF_PI - delta, side="right") - 1
        return first, last, (last - first) >= 1

    def cube_sum(self, delta: FloatArray) -> FloatArray:
        first, last, ok = self.bounds(delta)
        first = np.where(ok, first, 0)
        last = np.where(ok, last, 0)
        return self.cube[last] - self.cube[first]

    def __call__(self, delta: FloatArray) -> FloatArray:
        first, last, ok = self.bounds(delta)
        first_c = np.where(ok, first, 0)
        last_c = np.where(ok, last, 0)
        s2 = self.sq[last_c] - self.sq[first_c]
        s3 = self.cube[last_c] - self.cube[first_c]
        left = np.where(ok, self.z[first_c], -HALF_PI)
        right = np.where(ok, self.z[last_c], HALF_PI)
        return s2 + s3 / delta + (left + HALF_PI) ** 2 + (HALF_PI - right) ** 2 + delta**2


def select_delta(data: TransformedDataset) -> DeltaSelection:
    """Minimise ``C_n`` over ``[n**-0.5, pi/4]`` piece by piece.

    Between breakpoints only ``S3 / delta + delta**2`` varies, with minimiser
    ``(S3 / 2) ** (1/3)``. Candidates are each piece's clamped minimiser, every
    breakpoint, its floating-point neighbours on either side and the interval
    ends. The best few are re-evaluated with :func:`criterion`; ties go to the
    smallest ``delta``.

    Raises:
        SampleSizeError: if ``n < 5``.
    """
    lo, hi = _search_interval(data.n)
    sites = criterion_breakpoints(data)
    edges = np.unique(np.concatenate([[lo], sites, [hi]]))
    fast = _PrefixCriterion(data)

    left_edges, right_edges = edges[:-1], edges[1:]
    if left_edges.size:
        mid = 0.5 * (left_edges + right_edges)
        interior = np.cbrt(0.5 * fast.cube_sum(mid))
        interior = np.clip(interior, left_edges, right_edges)
    else:
        interior = np.empty(0)
    above = np.nextafter(edges, np.inf)
    below = np.nextafter(edges, -np.inf)
    candidates = np.concatenate(
        [
            edges,
            above,
            np.nextafter(above, np.inf),
            below,
            np.nextafter(below, -np.inf),
            interior,
        ]
    )
    candidates = np.unique(candidates[(candidates >= lo) & (candidates <= hi)])
    values = fast(candidates)

    shortlist = np.argsort(values, kind="stable")[:_EXACT_RECHECK]
    best_delta, best = lo, None
    for idx in sorted(shortlist, key=lambda i: candidates[i]):
        delta = float(candidates[idx])
        breakdown = criterion(data, delta)
        if best is None or breakdown.total < best.total:
            best_delta, best = delta, breakdown
    assert best is not None
    logger.debug(
        f"[tuning] delta_hat={best_delta:.6g} C_n={best.total:.6g} "
        f"({candidates.size} candidates, {sites.size} breakpoints)"
    )
    return DeltaSelection(best_delta, best.total, int(candidates.size), best)


def select_h_known_alpha(criterion_value: float, alpha: float) -> float:
    """Bandwidth ``C_n(delta_hat) ** (1 / (2 (alpha + 2)))`` for known smoothness."""
    if not criterion_value > 0:
        raise ParameterError(f"criterion_value must be positive, got {criterion_value!r}")
    if not alpha > 0:
        raise ParameterError(f"alpha must be positive, got {alpha!r}")
    return float(criterion_value ** (1.0 / (2.0 * (alpha + 2.0))))


# ------------------------------------------------------------------ Lepski
def lepski_index(
    estimates: ArrayLike, thresholds: ArrayLike, kappa_le: float
) -> tuple[int, frozenset[int]]:
    """Largest ``k`` with ``|f_k - f_l|**2 <= kappa_le * sigma_l`` for all ``l <= k``.

    Args:
        estimates: ``f_0 .. f_K``.
        thresholds: ``sigma_0 .. sigma_K``.
        kappa_le: Threshold constant.

    Returns:
        ``(k_hat, accepted)`` where ``accepted`` holds every ``k`` passing the
        test. ``k = 0`` always passes.
    """
    f = np.asarray(estimates, dtype=float)
    sigma = np.asarray(thresholds, dtype=float)
    if f.shape != sigma.shape or f.ndim != 1 or f.size == 0:
        raise ParameterError("estimates and thresholds must be equal-length 1-D sequences")
    accepted = {
        k for k in range(f.size) if np.all((f[k] - f[: k + 1]) ** 2 <= kappa_le * sigma[: k + 1])
    }
    return max(accepted), frozenset(accepted)


def lepski_select(
    data: TransformedDataset,
    a: EvalPoint,
    kernel: KernelSpec,
    cfg: LepskiConfig | None = None,
    *,
    delta: DeltaSelection | None = None,
    max_workers: int | None = None,
) -> LepskiResult:
    """Adaptive bandwidth at ``a`` on the grid ``h_k = delta_hat**0.5 * q**k``.

    Args:
        data: Transformed sample with ``n >= 5``.
        a: Evaluation point.
        kernel: Weight specification.
        cfg: Grid ratio and threshold constant.
        delta: Reuse an existing threshold selection (it only depends on the
            data).
        max_workers: Thread cap for the per-bandwidth estimates.

    Returns:
        The selected index, the full estimate ladder and the accepted set.
    """
    cfg = cfg or LepskiConfig()
    selection = delta or select_delta(data)
    n = data.n
    log_n = cfg.log_n_factor if cfg.log_n_factor is not None else math.log(n)
    top = cfg.grid_size(n)
    h0 = math.sqrt(selection.delta_hat)
    bandwidths = [h0 * cfg.q**k for k in range(top + 1)]

    def _estimate(h: float) -> float:
        config = EstimatorConfig(h=h, delta=selection.delta_hat, kernel=kernel)
        return estimate_point(data, config, a)

    if max_workers is not None and max_workers > 1 and len(bandwidths) > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            values = list(pool.map(_estimate, bandwidths))
    else:
        values = [_estimate(h) for h in bandwidths]

    sigmas = [h**-4 * selection.criterion_value * log_n for h in bandwidths]
    k_hat, accepted = lepski_index(values, sigmas, cfg.kappa_le)
    steps = tuple(
        LepskiStep(k, h, f, s) for k, (h, f, s) in enumerate(zip(bandwidths, values, sigmas))
    )
    logger.debug(f"[tuning] lepski k_hat={k_hat}/{top} h={bandwidths[k_hat]:.6g}")
    return LepskiResult(k_hat, bandwidths[k_hat], steps, accepted, selection)


__all__ = [
    "CriterionBreakdown",
    "DeltaSelection",
    "HolderClassSpec",
    "LepskiConfig",
    "LepskiResult",
    "LepskiStep",
    "criterion",
    "criterion_breakpoints",
    "lepski_index",
    "lepski_select",
    "select_delta",
    "select_h_known_alpha",
]
