"""Priestley-Chao spacings estimator of the coefficient density ``f_A``.

For a threshold ``delta`` and bandwidth ``h`` the estimate at ``a = (a0, a1)``
is

    sum_j K(U_[j] - a0 cos Z_(j) - a1 sin Z_(j); h) * (Z_(j+1) - Z_(j))

over the active indices of the window. No density estimate of the design is
divided out; the spacings play that role.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from rcdensity.errors import ParameterError, SampleSizeError
from rcdensity.kernel import KernelSpec, eval_kernel, kernel_table
from rcdensity.transform import TransformedDataset, window

FloatArray = NDArray[np.float64]

MAX_DELTA = 0.25 * math.pi
_GRID_CHUNK_ELEMENTS = 1 << 21

logger = logging.getLogger(__name__)


@dataclass(frozen=True, slots=True)
class EvalPoint:
    """Point ``(a0, a1)`` at which the coefficient density is estimated."""

    a0: float
    a1: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.a0) and math.isfinite(self.a1)):
            raise ParameterError(f"evaluation point must be finite, got ({self.a0}, {self.a1})")
        object.__setattr__(self, "a0", float(self.a0))
        object.__setattr__(self, "a1", float(self.a1))


@dataclass(frozen=True)
class EstimatorConfig:
    """Bandwidth ``h``, threshold ``delta`` and kernel for one estimate.

    ``tabulated`` switches grid evaluation to the interpolated kernel table.
    """

    h: float
    delta: float
    kernel: KernelSpec
    tabulated: bool = False

    def __post_init__(self) -> None:
        if not (self.h > 0 and math.isfinite(self.h)):
            raise ParameterError(f"h must be positive and finite, got {self.h!r}")
        if not (0.0 <= self.delta <= MAX_DELTA):
            raise ParameterError(f"delta must lie in [0, pi/4], got {self.delta!r}")


@dataclass(frozen=True)
class _WindowTerms:
    u: FloatArray
    cos_z: FloatArray
    sin_z: FloatArray
    spacing: FloatArray

    @property
    def is_empty(self) -> bool:
        return self.spacing.size == 0


def _window_terms(data: TransformedDataset, delta: float) -> _WindowTerms:
    if data.n < 2:
        raise SampleSizeError(f"need at least 2 observations, got {data.n}")
    info = window(data, delta)
    span = slice(info.active_indices.start, info.active_indices.stop)
    z = data.z_sorted[span]
    return _WindowTerms(
        u=data.u_paired[span],
        cos_z=np.cos(z),
        sin_z=np.sin(z),
        spacing=data.spacings[span],
    )


def estimate_point(data: TransformedDataset, cfg: EstimatorConfig, a: EvalPoint) -> float:
    """Estimate ``f_A(a)``; zero when the window is empty.

    The result is signed. Use :func:`nonnegative` only for display.
    """
    terms = _window_terms(data, cfg.delta)
    if terms.is_empty:
        return 0.0
    args = terms.u - a.a0 * terms.cos_z - a.a1 * terms.sin_z
    values = eval_kernel(cfg.kernel, args, cfg.h)
    return float(np.dot(values, terms.spacing))


def _grid_block(
    terms: _WindowTerms,
    cfg: EstimatorConfig,
    a0: FloatArray,
    a1: FloatArray,
) -> FloatArray:
    args = (
        terms.u[None, :]
        - a0[:, None] * terms.cos_z[None, :]
        - a1[:, None] * terms.sin_z[None, :]
    )
    if cfg.tabulated:
        values = kernel_table(cfg.kernel)(args, cfg.h)
    else:
        values = eval_kernel(cfg.kernel, args, cfg.h)
    return values @ terms.spacing


def estimate_grid(
    data: TransformedDataset,
    cfg: EstimatorConfig,
    grid: Sequence[EvalPoint],
    *,
    max_workers: int | None = None,
) -> FloatArray:
    """Estimate ``f_A`` at every grid point.

    ``cos Z``, ``sin Z`` and the spacings are computed once and shared by all
    points. With ``max_workers > 1`` point blocks are evaluated in a thread
    pool; results do not depend on the worker count.

    Args:
        data: Transformed sample.
        cfg: Bandwidth, threshold and kernel.
        grid: Nonempty sequence of evaluation points.
        max_workers: Thread cap; ``None`` or 1 runs sequentially.

    Returns:
        Array of estimates aligned with ``grid``.
    """
    points = list(grid)
    if not points:
        raise ParameterError("grid must contain at least one point")
    terms = _window_terms(data, cfg.delta)
    if terms.is_empty:
        return np.zeros(len(points))
    a0 = np.array([pt.a0 for pt in points])
    a1 = np.array([pt.a1 for pt in points])
    block = max(1, _GRID_CHUNK_ELEMENTS // terms.spacing.size)
    starts = range(0, len(points), block)
    if max_workers is None or max_workers <= 1 or len(starts) == 1:
        parts = [_grid_block(terms, cfg, a0[s : s + block], a1[s : s + block]) for s in starts]
    else:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            parts = list(
                pool.map(
                    lambda s: _grid_block(terms, cfg, a0[s : s + block], a1[s : s + block]),
                    starts,
                )
            )
    return np.concatenate(parts)


def grid_points(a0: Iterable[float], a1: Iterable[float]) -> list[EvalPoint]:
    """Cartesian product of two coordinate axes, ``a0`` varying slowest."""
    return [EvalPoint(x, y) for x in a0 for y in a1]


def nonnegative(values: ArrayLike) -> FloatArray:
    """``max(estimate, 0)`` for presentation; risk computations use raw values."""
    return np.maximum(np.asarray(values, dtype=float), 0.0)


__all__ = [
    "EstimatorConfig",
    "EvalPoint",
    "MAX_DELTA",
    "estimate_grid",
    "estimate_point",
    "grid_points",
    "nonnegative",
]
