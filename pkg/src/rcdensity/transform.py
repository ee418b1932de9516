"""Polar representation of (X, Y) observations and window bookkeeping.

The random coefficient model ``Y = A0 + A1 X`` becomes
``U = A0 cos Z + A1 sin Z`` after mapping each observation to
``Z = arctan X`` and ``U = Y / sqrt(1 + X**2)``. The estimator and the tuning
criteria only ever look at the sorted angles, their spacings and the
observations inside the window ``[-pi/2 + delta, pi/2 - delta]``.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np
from numpy.typing import ArrayLike, NDArray

from rcdensity.errors import InvalidDataError, ParameterError

FloatArray = NDArray[np.float64]

HALF_PI = 0.5 * math.pi
SPACING_CACHE_MIN = 1_000_000

logger = logging.getLogger(__name__)


def _frozen_array(values: ArrayLike) -> FloatArray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Dataset:
    """Raw ``(x, y)`` observations.

    Both coordinates are stored as read-only float arrays of equal length.
    """

    x: FloatArray
    y: FloatArray

    def __post_init__(self) -> None:
        x = _frozen_array(self.x)
        y = _frozen_array(self.y)
        if x.ndim != 1 or y.ndim != 1:
            raise InvalidDataError("x and y must be one-dimensional")
        if x.size != y.size:
            raise InvalidDataError(
                f"x and y differ in length ({x.size} != {y.size})"
            )
        if x.size < 2:
            raise InvalidDataError(f"need at least 2 observations, got {x.size}")
        bad = ~(np.isfinite(x) & np.isfinite(y))
        if bad.any():
            first = int(np.flatnonzero(bad)[0])
            raise InvalidDataError(
                f"non-finite coordinate in observation {first}: "
                f"({x[first]!r}, {y[first]!r})"
            )
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[float, float]]) -> "Dataset":
        arr = np.asarray(list(pairs), dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise InvalidDataError("pairs must be a sequence of (x, y) tuples")
        return cls(arr[:, 0], arr[:, 1])

    @property
    def n(self) -> int:
        return int(self.x.size)

    @property
    def pairs(self) -> FloatArray:
        """``(n, 2)`` array of the observations."""
        return np.column_stack([self.x, self.y])


@dataclass(frozen=True)
class TransformedDataset:
    """Angles sorted ascending with their paired ``U`` values.

    ``u_paired[j]`` belongs to the observation whose angle is
    ``z_sorted[j]``. Instances are immutable and safe to share between
    threads.
    """

    z_sorted: FloatArray
    u_paired: FloatArray
    _spacings: FloatArray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self) -> None:
        z = _frozen_array(self.z_sorted)
        u = _frozen_array(self.u_paired)
        if z.shape != u.shape or z.ndim != 1:
            raise InvalidDataError("z_sorted and u_paired must be equal-length 1-D")
        if z.size < 2:
            raise InvalidDataError(f"need at least 2 observations, got {z.size}")
        if not (np.all(np.isfinite(z)) and np.all(np.isfinite(u))):
            raise InvalidDataError("transformed data contain non-finite values")
        if np.any(np.abs(z) >= HALF_PI):
            raise InvalidDataError("angles must lie strictly inside (-pi/2, pi/2)")
        if np.any(np.diff(z) < 0):
            raise InvalidDataError("z_sorted must be nondecreasing")
        object.__setattr__(self, "z_sorted", z)
        object.__setattr__(self, "u_paired", u)
        if self._spacings is None and z.size >= SPACING_CACHE_MIN:
            object.__setattr__(self, "_spacings", _frozen_array(np.diff(z)))

    @property
    def n(self) -> int:
        return int(self.z_sorted.size)

    @property
    def spacings(self) -> FloatArray:
        """Gaps ``Z_(j+1) - Z_(j)`` for ``j = 0 .. n-2``."""
        if self._spacings is not None:
            return self._spacings
        return np.diff(self.z_sorted)


@dataclass(frozen=True, slots=True)
class WindowInfo:
    """Observations retained by the threshold ``delta``.

    ``active_indices`` holds every ``j`` with
    ``-pi/2 + delta <= Z_(j) <= Z_(j+1) <= pi/2 - delta``; it is contiguous
    because the angles are sorted.
    """

    delta: float
    left: float
    right: float
    active_indices: range

    @property
    def is_empty(self) -> bool:
        return len(self.active_indices) == 0


def to_polar(data: Dataset) -> TransformedDataset:
    """Map raw observations to sorted ``(Z, U)`` pairs.

    Args:
        data: Validated raw observations.

    Returns:
        Angles ``arctan(x)`` sorted ascending (stable on ties) with
        ``y / sqrt(1 + x**2)`` carried along.

    Raises:
        InvalidDataError: if an abscissa is so large that its angle rounds
            to ``+-pi/2``.
    """
    z = np.arctan(data.x)
    u = data.y / np.hypot(1.0, data.x)
    edge = np.abs(z) >= HALF_PI
    if edge.any():
        first = int(np.flatnonzero(edge)[0])
        raise InvalidDataError(
            f"observation {first} has x={data.x[first]!r}, whose angle is +-pi/2"
        )
    order = np.argsort(z, kind="stable")
    return TransformedDataset(z[order], u[order])


def _check_delta(delta: float) -> float:
    delta = float(delta)
    if not (0.0 <= delta < HALF_PI):
        raise ParameterError(f"delta must lie in [0, pi/2), got {delta!r}")
    return delta


def window(data: TransformedDataset, delta: float) -> WindowInfo:
    """Locate ``L_n(delta)``, ``R_n(delta)`` and the active spacing indices.

    Fewer than two angles inside ``[-pi/2 + delta, pi/2 - delta]`` gives the
    empty window with ``left = -pi/2`` and ``right = pi/2``.
    """
    delta = _check_delta(delta)
    z = data.z_sorted
    first = int(np.searchsorted(z, -HALF_PI + delta, side="left"))
    last = int(np.searchsorted(z, HALF_PI - delta, side="right")) - 1
    if last - first < 1:
        return WindowInfo(delta, -HALF_PI, HALF_PI, range(0))
    return WindowInfo(delta, float(z[first]), float(z[last]), range(first, last))


def spacing_power_sum(data: TransformedDataset, delta: float, kappa: float) -> float:
    """Sum of ``(Z_(j+1) - Z_(j)) ** kappa`` over the window's active indices."""
    if not kappa >= 1.0:
        raise ParameterError(f"kappa must be >= 1, got {kappa!r}")
    info = window(data, delta)
    if info.is_empty:
        return 0.0
    span = info.active_indices
    gaps = data.spacings[span.start : span.stop]
    return float(np.sum(gaps**kappa))


# ------------------------------------------------------------------ CSV input
def _parse_row(row: list[str]) -> tuple[float, float] | None:
    if len(row) != 2:
        return None
    try:
        x, y = float(row[0]), float(row[1])
    except ValueError:
        return None
    if not (math.isfinite(x) and math.isfinite(y)):
        return None
    return x, y


def _is_header(cells: list[str]) -> bool:
    """Two cells, neither of which reads as a number."""
    if len(cells) != 2:
        return False
    for cell in cells:
        try:
            float(cell)
        except ValueError:
            continue
        return False
    return True


def load_csv(path: str | Path) -> Dataset:
    """Read a two-column ``x,y`` CSV file.

    A header is accepted on the first non-blank line only, and only when
    neither of its two cells is numeric. Blank lines are skipped.

    Raises:
        InvalidDataError: if the file is missing, a row is malformed (the
            message names its 1-based line number) or fewer than two rows
            remain.
    """
    path = Path(path).expanduser()
    xs: list[float] = []
    ys: list[float] = []
    seen_content = False
    try:
        with path.open("r", encoding="utf-8", newline="") as fh:
            for line_no, row in enumerate(csv.reader(fh), start=1):
                cells = [cell.strip() for cell in row]
                if not any(cells):
                    continue
                parsed = _parse_row(cells)
                if parsed is None:
                    if not seen_content and _is_header(cells):
                        seen_content = True
                        logger.debug(f"[csv] treating line {line_no} as header")
                        continue
                    raise InvalidDataError(
                        f"{path}: line {line_no}: expected two numeric fields, "
                        f"got {','.join(row)!r}"
                    )
                seen_content = True
                xs.append(parsed[0])
                ys.append(parsed[1])
    except FileNotFoundError as exc:
        raise InvalidDataError(f"input file not found: {path}") from exc
    except (UnicodeDecodeError, csv.Error) as exc:
        raise InvalidDataError(f"{path}: could not read CSV ({exc})") from exc
    logger.info(f"[csv] loaded {len(xs)} observations from {path}")
    return Dataset(np.asarray(xs), np.asarray(ys))


__all__ = [
    "Dataset",
    "HALF_PI",
    "TransformedDataset",
    "WindowInfo",
    "load_csv",
    "spacing_power_sum",
    "to_polar",
    "window",
]
