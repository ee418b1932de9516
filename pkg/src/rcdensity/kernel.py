"""Flat-top weights and the Fourier-inversion kernel ``K(x; h)``.

The weight family is ``w(t) = (1 - t**(2m))**p`` on ``|t| <= 1`` and zero
outside. With ``m = ceil((ell + 1) / 2)`` and ``p = ell + 2`` it is even,
equals one at the origin with vanishing derivatives up to order ``ell`` and is
``(ell + 1)``-times continuously differentiable on the real line.

The kernel is

    K(x; h) = h**-2 * (2 / (4 pi**2)) * int_0^1 w(s) s cos(s x / h) ds,

so everything reduces to the cosine transform ``J(omega)`` of the polynomial
profile ``g(s) = s w(s)`` at ``omega = |x| / h``. Moderate frequencies use
panel-split Gauss-Legendre quadrature whose node count grows with ``omega``;
very large frequencies use the exact integration-by-parts expansion of
``J``, which terminates because ``g`` is a polynomial.
"""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import Polynomial
from numpy.typing import ArrayLike, NDArray
from scipy.special import comb, roots_legendre

from rcdensity.errors import ParameterError

FloatArray = NDArray[np.float64]

PREFACTOR = 2.0 / (4.0 * math.pi**2)
PANEL_ORDER = 32  # Gauss-Legendre nodes per panel
_CHUNK_ELEMENTS = 1 << 22

logger = logging.getLogger(__name__)


@dataclass(frozen=True, slots=True)
class KernelSpec:
    """Weight ``(1 - t**(2m))**p`` of flatness order ``ell`` plus quadrature policy.

    Attributes:
        ell: Flatness order; derivatives 1..ell of ``w`` vanish at zero.
        m: Half-degree of the flat core, ``2m >= ell + 1``.
        p: Boundary exponent, at least ``ell + 2``.
        quadrature_nodes: Base Gauss-Legendre node count.
        exact_tail_frequency: Frequencies ``|x|/h`` above this (and above
            ``8 * degree**2``) use the closed-form expansion.
    """

    ell: int
    m: int
    p: int
    quadrature_nodes: int = 64
    exact_tail_frequency: float = 1.0e4

    def __post_init__(self) -> None:
        if self.ell < 0:
            raise ParameterError(f"ell must be nonnegative, got {self.ell}")
        if self.m < 1 or 2 * self.m < self.ell + 1:
            raise ParameterError(f"m={self.m} violates 2m >= ell+1 for ell={self.ell}")
        if self.p < self.ell + 2:
            raise ParameterError(f"p={self.p} must be at least ell+2={self.ell + 2}")
        if self.quadrature_nodes < 1:
            raise ParameterError("quadrature_nodes must be positive")
        if not self.exact_tail_frequency > 0:
            raise ParameterError("exact_tail_frequency must be positive")

    @property
    def degree(self) -> int:
        """Polynomial degree of the profile ``s * w(s)``."""
        return 2 * self.m * self.p + 1

    @property
    def tail_frequency(self) -> float:
        return max(self.exact_tail_frequency, 8.0 * self.degree**2)

    def with_nodes(self, quadrature_nodes: int) -> "KernelSpec":
        return dataclasses.replace(self, quadrature_nodes=quadrature_nodes)


def make_weight(ell: int, *, quadrature_nodes: int = 64) -> KernelSpec:
    """Return the weight of flatness order ``ell``.

    ``m`` is the smallest integer with ``2m >= ell + 1`` and ``p = ell + 2``.
    """
    if ell < 0 or int(ell) != ell:
        raise ParameterError(f"ell must be a nonnegative integer, got {ell!r}")
    ell = int(ell)
    return KernelSpec(ell=ell, m=(ell + 2) // 2, p=ell + 2, quadrature_nodes=quadrature_nodes)


def eval_weight(spec: KernelSpec, t: ArrayLike) -> float | FloatArray:
    """Evaluate ``w`` exactly; zero outside ``[-1, 1]``."""
    t_arr = np.asarray(t, dtype=float)
    clipped = np.clip(t_arr, -1.0, 1.0)
    values = np.where(np.abs(t_arr) <= 1.0, (1.0 - clipped ** (2 * spec.m)) ** spec.p, 0.0)
    return float(values) if values.ndim == 0 else values


# ------------------------------------------------------------------ profile
@lru_cache(maxsize=None)
def _profile(m: int, p: int) -> Polynomial:
    coef = np.zeros(2 * m * p + 2)
    for j in range(p + 1):
        coef[2 * m * j + 1] = (-1) ** j * comb(p, j, exact=True)
    return Polynomial(coef)


@lru_cache(maxsize=None)
def _endpoint_derivatives(m: int, p: int) -> tuple[FloatArray, FloatArray]:
    poly = _profile(m, p)
    at_zero, at_one = [], []
    for _ in range(poly.degree() + 1):
        at_zero.append(poly(0.0))
        at_one.append(poly(1.0))
        poly = poly.deriv()
    return np.asarray(at_zero), np.asarray(at_one)


@lru_cache(maxsize=None)
def _weighted_rule(m: int, p: int, panels: int) -> tuple[FloatArray, FloatArray]:
    """Composite Gauss-Legendre nodes on [0, 1] with weights times ``g``."""
    base_x, base_w = roots_legendre(PANEL_ORDER)
    edges = np.linspace(0.0, 1.0, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    nodes = (mid[:, None] + half[:, None] * base_x[None, :]).ravel()
    weights = (half[:, None] * base_w[None, :]).ravel()
    weights = weights * _profile(m, p)(nodes)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def _parts_expansion(m: int, p: int, omega: FloatArray) -> FloatArray:
    """Exact ``int_0^1 g(s) cos(omega s) ds`` by repeated integration by parts.

    Horner form in ``r = 1 / (i omega)``; only used for large ``omega`` where
    successive terms shrink like ``degree / omega``.
    """
    at_zero, at_one = _endpoint_derivatives(m, p)
    phase = np.exp(1j * omega)
    r = 1.0 / (1j * omega)
    top = at_zero.size - 1
    acc = (-1) ** top * (at_one[top] * phase - at_zero[top])
    for k in range(top - 1, -1, -1):
        acc = (-1) ** k * (at_one[k] * phase - at_zero[k]) + r * acc
    return np.real(r * acc)


def _cosine_transform(spec: KernelSpec, omega: FloatArray) -> FloatArray:
    flat = np.ravel(omega)
    out = np.empty_like(flat)
    tail = flat > spec.tail_frequency
    if tail.any():
        out[tail] = _parts_expansion(spec.m, spec.p, flat[tail])
    body = np.flatnonzero(~tail)
    if body.size:
        # never fewer nodes than the profile degree + 1
        floor = max(spec.quadrature_nodes, spec.degree + 1)
        needed = np.maximum(floor, np.ceil(4.0 * flat[body] / math.pi) + 32)
        panels = np.ceil(needed / PANEL_ORDER).astype(np.int64)
        for count in np.unique(panels):
            idx = body[panels == count]
            nodes, weights = _weighted_rule(spec.m, spec.p, int(count))
            rows = max(1, _CHUNK_ELEMENTS // nodes.size)
            for start in range(0, idx.size, rows):
                part = idx[start : start + rows]
                out[part] = np.cos(np.multiply.outer(flat[part], nodes)) @ weights
    return out.reshape(np.shape(omega))


def _frequencies(x: ArrayLike, h: float) -> tuple[FloatArray, float]:
    h = float(h)
    if not (h > 0.0 and math.isfinite(h)):
        raise ParameterError(f"bandwidth h must be positive and finite, got {h!r}")
    omega = np.abs(np.asarray(x, dtype=float)) / h
    if not np.all(np.isfinite(omega)):
        raise ParameterError("kernel arguments must be finite")
    return omega, h


def eval_kernel(spec: KernelSpec, x: ArrayLike, h: float) -> float | FloatArray:
    """Evaluate ``K(x; h)`` for a scalar or an array of arguments.

    Args:
        spec: Weight specification.
        x: Kernel argument(s).
        h: Bandwidth, strictly positive.

    Returns:
        ``K(x; h)`` with the shape of ``x`` (a float for scalar input).

    Raises:
        ParameterError: if ``h <= 0`` or an argument is not finite.
    """
    omega, h = _frequencies(x, h)
    values = _cosine_transform(spec, omega) * (PREFACTOR / h**2)
    return float(values) if values.ndim == 0 else values


def kernel_sup_bound(spec: KernelSpec, h: float) -> float:
    """``h**-2 (2 / 4pi**2) int_0^1 |w(s)| s ds``, a bound on ``sup |K(.; h)|``."""
    # w >= 0 on [0, 1], so |w| = w
    integral = _profile(spec.m, spec.p).integ()(1.0)
    return float(PREFACTOR * integral / h**2)


def kernel_lipschitz_bound(spec: KernelSpec, h: float) -> float:
    """``h**-3 (2 / 4pi**2) int_0^1 |w(s)| s**2 ds``, a bound on ``sup |dK/dx|``."""
    integral = (_profile(spec.m, spec.p) * Polynomial([0.0, 1.0])).integ()(1.0)
    return float(PREFACTOR * integral / h**3)


# ------------------------------------------------------------------ table cache
@dataclass(frozen=True, eq=False)
class KernelTable:
    """``K(.; 1)`` sampled on a uniform frequency grid, linearly interpolated.

    Arguments with ``|x|/h`` beyond ``max_frequency`` are evaluated exactly.
    The interpolation error is at most ``step**2 / 32 * (2 / 4pi**2) * h**-2``.
    """

    spec: KernelSpec
    step: float
    max_frequency: float
    values: FloatArray

    def __call__(self, x: ArrayLike, h: float) -> FloatArray:
        omega, h = _frequencies(x, h)
        flat = np.ravel(omega)
        out = np.empty_like(flat)
        inside = flat <= self.max_frequency
        pos = flat[inside] / self.step
        idx = np.minimum(pos.astype(np.int64), self.values.size - 2)
        frac = pos - idx
        out[inside] = self.values[idx] * (1.0 - frac) + self.values[idx + 1] * frac
        if not inside.all():
            out[~inside] = _cosine_transform(self.spec, flat[~inside])
        return (out * (PREFACTOR / h**2)).reshape(omega.shape)


@lru_cache(maxsize=8)
def kernel_table(
    spec: KernelSpec, step: float = 1.0e-2, max_frequency: float = 1.0e3
) -> KernelTable:
    """Build (and memoise) the interpolation table for ``spec``."""
    if not (step > 0 and max_frequency > step):
        raise ParameterError("kernel table needs 0 < step < max_frequency")
    count = int(math.ceil(max_frequency / step)) + 1
    grid = np.arange(count) * step
    values = _cosine_transform(spec, grid)
    values.setflags(write=False)
    logger.debug(f"[kernel] tabulated {count} frequencies for ell={spec.ell}")
    return KernelTable(spec, float(step), float(grid[-1]), values)


__all__ = [
    "KernelSpec",
    "KernelTable",
    "PREFACTOR",
    "eval_kernel",
    "eval_weight",
    "kernel_lipschitz_bound",
    "kernel_sup_bound",
    "kernel_table",
    "make_weight",
]
