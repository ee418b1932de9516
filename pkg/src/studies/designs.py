"""Synthetic designs and coefficient densities for Monte Carlo studies.

The design family has exact polynomial tails,
``f_X(x) = ((beta + 1) / 2) (1 + |x|) ** (-beta - 2)``, so both tail
constants equal ``(beta + 1) / 2`` and the angle ``Z = arctan X`` has density
``f_Z(z) = f_X(tan z) / cos(z)**2``, which behaves like
``((beta + 1) / 2) (pi/2 - |z|) ** beta`` near the boundary.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import stats

from rcdensity.errors import ParameterError
from rcdensity.estimator import EvalPoint
from rcdensity.transform import HALF_PI, Dataset

FloatArray = NDArray[np.float64]
Seed = int | np.random.Generator

DesignFamily = Literal["exact_polynomial"]
CoefficientFamily = Literal["product_cauchy", "gaussian", "gaussian_mixture"]

_U_FLOOR = 2.0**-53

logger = logging.getLogger(__name__)


def _rng(seed: Seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


# ------------------------------------------------------------------ designs
@dataclass(frozen=True, slots=True)
class DesignSpec:
    """Design density with tail exponent ``beta``."""

    beta: float = 2.0
    family: DesignFamily = "exact_polynomial"

    def __post_init__(self) -> None:
        if not (self.beta > 0 and math.isfinite(self.beta)):
            raise ParameterError(f"beta must be positive, got {self.beta!r}")
        if self.family != "exact_polynomial":
            raise ParameterError(f"unknown design family {self.family!r}")

    @property
    def tail_constant(self) -> float:
        """``c_X = C_X = (beta + 1) / 2``."""
        return 0.5 * (self.beta + 1.0)


@dataclass(frozen=True, slots=True)
class SpacingsBoundParams:
    """Constants with ``c_Z d**beta <= f_Z <= C_Z d**beta``, ``d = pi/2 - |z|``."""

    c_Z: float
    C_Z: float


def design_pdf(spec: DesignSpec, x: ArrayLike) -> FloatArray:
    x = np.asarray(x, dtype=float)
    return spec.tail_constant * (1.0 + np.abs(x)) ** (-spec.beta - 2.0)


def design_cdf(spec: DesignSpec, x: ArrayLike) -> FloatArray:
    x = np.asarray(x, dtype=float)
    tail = 0.5 * (1.0 + np.abs(x)) ** (-(spec.beta + 1.0))
    return np.where(x >= 0, 1.0 - tail, tail)


def design_quantile(spec: DesignSpec, u: ArrayLike) -> FloatArray:
    """Closed-form inverse CDF; ``u`` in ``(0, 1)``."""
    u = np.asarray(u, dtype=float)
    power = -1.0 / (spec.beta + 1.0)
    upper = u >= 0.5
    mass = np.where(upper, 2.0 * (1.0 - u), 2.0 * u)
    magnitude = mass**power - 1.0
    return np.where(upper, magnitude, -magnitude)


def angle_pdf(spec: DesignSpec, z: ArrayLike) -> FloatArray:
    """``f_Z(z) = f_X(tan z) / cos(z)**2`` on ``(-pi/2, pi/2)``."""
    z = np.asarray(z, dtype=float)
    return design_pdf(spec, np.tan(z)) / np.cos(z) ** 2


def _boundary_ratio(beta: float, d: FloatArray) -> FloatArray:
    # f_Z(pi/2 - d) / d**beta written without tan/cos cancellation
    cot = np.cos(d) / np.sin(d)
    density = 0.5 * (beta + 1.0) * (1.0 + cot) ** (-beta - 2.0) / np.sin(d) ** 2
    return density / d**beta


def spacings_bound_params(spec: DesignSpec, grid_size: int = 20_001) -> SpacingsBoundParams:
    """Bound ``f_Z(z) / (pi/2 - |z|)**beta`` numerically.

    The ratio is scanned on a grid that is geometric near the boundary and
    uniform elsewhere; the analytic boundary limit ``(beta + 1) / 2`` is
    included.
    """
    near = np.geomspace(1e-8, 1e-2, grid_size // 2)
    far = np.linspace(1e-2, HALF_PI, grid_size - grid_size // 2)
    ratio = _boundary_ratio(spec.beta, np.concatenate([near, far]))
    limit = spec.tail_constant
    c_z = float(min(ratio.min(), limit))
    big_c = float(max(ratio.max(), limit))
    return SpacingsBoundParams(c_Z=c_z, C_Z=big_c)


def sample_design(spec: DesignSpec, n: int, seed: Seed) -> FloatArray:
    """Draw ``n`` abscissae by inverse-CDF sampling.

    Uniform draws are floored at ``2**-53`` so the quantile stays finite.
    """
    if n < 1:
        raise ParameterError(f"n must be at least 1, got {n}")
    rng = _rng(seed)
    u = np.maximum(rng.random(n), _U_FLOOR)
    return design_quantile(spec, u)


# ------------------------------------------------------------------ coefficients
@dataclass(frozen=True)
class GaussianComponent:
    weight: float
    mean: tuple[float, float]
    cov: tuple[tuple[float, float], tuple[float, float]]


def _spd(cov: ArrayLike, label: str) -> FloatArray:
    mat = np.asarray(cov, dtype=float)
    if mat.shape != (2, 2) or not np.all(np.isfinite(mat)):
        raise ParameterError(f"{label}: covariance must be a finite 2x2 matrix")
    if not np.allclose(mat, mat.T):
        raise ParameterError(f"{label}: covariance must be symmetric")
    try:
        np.linalg.cholesky(mat)
    except np.linalg.LinAlgError as exc:
        raise ParameterError(f"{label}: covariance is not positive definite") from exc
    return mat


@dataclass(frozen=True)
class CoefficientSpec:
    """Density of ``(A0, A1)`` with analytic point values.

    ``gaussian`` uses ``mean`` and ``cov``; ``gaussian_mixture`` uses
    ``components``; ``product_cauchy`` takes no parameters.
    """

    family: CoefficientFamily = "product_cauchy"
    mean: tuple[float, float] = (0.0, 0.0)
    cov: tuple[tuple[float, float], tuple[float, float]] = ((1.0, 0.0), (0.0, 1.0))
    components: tuple[GaussianComponent, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        if self.family not in ("product_cauchy", "gaussian", "gaussian_mixture"):
            raise ParameterError(f"unknown coefficient family {self.family!r}")
        if self.family == "gaussian":
            if len(self.mean) != 2 or not all(math.isfinite(v) for v in self.mean):
                raise ParameterError("gaussian mean must be a finite 2-vector")
            _spd(self.cov, "gaussian")
        if self.family == "gaussian_mixture":
            if not self.components:
                raise ParameterError("gaussian_mixture needs at least one component")
            weights = np.array([c.weight for c in self.components], dtype=float)
            if np.any(weights <= 0) or not math.isclose(weights.sum(), 1.0, rel_tol=1e-9):
                raise ParameterError("mixture weights must be positive and sum to 1")
            for i, comp in enumerate(self.components):
                _spd(comp.cov, f"component {i}")

    @classmethod
    def gaussian(cls, mean: ArrayLike, cov: ArrayLike) -> "CoefficientSpec":
        m = np.asarray(mean, dtype=float)
        c = np.asarray(cov, dtype=float)
        return cls(
            family="gaussian",
            mean=(float(m[0]), float(m[1])),
            cov=((float(c[0, 0]), float(c[0, 1])), (float(c[1, 0]), float(c[1, 1]))),
        )

    @classmethod
    def mixture(cls, components: list[tuple[float, ArrayLike, ArrayLike]]) -> "CoefficientSpec":
        parts = []
        for weight, mean, cov in components:
            single = cls.gaussian(mean, cov)
            parts.append(GaussianComponent(float(weight), single.mean, single.cov))
        return cls(family="gaussian_mixture", components=tuple(parts))


def sample_coefficients(spec: CoefficientSpec, n: int, seed: Seed) -> FloatArray:
    """Draw ``n`` coefficient pairs as an ``(n, 2)`` array."""
    if n < 1:
        raise ParameterError(f"n must be at least 1, got {n}")
    rng = _rng(seed)
    if spec.family == "product_cauchy":
        return rng.standard_cauchy((n, 2))
    if spec.family == "gaussian":
        return rng.multivariate_normal(spec.mean, spec.cov, size=n, method="cholesky")
    weights = np.array([c.weight for c in spec.components])
    labels = rng.choice(weights.size, size=n, p=weights / weights.sum())
    out = np.empty((n, 2))
    for i, comp in enumerate(spec.components):
        mask = labels == i
        count = int(mask.sum())
        if count:
            out[mask] = rng.multivariate_normal(comp.mean, comp.cov, size=count, method="cholesky")
    return out


def true_density(spec: CoefficientSpec, a: EvalPoint) -> float:
    """Exact value of the coefficient density at ``a``."""
    if spec.family == "product_cauchy":
        return 1.0 / (math.pi**2 * (1.0 + a.a0**2) * (1.0 + a.a1**2))
    point = np.array([a.a0, a.a1])
    if spec.family == "gaussian":
        return float(stats.multivariate_normal(spec.mean, spec.cov).pdf(point))
    return float(
        sum(
            comp.weight * stats.multivariate_normal(comp.mean, comp.cov).pdf(point)
            for comp in spec.components
        )
    )


# ------------------------------------------------------------------ samples
@dataclass(frozen=True)
class SyntheticSample:
    """Abscissae, coefficients and the observed dataset ``y = a0 + a1 x``."""

    x: FloatArray
    coefficients: FloatArray
    dataset: Dataset


def simulate_sample(
    design: DesignSpec, coeffs: CoefficientSpec, n: int, seed: Seed
) -> SyntheticSample:
    """Draw one sample; the design is drawn before the coefficients."""
    rng = _rng(seed)
    x = sample_design(design, n, rng)
    a = sample_coefficients(coeffs, n, rng)
    y = a[:, 0] + a[:, 1] * x
    return SyntheticSample(x=x, coefficients=a, dataset=Dataset(x, y))


__all__ = [
    "CoefficientSpec",
    "DesignSpec",
    "GaussianComponent",
    "SpacingsBoundParams",
    "SyntheticSample",
    "angle_pdf",
    "design_cdf",
    "design_pdf",
    "design_quantile",
    "sample_coefficients",
    "sample_design",
    "simulate_sample",
    "spacings_bound_params",
    "true_density",
]
