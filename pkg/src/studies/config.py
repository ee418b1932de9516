"""JSON run configuration for the command-line studies.

Every section is a dataclass with explicit defaults. Unknown keys are
rejected at every level, and ``RunConfig.to_dict`` emits the fully defaulted
tree, so a printed configuration can be fed back unchanged.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

import numpy as np

from rcdensity.errors import RCDensityError
from rcdensity.estimator import EvalPoint, grid_points
from rcdensity.kernel import KernelSpec, make_weight
from rcdensity.tuning import HolderClassSpec, LepskiConfig
from studies.designs import CoefficientSpec, DesignSpec
from studies.simulate import LepskiTuning, OracleTuning, Prop1Tuning, TuningRule

COMMANDS = ("estimate", "simulate", "rates", "spacings-check")
TUNING_MODES = ("fixed", "prop1", "lepski", "oracle")


class ConfigError(RCDensityError):
    """Raised for malformed, unknown or inconsistent configuration values."""

    exit_code = 2


def _number(value: Any, name: str, *, positive: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{name} must be a number, got {value!r}")
    value = float(value)
    if not math.isfinite(value) or (positive and value <= 0):
        qualifier = "positive " if positive else ""
        raise ConfigError(f"{name} must be a {qualifier}finite number, got {value!r}")
    return value


def _integer(value: Any, name: str, *, minimum: int | None = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        if isinstance(value, float) and value.is_integer():
            value = int(value)
        else:
            raise ConfigError(f"{name} must be an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def _flag(value: Any, name: str) -> bool:
    if not isinstance(value, bool):
        raise ConfigError(f"{name} must be true or false, got {value!r}")
    return value


def _choice(value: Any, name: str, options: tuple[str, ...]) -> str:
    if value not in options:
        raise ConfigError(f"{name} must be one of {', '.join(options)}; got {value!r}")
    return str(value)


def _pair(value: Any, name: str) -> list[float]:
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ConfigError(f"{name} must be a list of two numbers, got {value!r}")
    return [_number(v, f"{name}[{i}]") for i, v in enumerate(value)]


def _axis(value: Any, name: str) -> list[float]:
    if not isinstance(value, (list, tuple)) or len(value) != 3:
        raise ConfigError(f"{name} must be [start, stop, count], got {value!r}")
    start = _number(value[0], f"{name}[0]")
    stop = _number(value[1], f"{name}[1]")
    count = _integer(value[2], f"{name}[2]", minimum=1)
    return [start, stop, count]


def _from_mapping(cls, data: Any, path: str):
    if not isinstance(data, dict):
        raise ConfigError(f"'{path}' must be a JSON object")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown key(s) in '{path}': {', '.join(unknown)}")
    return cls(**data)


# ------------------------------------------------------------------ sections
@dataclass
class KernelSettings:
    """Weight order and quadrature; ``ell: null`` follows ``2 floor(holder.alpha)``."""

    ell: int | None = None
    quadrature_nodes: int = 64
    tabulated: bool = False

    def __post_init__(self) -> None:
        if self.ell is not None:
            self.ell = _integer(self.ell, "kernel.ell", minimum=0)
        self.quadrature_nodes = _integer(
            self.quadrature_nodes, "kernel.quadrature_nodes", minimum=1
        )
        self.tabulated = _flag(self.tabulated, "kernel.tabulated")


@dataclass
class TuningSettings:
    """Tuning mode plus the parameters each mode reads.

    ``fixed`` uses ``h``/``delta``; ``prop1`` and ``lepski`` select
    ``delta`` from the data; ``oracle`` needs a known design and is only valid
    for simulations.
    """

    mode: str = "prop1"
    h: float | None = None
    delta: float | None = None
    q: float = 1.25
    kappa_le: float = 400.0
    c_delta: float = 1.0
    c_h: float = 1.0
    log_variant: bool = False

    def __post_init__(self) -> None:
        self.mode = _choice(self.mode, "tuning.mode", TUNING_MODES)
        if self.h is not None:
            self.h = _number(self.h, "tuning.h", positive=True)
        if self.delta is not None:
            self.delta = _number(self.delta, "tuning.delta")
        self.q = _number(self.q, "tuning.q", positive=True)
        self.kappa_le = _number(self.kappa_le, "tuning.kappa_le", positive=True)
        self.c_delta = _number(self.c_delta, "tuning.c_delta", positive=True)
        self.c_h = _number(self.c_h, "tuning.c_h", positive=True)
        self.log_variant = _flag(self.log_variant, "tuning.log_variant")

    def lepski(self) -> LepskiConfig:
        return LepskiConfig(q=self.q, kappa_le=self.kappa_le)

    def rule(self, alpha: float) -> TuningRule:
        """Simulation tuning rule for this mode; ``fixed`` has none."""
        if self.mode == "oracle":
            return OracleTuning(alpha, self.c_delta, self.c_h, self.log_variant)
        if self.mode == "prop1":
            return Prop1Tuning(alpha)
        if self.mode == "lepski":
            return LepskiTuning(self.lepski(), alpha)
        raise ConfigError("tuning.mode 'fixed' is not available for simulations")


@dataclass
class DesignSettings:
    beta: float = 2.0
    family: str = "exact_polynomial"

    def __post_init__(self) -> None:
        self.beta = _number(self.beta, "design.beta", positive=True)
        self.family = _choice(self.family, "design.family", ("exact_polynomial",))

    def spec(self) -> DesignSpec:
        return DesignSpec(beta=self.beta, family=self.family)


@dataclass
class CoefficientSettings:
    """``components`` entries are objects with ``weight``, ``mean`` and ``cov``."""

    family: str = "product_cauchy"
    mean: list[float] = field(default_factory=lambda: [0.0, 0.0])
    cov: list[list[float]] = field(default_factory=lambda: [[1.0, 0.0], [0.0, 1.0]])
    components: list[dict[str, Any]] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.family = _choice(
            self.family, "coeffs.family", ("product_cauchy", "gaussian", "gaussian_mixture")
        )
        self.mean = _pair(self.mean, "coeffs.mean")
        self.cov = self._matrix(self.cov, "coeffs.cov")
        if not isinstance(self.components, list):
            raise ConfigError("coeffs.components must be a list")
        parsed = []
        for i, comp in enumerate(self.components):
            label = f"coeffs.components[{i}]"
            if not isinstance(comp, dict) or set(comp) != {"weight", "mean", "cov"}:
                raise ConfigError(f"{label} must have exactly the keys weight, mean, cov")
            parsed.append(
                {
                    "weight": _number(comp["weight"], f"{label}.weight", positive=True),
                    "mean": _pair(comp["mean"], f"{label}.mean"),
                    "cov": self._matrix(comp["cov"], f"{label}.cov"),
                }
            )
        self.components = parsed

    @staticmethod
    def _matrix(value: Any, name: str) -> list[list[float]]:
        if not isinstance(value, (list, tuple)) or len(value) != 2:
            raise ConfigError(f"{name} must be a 2x2 nested list")
        return [_pair(row, f"{name}[{i}]") for i, row in enumerate(value)]

    def spec(self) -> CoefficientSpec:
        if self.family == "gaussian":
            return CoefficientSpec.gaussian(self.mean, self.cov)
        if self.family == "gaussian_mixture":
            return CoefficientSpec.mixture(
                [(c["weight"], c["mean"], c["cov"]) for c in self.components]
            )
        return CoefficientSpec()


@dataclass
class GridSettings:
    """Evaluation points: explicit ``points`` or the product of two axes."""

    a0: list[float] = field(default_factory=lambda: [0.0, 0.0, 1])
    a1: list[float] = field(default_factory=lambda: [0.0, 0.0, 1])
    points: list[list[float]] | None = None

    def __post_init__(self) -> None:
        self.a0 = _axis(self.a0, "grid.a0")
        self.a1 = _axis(self.a1, "grid.a1")
        if self.points is not None:
            if not isinstance(self.points, list) or not self.points:
                raise ConfigError("grid.points must be a nonempty list of [a0, a1]")
            self.points = [_pair(p, f"grid.points[{i}]") for i, p in enumerate(self.points)]

    def evaluation_points(self) -> list[EvalPoint]:
        if self.points is not None:
            return [EvalPoint(p[0], p[1]) for p in self.points]
        axes = [np.linspace(ax[0], ax[1], int(ax[2])) for ax in (self.a0, self.a1)]
        return grid_points(*axes)


@dataclass
class SimulationSettings:
    scenario_id: str = "default"
    n: int = 1000
    replications: int = 100
    metric: str = "pointwise"
    point: list[float] = field(default_factory=lambda: [0.0, 0.0])

    def __post_init__(self) -> None:
        if not isinstance(self.scenario_id, str) or not self.scenario_id:
            raise ConfigError("simulation.scenario_id must be a nonempty string")
        self.n = _integer(self.n, "simulation.n", minimum=5)
        self.replications = _integer(self.replications, "simulation.replications", minimum=1)
        self.metric = _choice(self.metric, "simulation.metric", ("pointwise", "uniform"))
        self.point = _pair(self.point, "simulation.point")


@dataclass
class RatesSettings:
    n_values: list[int] = field(default_factory=lambda: [1000, 3000, 10000, 30000, 100000])
    replications: int = 200
    remove_log_factor: bool = True

    def __post_init__(self) -> None:
        if not isinstance(self.n_values, list):
            raise ConfigError("rates.n_values must be a list of integers")
        self.n_values = [
            _integer(v, f"rates.n_values[{i}]", minimum=5) for i, v in enumerate(self.n_values)
        ]
        self.replications = _integer(self.replications, "rates.replications", minimum=1)
        self.remove_log_factor = _flag(self.remove_log_factor, "rates.remove_log_factor")


@dataclass
class SpacingsSettings:
    """``delta = null`` means ``n ** (-1 / (beta + 1))`` capped at ``pi/4``."""

    betas: list[float] = field(default_factory=lambda: [1.5, 2.0, 3.0])
    n_values: list[int] = field(default_factory=lambda: [100, 1000])
    kappa: float = 2.0
    delta: float | None = None
    replications: int = 500

    def __post_init__(self) -> None:
        if not isinstance(self.betas, list) or not self.betas:
            raise ConfigError("spacings.betas must be a nonempty list")
        if not isinstance(self.n_values, list) or not self.n_values:
            raise ConfigError("spacings.n_values must be a nonempty list")
        self.betas = [
            _number(b, f"spacings.betas[{i}]", positive=True) for i, b in enumerate(self.betas)
        ]
        self.n_values = [
            _integer(v, f"spacings.n_values[{i}]", minimum=2) for i, v in enumerate(self.n_values)
        ]
        self.kappa = _number(self.kappa, "spacings.kappa", positive=True)
        if self.delta is not None:
            self.delta = _number(self.delta, "spacings.delta", positive=True)
        self.replications = _integer(self.replications, "spacings.replications", minimum=1)

    def delta_for(self, beta: float, n: int) -> float:
        if self.delta is not None:
            return self.delta
        return min(n ** (-1.0 / (beta + 1.0)), 0.25 * math.pi)


@dataclass
class HolderSettings:
    """Declared smoothness; the class constants are recorded, never checked."""

    alpha: float = 2.0
    c_A: float = 1.0
    c_B: float = 1.0
    r_A: float = 1.0
    c_M: float = 1.0

    def __post_init__(self) -> None:
        for f in fields(self):
            setattr(self, f.name, _number(getattr(self, f.name), f"holder.{f.name}", positive=True))

    def spec(self) -> HolderClassSpec:
        return HolderClassSpec(**asdict(self))


@dataclass
class OutputSettings:
    clip_negative: bool = False
    gnuplot: bool = True

    def __post_init__(self) -> None:
        self.clip_negative = _flag(self.clip_negative, "output.clip_negative")
        self.gnuplot = _flag(self.gnuplot, "output.gnuplot")


_SECTIONS = {
    "kernel": KernelSettings,
    "tuning": TuningSettings,
    "design": DesignSettings,
    "coeffs": CoefficientSettings,
    "grid": GridSettings,
    "simulation": SimulationSettings,
    "rates": RatesSettings,
    "spacings": SpacingsSettings,
    "holder": HolderSettings,
    "output": OutputSettings,
}


@dataclass
class RunConfig:
    """Complete configuration of one command-line run."""

    command: str = "estimate"
    input_path: str | None = None
    output_path: str = "rcdensity_out"
    seed: int = 0
    threads: int = 1
    kernel: KernelSettings = field(default_factory=KernelSettings)
    tuning: TuningSettings = field(default_factory=TuningSettings)
    design: DesignSettings = field(default_factory=DesignSettings)
    coeffs: CoefficientSettings = field(default_factory=CoefficientSettings)
    grid: GridSettings = field(default_factory=GridSettings)
    simulation: SimulationSettings = field(default_factory=SimulationSettings)
    rates: RatesSettings = field(default_factory=RatesSettings)
    spacings: SpacingsSettings = field(default_factory=SpacingsSettings)
    holder: HolderSettings = field(default_factory=HolderSettings)
    output: OutputSettings = field(default_factory=OutputSettings)

    def __post_init__(self) -> None:
        self.command = _choice(self.command, "command", COMMANDS)
        if self.input_path is not None:
            self.input_path = str(self.input_path)
        self.output_path = str(self.output_path)
        self.seed = _integer(self.seed, "seed", minimum=0)
        if self.seed >= 2**64:
            raise ConfigError(f"seed must fit in 64 bits, got {self.seed}")
        self.threads = _integer(self.threads, "threads", minimum=1)
        required = self.holder.spec().kernel_order
        if self.kernel.ell is not None and self.kernel.ell < required:
            raise ConfigError(
                f"kernel.ell={self.kernel.ell} is below 2 floor(holder.alpha)={required}"
            )

    def kernel_spec(self) -> KernelSpec:
        """Weight for the declared smoothness unless ``kernel.ell`` is set."""
        if self.kernel.ell is None:
            return self.holder.spec().kernel(self.kernel.quadrature_nodes)
        return make_weight(self.kernel.ell, quadrature_nodes=self.kernel.quadrature_nodes)

    @property
    def out_dir(self) -> Path:
        """Directory where reports and logs are written."""
        return Path(self.output_path).expanduser()

    def ensure_out_dir(self) -> Path:
        out_dir = self.out_dir
        out_dir.mkdir(parents=True, exist_ok=True)
        return out_dir

    def to_dict(self) -> dict[str, Any]:
        """Return a JSON-serialisable settings dict."""
        return asdict(self)

    def to_json_text(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_json(self, path: str | Path) -> None:
        Path(path).expanduser().write_text(self.to_json_text(), encoding="utf-8")

    @classmethod
    def from_dict(cls, data: Any) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a JSON object")
        top = {f.name for f in fields(cls)} - set(_SECTIONS)
        unknown = sorted(set(data) - top - set(_SECTIONS))
        if unknown:
            raise ConfigError(f"unknown configuration key(s): {', '.join(unknown)}")
        kwargs: dict[str, Any] = {k: v for k, v in data.items() if k in top}
        for name, section in _SECTIONS.items():
            if name in data:
                kwargs[name] = _from_mapping(section, data[name], name)
        return cls(**kwargs)

    @classmethod
    def from_json(cls, path: str | Path) -> "RunConfig":
        """Load settings from a JSON file."""
        path = Path(path).expanduser()
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        return cls.from_dict(data)


__all__ = [
    "COMMANDS",
    "CoefficientSettings",
    "ConfigError",
    "DesignSettings",
    "GridSettings",
    "HolderSettings",
    "KernelSettings",
    "OutputSettings",
    "RatesSettings",
    "RunConfig",
    "SimulationSettings",
    "SpacingsSettings",
    "TuningSettings",
]
