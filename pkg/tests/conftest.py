"""Shared fixtures: seeded generators, small synthetic samples and CSV helpers."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from rcdensity.kernel import make_weight
from rcdensity.transform import Dataset, TransformedDataset, to_polar


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240917)


@pytest.fixture
def make_sample():
    """Factory for ``y = a0 + a1 x`` samples with Gaussian coefficients."""

    def _make(rng: np.random.Generator, n: int, x_scale: float = 2.0) -> Dataset:
        x = x_scale * rng.standard_normal(n)
        a = rng.standard_normal((n, 2))
        return Dataset(x, a[:, 0] + a[:, 1] * x)

    return _make


@pytest.fixture
def small_data(rng, make_sample) -> TransformedDataset:
    return to_polar(make_sample(rng, 60))


@pytest.fixture
def kernel4():
    return make_weight(4)


@pytest.fixture
def write_csv(tmp_path: Path):
    """Write ``lines`` to a CSV file under ``tmp_path`` and return its path."""

    def _write(lines: list[str], name: str = "data.csv") -> Path:
        path = tmp_path / name
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path

    return _write
