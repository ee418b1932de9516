import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.polynomial import Polynomial
from numpy.polynomial.legendre import leggauss

from rcdensity.errors import ParameterError
from rcdensity.kernel import (
    PREFACTOR,
    KernelSpec,
    eval_kernel,
    eval_weight,
    kernel_lipschitz_bound,
    kernel_sup_bound,
    kernel_table,
    make_weight,
)


def reference_transform(spec: KernelSpec, omega: float, panels: int = 400) -> float:
    """``int_0^1 s w(s) cos(omega s) ds`` by a fine composite Gauss-Legendre rule."""
    base_x, base_w = leggauss(64)
    edges = np.linspace(0.0, 1.0, panels + 1)
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        s = 0.5 * (hi - lo) * base_x + 0.5 * (hi + lo)
        w = (1.0 - s ** (2 * spec.m)) ** spec.p
        total += 0.5 * (hi - lo) * np.sum(base_w * s * w * np.cos(omega * s))
    return float(total)


class TestWeight:
    @pytest.mark.parametrize("ell, m, p", [(0, 1, 2), (1, 1, 3), (2, 2, 4), (4, 3, 6), (5, 3, 7)])
    def test_make_weight_parameters(self, ell, m, p):
        spec = make_weight(ell)
        assert (spec.ell, spec.m, spec.p) == (ell, m, p)
        assert 2 * spec.m >= ell + 1

    def test_reference_values(self):
        spec = make_weight(0)
        assert eval_weight(spec, 0.0) == 1.0
        assert eval_weight(spec, 0.5) == pytest.approx(0.5625, rel=1e-15)
        assert eval_weight(spec, 1.0) == 0.0
        assert eval_weight(spec, 2.0) == 0.0

    @pytest.mark.parametrize("ell", [0, 2, 4, 6])
    def test_flat_at_origin(self, ell):
        spec = make_weight(ell)
        core = Polynomial([1.0] + [0.0] * (2 * spec.m - 1) + [-1.0]) ** spec.p
        for k in range(1, ell + 1):
            assert core.deriv(k)(0.0) == 0.0
        t = np.linspace(-1.0, 1.0, 101)
        np.testing.assert_allclose(eval_weight(spec, t), core(t), atol=1e-12)

    @pytest.mark.parametrize("ell", [0, 2, 4])
    def test_smooth_at_support_edge(self, ell):
        spec = make_weight(ell)
        core = Polynomial([1.0] + [0.0] * (2 * spec.m - 1) + [-1.0]) ** spec.p
        for k in range(ell + 2):
            deriv = core.deriv(k)
            scale = np.sum(np.abs(deriv.coef))
            assert abs(deriv(1.0)) <= 1e-10 * scale

    def test_finite_differences_vanish(self, kernel4):
        step = 1e-2
        first = (eval_weight(kernel4, step) - eval_weight(kernel4, -step)) / (2 * step)
        second = (eval_weight(kernel4, step) - 2.0 + eval_weight(kernel4, -step)) / step**2
        assert abs(first) < 1e-6
        assert abs(second) < 1e-6

    @given(st.floats(min_value=-3.0, max_value=3.0), st.integers(min_value=0, max_value=8))
    @settings(max_examples=300, deadline=None)
    def test_even_and_bounded(self, t, ell):
        spec = make_weight(ell)
        value = eval_weight(spec, t)
        assert 0.0 <= value <= 1.0
        assert value == eval_weight(spec, -t)
        if abs(t) > 1.0:
            assert value == 0.0

    def test_invalid_parameters(self):
        with pytest.raises(ParameterError):
            make_weight(-1)
        with pytest.raises(ParameterError):
            make_weight(1.5)
        with pytest.raises(ParameterError):
            KernelSpec(ell=4, m=2, p=6)
        with pytest.raises(ParameterError):
            KernelSpec(ell=4, m=3, p=5)


class TestEvalKernel:
    @pytest.mark.parametrize("h", [0.1, 1.0, 3.0])
    def test_value_at_zero(self, h):
        expected = h**-2 / (12 * math.pi**2)
        assert eval_kernel(make_weight(0), 0.0, h) == pytest.approx(expected, rel=1e-13)

    def test_scalar_and_array_shapes(self, kernel4):
        assert isinstance(eval_kernel(kernel4, 0.3, 1.0), float)
        out = eval_kernel(kernel4, np.zeros((2, 3)), 1.0)
        assert out.shape == (2, 3)

    @given(st.floats(min_value=-500.0, max_value=500.0), st.floats(min_value=0.05, max_value=5.0))
    @settings(max_examples=200, deadline=None)
    def test_even_scaled_and_bounded(self, x, h):
        spec = make_weight(4)
        value = eval_kernel(spec, x, h)
        bound = kernel_sup_bound(spec, h)
        assert value == eval_kernel(spec, -x, h)
        assert abs(value) <= bound * (1.0 + 1e-12)
        scaled = h**-2 * eval_kernel(spec, x / h, 1.0)
        assert abs(value - scaled) <= 1e-10 * bound

    def test_matches_reference_quadrature(self, kernel4):
        for omega in (0.0, 0.7, 13.0, 250.0, 900.0):
            expected = PREFACTOR * reference_transform(kernel4, omega)
            assert eval_kernel(kernel4, omega, 1.0) == pytest.approx(expected, abs=1e-14)

    @pytest.mark.parametrize("omega", [5.0e3, 2.0e4, 1.0e6])
    def test_high_frequency_decay(self, kernel4, omega):
        # int_0^1 s w(s) cos(omega s) ds = -1/omega**2 + O(omega**-8) for ell = 4
        assert kernel4.tail_frequency > 5.0e3
        value = eval_kernel(kernel4, omega, 1.0)
        assert value == pytest.approx(-PREFACTOR / omega**2, rel=1e-6)

    def test_tail_expansion_matches_quadrature(self, kernel4):
        omega = 2.0e4
        expected = PREFACTOR * reference_transform(kernel4, omega, panels=800)
        assert eval_kernel(kernel4, omega, 1.0) == pytest.approx(expected, abs=1e-14)

    def test_node_doubling_is_stable(self, kernel4):
        x = np.linspace(0.0, 1.0e3, 2001)
        base = eval_kernel(kernel4, x, 1.0)
        doubled = eval_kernel(kernel4.with_nodes(2 * kernel4.quadrature_nodes), x, 1.0)
        assert np.max(np.abs(base - doubled)) <= 1e-9 * kernel_sup_bound(kernel4, 1.0)

    def test_lipschitz_bound(self, kernel4, rng):
        for _ in range(20):
            x = rng.uniform(-20.0, 20.0)
            h = rng.uniform(0.2, 3.0)
            eps = 1e-5 * h
            rise = eval_kernel(kernel4, x + eps, h) - eval_kernel(kernel4, x - eps, h)
            slope = rise / (2 * eps)
            assert abs(slope) <= kernel_lipschitz_bound(kernel4, h) * (1.0 + 1e-4)

    def test_sup_bound_attained_at_zero(self):
        spec = make_weight(0)
        assert kernel_sup_bound(spec, 2.0) == pytest.approx(eval_kernel(spec, 0.0, 2.0), rel=1e-13)

    @pytest.mark.parametrize("h", [0.0, -1.0, float("inf"), float("nan")])
    def test_rejects_bad_bandwidth(self, kernel4, h):
        with pytest.raises(ParameterError):
            eval_kernel(kernel4, 0.5, h)

    def test_rejects_non_finite_argument(self, kernel4):
        with pytest.raises(ParameterError):
            eval_kernel(kernel4, np.array([0.0, np.nan]), 1.0)


class TestKernelTable:
    @pytest.mark.parametrize("h", [0.25, 1.0])
    def test_accuracy(self, kernel4, h):
        table = kernel_table(kernel4)
        x = np.concatenate([np.linspace(-300.0, 300.0, 4001), [1.5e3 * h, -4.0e4]])
        exact = eval_kernel(kernel4, x, h)
        assert np.max(np.abs(table(x, h) - exact)) <= 1e-6 * h**-2

    def test_memoised(self, kernel4):
        assert kernel_table(kernel4) is kernel_table(kernel4)

    def test_invalid_grid(self, kernel4):
        with pytest.raises(ParameterError):
            kernel_table(kernel4, step=0.0)
