import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rcdensity.errors import ParameterError, SampleSizeError
from rcdensity.estimator import EstimatorConfig, EvalPoint, estimate_point
from rcdensity.transform import HALF_PI, TransformedDataset, to_polar
from rcdensity.tuning import (
    HolderClassSpec,
    LepskiConfig,
    criterion,
    criterion_breakpoints,
    lepski_index,
    lepski_select,
    select_delta,
    select_h_known_alpha,
)


def angles(z):
    z = np.sort(np.asarray(z, dtype=float))
    return TransformedDataset(z, np.zeros(z.size))


def scan_criterion(z: np.ndarray, deltas: np.ndarray) -> np.ndarray:
    """Direct evaluation of ``C_n`` on many thresholds at once."""
    inside = (z[None, :] >= -HALF_PI + deltas[:, None]) & (z[None, :] <= HALF_PI - deltas[:, None])
    count = inside.sum(axis=1)
    gaps = np.diff(z)
    active = inside[:, :-1] & inside[:, 1:]
    s2 = (active * gaps**2).sum(axis=1)
    s3 = (active * gaps**3).sum(axis=1)
    left = np.where(inside, z[None, :], np.inf).min(axis=1)
    right = np.where(inside, z[None, :], -np.inf).max(axis=1)
    empty = count < 2
    left = np.where(empty, -HALF_PI, left)
    right = np.where(empty, HALF_PI, right)
    s2 = np.where(empty, 0.0, s2)
    s3 = np.where(empty, 0.0, s3)
    return s2 + s3 / deltas + (left + HALF_PI) ** 2 + (HALF_PI - right) ** 2 + deltas**2


class TestCriterion:
    def test_three_points(self):
        result = criterion(angles([-1.0, 0.0, 1.0]), 0.5)
        gap = (HALF_PI - 1.0) ** 2
        assert result.sum_sq == pytest.approx(2.0)
        assert result.sum_cube_over_delta == pytest.approx(4.0)
        assert result.left_gap_sq == pytest.approx(gap)
        assert result.right_gap_sq == pytest.approx(gap)
        assert result.delta_sq == 0.25
        assert result.total == pytest.approx(6.25 + 2 * gap)
        assert result.total == pytest.approx(6.9016, abs=1e-4)

    def test_empty_window(self):
        result = criterion(angles([-1.5, 1.5]), 0.3)
        assert result.total == pytest.approx(0.09)
        assert result.sum_sq == result.left_gap_sq == result.right_gap_sq == 0.0

    @pytest.mark.parametrize("delta", [0.0, -0.1, math.pi / 4 + 1e-9])
    def test_delta_out_of_range(self, delta):
        with pytest.raises(ParameterError):
            criterion(angles([-1.0, 0.0, 1.0]), delta)

    @given(
        st.lists(st.floats(min_value=-1.55, max_value=1.55), min_size=2, max_size=30),
        st.floats(min_value=1e-3, max_value=math.pi / 4),
    )
    @settings(max_examples=200, deadline=None)
    def test_terms_nonnegative_and_sum(self, z, delta):
        result = criterion(angles(z), delta)
        terms = (
            result.sum_sq,
            result.sum_cube_over_delta,
            result.left_gap_sq,
            result.right_gap_sq,
            result.delta_sq,
        )
        assert all(t >= 0.0 for t in terms)
        assert result.total == pytest.approx(sum(terms))
        assert result.total >= max(terms)

    def test_breakpoints(self, small_data):
        lo, hi = 1.0 / math.sqrt(small_data.n), math.pi / 4
        sites = np.unique(HALF_PI - np.abs(small_data.z_sorted))
        expected = sites[(sites >= lo) & (sites <= hi)]
        np.testing.assert_array_equal(criterion_breakpoints(small_data), expected)


class TestSelectDelta:
    def test_beats_dense_scan(self, make_sample):
        gen = np.random.default_rng(11)
        for _ in range(50):
            n = int(gen.integers(5, 80))
            data = to_polar(make_sample(gen, n, x_scale=float(gen.uniform(0.5, 4.0))))
            sel = select_delta(data)
            lo, hi = 1.0 / math.sqrt(n), math.pi / 4
            assert lo <= sel.delta_hat <= hi
            scan = scan_criterion(data.z_sorted, np.linspace(lo, hi, 20_001))
            best = float(scan.min())
            assert sel.criterion_value <= best + math.exp(-n) + 1e-12 * best
            assert sel.criterion_value == pytest.approx(criterion(data, sel.delta_hat).total)

    def test_interior_minimiser_when_no_breakpoints(self):
        z = np.array([-0.7, -0.2, 0.0, 0.2, 0.7])
        data = angles(z)
        assert criterion_breakpoints(data).size == 0
        s3 = float(np.sum(np.diff(z) ** 3))
        sel = select_delta(data)
        assert sel.delta_hat == pytest.approx((s3 / 2.0) ** (1.0 / 3.0), rel=1e-9)
        assert sel.breakdown.left_gap_sq == pytest.approx((HALF_PI - 0.7) ** 2)

    def test_clamped_to_lower_end(self):
        # tiny spacings put the unconstrained minimiser below n**-0.5
        z = np.linspace(-0.01, 0.01, 50)
        sel = select_delta(angles(z))
        assert sel.delta_hat == pytest.approx(1.0 / math.sqrt(50), rel=1e-12)

    def test_needs_five_observations(self):
        with pytest.raises(SampleSizeError):
            select_delta(angles([-0.5, 0.0, 0.3, 0.6]))


class TestKnownAlphaBandwidth:
    def test_reference_values(self):
        assert select_h_known_alpha(1.0, 3.7) == 1.0
        assert select_h_known_alpha(0.01, 2.0) == pytest.approx(0.56234, rel=1e-5)

    @pytest.mark.parametrize("value, alpha", [(0.0, 2.0), (-1.0, 2.0), (0.5, 0.0)])
    def test_rejects_nonpositive(self, value, alpha):
        with pytest.raises(ParameterError):
            select_h_known_alpha(value, alpha)

    @given(
        st.floats(min_value=1e-6, max_value=0.99),
        st.floats(min_value=1e-6, max_value=0.99),
        st.floats(min_value=0.1, max_value=5.0),
    )
    @settings(max_examples=200, deadline=None)
    def test_monotone(self, c1, c2, alpha):
        small, large = sorted((c1, c2))
        assert select_h_known_alpha(small, alpha) <= select_h_known_alpha(large, alpha)
        assert select_h_known_alpha(small, alpha) <= select_h_known_alpha(small, alpha + 1.0)

    def test_bandwidth_squared_dominates_threshold(self, make_sample):
        gen = np.random.default_rng(3)
        for _ in range(30):
            data = to_polar(make_sample(gen, int(gen.integers(5, 400))))
            sel = select_delta(data)
            h = select_h_known_alpha(sel.criterion_value, 2.0)
            assert h**2 >= sel.delta_hat * (1.0 - 1e-12)


class TestLepskiIndex:
    def test_all_equal_selects_last(self):
        k_hat, accepted = lepski_index([0.3] * 6, [1e-3] * 6, 1.0)
        assert k_hat == 5
        assert accepted == frozenset(range(6))

    def test_single_candidate(self):
        assert lepski_index([2.0], [1.0], 400.0) == (0, frozenset({0}))

    def test_persistent_violation(self):
        f = [0.0, 0.01, 0.02, 1.0, 1.0, 1.0]
        sigma = [1e-3] * 6
        k_hat, accepted = lepski_index(f, sigma, 1.0)
        assert k_hat == 2
        assert 3 not in accepted

    @given(
        st.lists(st.floats(min_value=-1.0, max_value=1.0), min_size=1, max_size=12),
        st.floats(min_value=1e-4, max_value=1.0),
    )
    @settings(max_examples=200, deadline=None)
    def test_matches_pairwise_scan(self, f, kappa):
        sigma = [0.05 / (k + 1) for k in range(len(f))]
        k_hat, accepted = lepski_index(f, sigma, kappa)
        brute = {
            k
            for k in range(len(f))
            if all((f[k] - f[l]) ** 2 <= kappa * sigma[l] for l in range(k + 1))
        }
        assert accepted == brute
        assert k_hat == max(brute)
        assert 0 in accepted

    def test_shape_mismatch(self):
        with pytest.raises(ParameterError):
            lepski_index([0.0, 1.0], [1.0], 1.0)


class TestLepskiSelect:
    def test_ladder_properties(self, small_data, kernel4):
        cfg = LepskiConfig()
        result = lepski_select(small_data, EvalPoint(0.0, 0.0), kernel4, cfg)
        steps = result.estimates
        assert len(steps) == cfg.grid_size(small_data.n) + 1
        assert steps[0].h ** 2 == pytest.approx(result.delta.delta_hat, rel=1e-12)
        sigmas = [s.sigma for s in steps]
        assert all(a > b for a, b in zip(sigmas, sigmas[1:]))
        assert 0 in result.accepted_set
        assert result.k_hat == max(result.accepted_set)
        assert result.h_selected == steps[result.k_hat].h
        direct = estimate_point(
            small_data,
            EstimatorConfig(result.h_selected, result.delta.delta_hat, kernel4),
            EvalPoint(0.0, 0.0),
        )
        assert result.estimate == pytest.approx(direct, rel=1e-13, abs=1e-15)

    def test_tiny_grid(self, kernel4):
        data = angles([-0.7, -0.2, 0.0, 0.2, 0.7])
        result = lepski_select(data, EvalPoint(0.0, 0.0), kernel4, LepskiConfig(q=10.0))
        assert len(result.estimates) == 1
        assert result.k_hat == 0

    def test_threads_match_serial(self, small_data, kernel4):
        a = EvalPoint(0.2, -0.1)
        serial = lepski_select(small_data, a, kernel4)
        threaded = lepski_select(small_data, a, kernel4, max_workers=4)
        assert serial.k_hat == threaded.k_hat
        assert [s.estimate for s in serial.estimates] == [s.estimate for s in threaded.estimates]


class TestConfigs:
    def test_lepski_defaults(self):
        cfg = LepskiConfig()
        assert (cfg.q, cfg.kappa_le) == (1.25, 400.0)
        assert LepskiConfig.practical().kappa_le == 4.0
        assert cfg.grid_size(1000) == 30
        assert cfg.for_sample(1000).log_n_factor == pytest.approx(math.log(1000))

    @pytest.mark.parametrize("kwargs", [{"q": 1.0}, {"kappa_le": 0.0}, {"log_n_factor": -1.0}])
    def test_lepski_validation(self, kwargs):
        with pytest.raises(ParameterError):
            LepskiConfig(**kwargs)

    @pytest.mark.parametrize("alpha, ell", [(2.0, 4), (2.5, 4), (0.5, 0), (1.0, 2)])
    def test_kernel_order(self, alpha, ell):
        spec = HolderClassSpec(alpha=alpha)
        assert spec.kernel_order == ell
        assert spec.kernel().ell == ell

    def test_holder_constants_positive(self):
        with pytest.raises(ParameterError):
            HolderClassSpec(c_M=0.0)
