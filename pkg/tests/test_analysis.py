import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from anderson_entropy import (
    InsufficientDataError,
    convolution_check,
    fit_scaling,
    histogram,
    ks_critical_value,
    ks_statistic,
    overlap_test,
    preferred_model,
    saturation_test,
    shared_histograms,
    thermal_volume_check,
)
from anderson_entropy.analysis import MODELS

from oracles import ks_brute_force

SIZES = np.array([5.0, 9.0, 17.0, 33.0, 65.0])


def exact_points(f, sizes=SIZES, err=None):
    return [(l, f(l), err) for l in sizes]


class TestFitScaling:
    @pytest.mark.parametrize("d", [1, 2])
    @pytest.mark.parametrize("model,params", [
        ("area", {"c": 3.0}),
        ("area_log", {"c": 0.7}),
        ("log", {"a": 2.0, "b": 0.405}),
        ("volume", {"a": -1.0, "b": 0.25}),
        ("bulk", {"c": 0.1}),
    ])
    def test_recovers_generator(self, model, params, d):
        names, design = MODELS[model]
        y = sum(params[n] * c for n, c in zip(names, design(SIZES, d)))
        fit = fit_scaling(list(zip(SIZES, y)), d, model)
        for n in names:
            assert fit.params[n] == pytest.approx(params[n], rel=1e-8, abs=1e-10)
        assert fit.relative_residual < 1e-10
        assert not fit.weighted

    def test_area_2d_preferred(self):
        pts = exact_points(lambda l: 3.0 * l)
        fits = [fit_scaling(pts, 2, m) for m in ("area", "area_log", "bulk")]
        assert fits[0].params["c"] == pytest.approx(3.0, rel=1e-12)
        assert preferred_model(fits) == "area"

    def test_log_growth_preferred(self):
        pts = exact_points(lambda l: 2.0 + 0.405 * math.log(l))
        fits = [fit_scaling(pts, 1, m) for m in ("log", "volume", "area")]
        assert fits[0].params["b"] == pytest.approx(0.405, rel=1e-10)
        assert preferred_model(fits) == "log"

    def test_weighted_stderr(self):
        rng = np.random.default_rng(0)
        err = 0.01
        pts = [(l, 1.5 + rng.normal(0, err), err) for l in SIZES]
        fit = fit_scaling(pts, 1, "area")
        assert fit.weighted
        # a constant fitted with equal weights: stderr = err / sqrt(n)
        assert fit.stderr["c"] == pytest.approx(err / math.sqrt(len(SIZES)), rel=1e-10)
        lo, hi = fit.ci95("c")
        assert lo < fit.params["c"] < hi

    def test_predict(self):
        fit = fit_scaling(exact_points(lambda l: 1.0 + 0.5 * l), 1, "volume")
        np.testing.assert_allclose(fit.predict([10, 100], 1), [6.0, 51.0], rtol=1e-10)

    @pytest.mark.parametrize("sizes", [[5, 9, 17], [10, 12, 14, 16, 18]])
    def test_needs_range(self, sizes):
        with pytest.raises(InsufficientDataError):
            fit_scaling(exact_points(lambda l: l, sizes=sizes), 1, "bulk")

    def test_unknown_model(self):
        with pytest.raises(ValueError):
            fit_scaling(exact_points(lambda l: l), 1, "power")

    @settings(max_examples=40, deadline=None)
    @given(a=st.floats(-5, 5), b=st.floats(-2, 2))
    def test_log_fit_exact_property(self, a, b):
        fit = fit_scaling(exact_points(lambda l: a + b * math.log(l)), 1, "log")
        assert fit.params["a"] == pytest.approx(a, abs=1e-9)
        assert fit.params["b"] == pytest.approx(b, abs=1e-9)


class TestPreferredModel:
    def test_tie_is_inconclusive(self):
        pts = exact_points(lambda l: 1.0 + 0.1 * l)
        a, b = fit_scaling(pts, 1, "volume"), fit_scaling(pts, 1, "volume")
        assert preferred_model([a, b]) is None

    def test_close_residuals_inconclusive(self):
        rng = np.random.default_rng(1)
        pts = [(l, 1.0 + rng.normal(0, 0.05), 0.05) for l in SIZES]
        fits = [fit_scaling(pts, 1, "area"), fit_scaling(pts, 1, "area_log")]
        # the ratio decides, not the raw ordering
        best = min(fits, key=lambda f: f.residual_norm)
        other = max(fits, key=lambda f: f.residual_norm)
        expected = best.model if best.residual_norm < 0.8 * other.residual_norm else None
        assert preferred_model(fits) == expected


class TestOverlap:
    def test_identical_densities(self):
        x = np.random.default_rng(2).normal(size=2000)
        pL, pU = shared_histograms(x, x)
        rep = overlap_test(pL, pU)
        assert rep.coefficient == pytest.approx(1.0, abs=1e-12)
        assert rep.non_selfaveraging

    def test_disjoint_densities(self):
        rng = np.random.default_rng(3)
        pL, pU = shared_histograms(rng.uniform(0, 1, 1000), rng.uniform(2, 3, 1000))
        rep = overlap_test(pL, pU)
        assert rep.coefficient == 0.0
        assert rep.verdict == "selfaveraging-consistent"

    def test_overlap_without_median_containment(self):
        rng = np.random.default_rng(4)
        # heavy overlap in the tails but medians far apart
        x = np.concatenate([rng.uniform(0, 1, 900), rng.uniform(1, 2, 100)])
        y = np.concatenate([rng.uniform(5, 6, 900), rng.uniform(1, 2, 100)])
        rep = overlap_test(*shared_histograms(x, y))
        assert rep.coefficient > 0.05
        assert not rep.non_selfaveraging

    def test_invariant_under_rescaling(self):
        rng = np.random.default_rng(5)
        x, y = rng.normal(0, 1, 1500), rng.normal(0.5, 1, 1500)
        c1 = overlap_test(*shared_histograms(x, y)).coefficient
        c2 = overlap_test(*shared_histograms(7.0 * x, 7.0 * y)).coefficient
        assert c2 == pytest.approx(c1, abs=1e-12)

    def test_gaussian_overlap(self):
        rng = np.random.default_rng(6)
        n = 200_000
        x, y = rng.normal(0, 1, n), rng.normal(1, 1, n)
        # overlap of N(0,1) and N(1,1) is 2 Phi(-1/2)
        exact = 0.61707507745441
        assert overlap_test(*shared_histograms(x, y)).coefficient == pytest.approx(exact, abs=0.01)

    def test_mismatched_edges(self):
        pL = histogram([0.0, 1.0, 2.0], edges=[0, 1, 2, 3])
        pU = histogram([0.0, 1.0, 2.0], edges=[0, 1.5, 2, 3])
        with pytest.raises(ValueError):
            overlap_test(pL, pU)


class TestKolmogorovSmirnov:
    @pytest.mark.parametrize("seed", range(5))
    def test_matches_brute_force(self, seed):
        rng = np.random.default_rng(seed)
        x = rng.normal(size=rng.integers(5, 200))
        y = rng.normal(0.3, 1.2, size=rng.integers(5, 200))
        assert ks_statistic(x, y) == pytest.approx(ks_brute_force(x, y), abs=1e-12)

    def test_with_ties(self):
        x = [0, 0, 1, 1, 2]
        y = [0, 1, 1, 1, 3, 3]
        assert ks_statistic(x, y) == pytest.approx(ks_brute_force(x, y), abs=1e-12)

    def test_critical_values(self):
        assert ks_critical_value(2000, 2000) == pytest.approx(0.04294694083467376, rel=1e-12)
        assert ks_critical_value(100, 300) == pytest.approx(0.1568200551399371, rel=1e-12)


class TestSaturation:
    def test_same_distribution(self):
        rng = np.random.default_rng(7)
        rep = saturation_test({l: rng.normal(size=1000) for l in (11, 21, 41)})
        assert rep.saturated
        assert len(rep.distances) == 2

    def test_shifted_distribution(self):
        rng = np.random.default_rng(8)
        rep = saturation_test({11: rng.normal(0, 1, 1000), 21: rng.normal(5, 1, 1000)})
        assert not rep.saturated
        assert rep.max_distance > 0.9

    def test_needs_samples(self):
        with pytest.raises(InsufficientDataError):
            saturation_test({11: np.zeros(100), 21: np.zeros(100)})
        with pytest.raises(InsufficientDataError):
            saturation_test({11: np.zeros(1000)})


class TestConvolution:
    def test_independent_sum(self):
        rng = np.random.default_rng(9)
        n = 2000
        plus, minus = rng.exponential(1.0, n), rng.exponential(2.0, n)
        full = rng.exponential(1.0, n) + rng.exponential(2.0, n)
        assert convolution_check(plus, minus, full).consistent

    def test_perfectly_correlated_halves(self):
        rng = np.random.default_rng(10)
        n = 2000
        plus = rng.exponential(1.0, n)
        # full = 2 * plus is the law of plus + minus only when the halves are identical
        rep = convolution_check(plus, plus.copy(), 2 * plus)
        assert not rep.consistent

    def test_input_checks(self):
        with pytest.raises(InsufficientDataError):
            convolution_check(np.zeros(10), np.zeros(10), np.zeros(10))
        with pytest.raises(ValueError):
            convolution_check(np.zeros(200), np.zeros(150), np.zeros(200))


class TestThermalVolume:
    def test_linear_growth(self):
        pts = [(l, 0.3 + 0.7 * l, 0.01) for l in SIZES]
        rep = thermal_volume_check(pts, 1)
        assert rep.b == pytest.approx(0.7, rel=1e-10)
        assert rep.volume_law

    def test_saturating_entropy(self):
        rng = np.random.default_rng(11)
        pts = [(l, 1.2 + rng.normal(0, 0.01), 0.01) for l in SIZES]
        rep = thermal_volume_check(pts, 1)
        assert rep.b_ci95[0] <= 0.0 <= rep.b_ci95[1] or abs(rep.b) < 1e-3
        assert not rep.volume_law

    def test_two_dimensional_volume(self):
        pts = [(l, 0.05 * l**2 + 0.2 * l, 0.01) for l in SIZES]
        rep = thermal_volume_check(pts, 2)
        assert rep.b > 0
        assert rep.volume_law
