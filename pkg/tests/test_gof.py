"""Sample moments and Kolmogorov-Smirnov machinery."""
import itertools

import numpy as np
import pytest
import scipy.stats
from hypothesis import given, settings
from hypothesis import strategies as st

from efnlm import gof, get_family
from efnlm.errors import DegenerateSample


class TestSampleMoments:
    def test_two_point_symmetric(self):
        m = gof.sample_moments([-1.0, 1.0])
        assert (m.mean, m.variance, m.skewness, m.kurtosis) == (0.0, 1.0, 0.0, 1.0)

    def test_normal_kurtosis(self):
        xs = np.random.default_rng(0).standard_normal(10**6)
        assert abs(gof.sample_moments(xs).kurtosis - 3.0) < 0.05

    def test_gamma_true_residual_targets(self):
        rng = np.random.default_rng(1)
        eps = rng.gamma(4.0, 0.25, size=10**6) - 1.0
        m = gof.sample_moments(eps)
        assert abs(m.mean) < 0.005
        assert abs(m.variance - 0.25) < 0.005
        assert abs(m.skewness - 1.0) < 0.02
        assert abs(m.kurtosis - 4.5) < 0.2

    def test_degenerate(self):
        with pytest.raises(DegenerateSample):
            gof.sample_moments([2.0, 2.0, 2.0])
        with pytest.raises(DegenerateSample):
            gof.sample_moments([1.0])

    @settings(max_examples=50, deadline=None)
    @given(
        a=st.floats(-3.0, 3.0).filter(lambda v: abs(v) > 1e-3),
        b=st.floats(-5.0, 5.0),
    )
    def test_location_scale(self, a, b):
        xs = np.linspace(-1.0, 2.0, 17) ** 3
        m0 = gof.sample_moments(xs)
        m1 = gof.sample_moments(a * xs + b)
        assert abs(m1.mean - (a * m0.mean + b)) < 1e-9 * max(1, abs(a), abs(b))
        assert abs(m1.variance - a**2 * m0.variance) < 1e-8 * max(1.0, a**2)
        assert abs(m1.skewness - np.sign(a) * m0.skewness) < 1e-9
        assert abs(m1.kurtosis - m0.kurtosis) < 1e-9


class TestKolmogorovPvalue:
    def test_zero_statistic(self):
        assert gof.kolmogorov_pvalue(0.0, 100) == 1.0

    def test_certain_rejection(self):
        assert gof.kolmogorov_pvalue(1.0, 100) < 1e-12

    def test_lambda_one(self):
        # Q(1) via the alternating series; Stephens factor inverted for n
        n = 10000.0
        d = 1.0 / (np.sqrt(n) + 0.12 + 0.11 / np.sqrt(n))
        assert abs(gof.kolmogorov_pvalue(d, n) - 0.27000) < 1e-4

    def test_monotone_in_d(self):
        ps = [gof.kolmogorov_pvalue(d, 50) for d in np.linspace(0.01, 0.5, 20)]
        assert all(p1 >= p2 for p1, p2 in zip(ps, ps[1:]))


def brute_force_one_sample(xs, cdf):
    xs = np.sort(np.asarray(xs, dtype=float))
    n = len(xs)
    best = 0.0
    for i, x in enumerate(xs):
        f = cdf(np.array([x]))[0] if np.ndim(cdf(np.array([x]))) else float(cdf(x))
        best = max(best, abs((i + 1) / n - f), abs(i / n - f))
    return best


class TestKsOneSample:
    def test_single_point_at_median(self):
        res = gof.ks_one_sample([0.0], scipy.stats.norm.cdf)
        assert res.statistic == 0.5

    def test_two_point(self):
        res = gof.ks_one_sample([-1.0, 1.0], scipy.stats.norm.cdf)
        assert abs(res.statistic - abs(0.5 - scipy.stats.norm.cdf(-1.0))) < 1e-12

    def test_exhaustive_small_samples(self):
        # every sample of size <= 8 over a small grid, against brute force
        grid = [-1.5, -0.5, 0.0, 0.75, 2.0]
        rng = np.random.default_rng(3)
        for n in range(1, 9):
            for _ in range(30):
                xs = rng.choice(grid, size=n, replace=True)
                res = gof.ks_one_sample(xs, scipy.stats.norm.cdf)
                assert res.statistic == pytest.approx(
                    brute_force_one_sample(xs, scipy.stats.norm.cdf), abs=0
                )

    def test_calibration(self):
        fam = get_family("gamma")
        rng = np.random.default_rng(4)
        rejections = 0
        reps = 400
        for _ in range(reps):
            eps = rng.gamma(4.0, 0.25, size=200) - 1.0
            res = gof.ks_one_sample(eps, lambda s: fam.true_residual_cdf(s, 1.0, 4.0))
            rejections += res.p_value < 0.05
        assert 0.02 < rejections / reps < 0.09

    @settings(max_examples=30, deadline=None)
    @given(st.floats(0.1, 3.0))
    def test_probability_integral_invariance(self, scale):
        xs = np.random.default_rng(5).standard_normal(40)

        def cdf(v):
            return scipy.stats.norm.cdf(v / scale)

        d1 = gof.ks_one_sample(xs, scipy.stats.norm.cdf).statistic
        d2 = gof.ks_one_sample(xs * scale, cdf).statistic
        assert abs(d1 - d2) < 1e-12


def brute_force_two_sample(xs, ys):
    pooled = sorted(set(list(xs) + list(ys)))
    best = 0.0
    for t in pooled:
        fx = sum(1 for v in xs if v <= t) / len(xs)
        fy = sum(1 for v in ys if v <= t) / len(ys)
        best = max(best, abs(fx - fy))
    return best


class TestKsTwoSample:
    def test_identical(self):
        xs = [0.1, 0.5, 0.9]
        assert gof.ks_two_sample(xs, xs).statistic == 0.0

    def test_disjoint(self):
        assert gof.ks_two_sample([0.0, 1.0], [2.0, 3.0]).statistic == 1.0

    def test_matches_brute_force(self):
        rng = np.random.default_rng(6)
        for _ in range(20):
            xs = rng.standard_normal(50)
            ys = rng.standard_normal(50)
            res = gof.ks_two_sample(xs, ys)
            assert res.statistic == pytest.approx(brute_force_two_sample(xs, ys), abs=0)

    def test_with_ties(self):
        xs = [0.0, 0.0, 1.0]
        ys = [0.0, 1.0, 1.0, 2.0]
        res = gof.ks_two_sample(xs, ys)
        assert res.statistic == pytest.approx(brute_force_two_sample(xs, ys), abs=0)

    def test_symmetric(self):
        rng = np.random.default_rng(7)
        xs, ys = rng.standard_normal(30), rng.standard_normal(45)
        assert gof.ks_two_sample(xs, ys).statistic == gof.ks_two_sample(ys, xs).statistic


class TestKsRows:
    def test_matches_scalar_path(self):
        rng = np.random.default_rng(8)
        mat = rng.standard_normal((10, 20))
        d = gof.ks_statistics_rows(mat, scipy.stats.norm.cdf)
        for i in range(10):
            assert d[i] == pytest.approx(
                gof.ks_one_sample(mat[i], scipy.stats.norm.cdf).statistic, abs=1e-15
            )
