import numpy as np
import pytest

from freeclt import (
    ComplexPoint,
    ConvergenceReport,
    DomainError,
    EnsembleSpec,
    IndexedSample,
    NoiseFloorError,
    ReportRow,
    berry_esseen_sweep,
    estimate_marginal_average,
    estimate_radius_stationary,
    estimate_radius_ustat,
    kargin_condition_check,
    normalized_sum,
    normalized_trace,
    nu_sweep,
    rate_fit,
    sample,
    semicircle_stieltjes,
    single_coordinate_radius,
    ustat_sum,
)
from freeclt.mixing import TestDictionary


def _pair_sample(mats, n):
    idx = [(i, j) for i in range(1, n + 1) for j in range(1, n + 1)]
    return IndexedSample(idx, mats)


class TestNormalizedSum:
    def test_single_index(self):
        x = np.diag([1.0, -1.0])
        s = IndexedSample([(1,)], x[None])
        assert np.array_equal(normalized_sum(s), x)

    def test_zeros(self):
        s = IndexedSample([(1,), (2,)], np.zeros((2, 3, 3)))
        assert np.allclose(normalized_sum(s), 0.0)

    def test_two_equal_summands_scale(self):
        x = np.diag([2.0, -1.0])
        s = IndexedSample([(1,), (2,)], np.stack([x, x]))
        assert np.allclose(np.linalg.eigvalsh(normalized_sum(s)), np.sqrt(2) * np.array([-1.0, 2.0]))

    def test_linearity(self):
        rng = np.random.default_rng(0)
        a = rng.standard_normal((3, 4, 4))
        b = rng.standard_normal((3, 4, 4))
        idx = [(1,), (2,), (3,)]
        lhs = normalized_sum(IndexedSample(idx, a + b))
        rhs = normalized_sum(IndexedSample(idx, a)) + normalized_sum(IndexedSample(idx, b))
        assert np.array_equal(lhs, rhs)

    def test_signs_second_moment(self):
        # exact at n=1; statistical for n>1 (cross terms are O(1/m) per replica)
        spec1 = EnsembleSpec(kind="FreeSumSigns", dim=24, extent=1, seed=1)
        w = normalized_sum(sample(spec1, 0))
        assert normalized_trace(w @ w) == pytest.approx(1.0, abs=1e-9)
        spec = EnsembleSpec(kind="FreeSumSigns", dim=24, extent=6, seed=1)
        vals = [normalized_trace(normalized_sum(sample(spec, r)) @ normalized_sum(sample(spec, r))) for r in range(80)]
        se = np.std(vals) / np.sqrt(len(vals))
        assert np.mean(vals) == pytest.approx(1.0, abs=3 * se)


class TestUstatSum:
    def test_single_pair(self):
        x = np.diag([1.0, 2.0])
        s = _pair_sample(x[None], 1)
        assert np.array_equal(ustat_sum(s), x)

    def test_zeros(self):
        s = _pair_sample(np.zeros((4, 2, 2)), 2)
        assert np.allclose(ustat_sum(s), 0.0)

    def test_constant_scaling(self):
        n, c = 3, 0.7
        mats = np.stack([c * np.eye(2)] * (n * n))
        s = _pair_sample(mats, n)
        assert np.allclose(ustat_sum(s), c * np.sqrt(n) * np.eye(2))

    def test_incomplete_grid_rejected(self):
        idx = [(1, 1), (1, 2), (2, 1)]
        s = IndexedSample(idx, np.zeros((3, 2, 2)))
        with pytest.raises(DomainError):
            ustat_sum(s)

    def test_diagonal_exclusion_flag(self):
        n = 2
        mats = np.stack([np.eye(2)] * 4)
        s = _pair_sample(mats, n)
        full = ustat_sum(s)
        off = ustat_sum(s, include_diagonal=False)
        assert np.allclose(full - off, 2 * np.eye(2) / n**1.5)


class TestRadiusStationary:
    def test_zero_process(self):
        s = IndexedSample([(1,), (2,), (3,)], np.zeros((3, 4, 4)))
        est = estimate_radius_stationary([s], 1)
        assert est.sigma2_hat == 0.0

    def test_lag_zero_bookkeeping(self):
        spec = EnsembleSpec(kind="GUE", dim=20, extent=4, seed=2)
        samples = [sample(spec, r) for r in range(30)]
        est = estimate_radius_stationary(samples, 0)
        pooled = np.mean(
            [normalized_trace(s.matrices[z] @ s.matrices[z]) for s in samples for z in range(4)]
        )
        assert est.sigma2_hat == pytest.approx(pooled, abs=1e-12)
        assert est.sigma2_hat == sum(est.contributions.values())

    def test_iid_radius_is_unit(self):
        spec = EnsembleSpec(kind="FreeSumSigns", dim=30, extent=6, seed=3)
        est = estimate_radius_stationary([sample(spec, r) for r in range(50)], 2)
        assert est.sigma2_hat == pytest.approx(1.0, abs=3 * est.stderr + 1e-9)

    def test_ar1_geometric_lags(self):
        spec = EnsembleSpec(kind="StationaryWishartField", dim=50, extent=10, seed=4, rho=0.5)
        est = estimate_radius_stationary([sample(spec, r) for r in range(200)], 3)
        assert est.contributions[2] / est.contributions[1] == pytest.approx(0.25, abs=0.1)

    def test_lag_cutoff_validation(self):
        spec = EnsembleSpec(kind="GUE", dim=8, extent=3, seed=5)
        with pytest.raises(DomainError):
            estimate_radius_stationary([sample(spec, 0)], 3)


class TestMarginalAverage:
    def test_constant_in_free_coordinate(self):
        n, m = 3, 4
        base = np.diag([1.0, 2.0, 3.0, 4.0])
        mats = np.stack([(i) * base for i in range(1, n + 1) for j in range(1, n + 1)])
        s = _pair_sample(mats, n)
        avg = estimate_marginal_average([s], 1, 2, n)
        assert np.allclose(avg, 2 * base)

    def test_zero_process(self):
        s = _pair_sample(np.zeros((9, 2, 2)), 3)
        assert np.allclose(estimate_marginal_average([s], 2, 1, 3), 0.0)

    def test_window_validation(self):
        s = _pair_sample(np.zeros((4, 2, 2)), 2)
        with pytest.raises(DomainError):
            estimate_marginal_average([s], 1, 1, 5)

    def test_fluctuation_scales_with_window(self):
        # variance of the window average halves (within tolerance) as p doubles
        spec = EnsembleSpec(kind="UStatOuter", dim=12, extent=32, seed=6, rho=0.0)
        var_p, var_2p = [], []
        for r in range(60):
            s = sample(spec, r)
            a1 = estimate_marginal_average([s], 1, 1, 8)
            a2 = estimate_marginal_average([s], 1, 1, 16)
            var_p.append(float(np.mean(a1 * a1)))
            var_2p.append(float(np.mean(a2 * a2)))
        ratio = np.mean(var_p) / np.mean(var_2p)
        assert ratio == pytest.approx(2.0, abs=0.6)


class TestRadiusUstat:
    def test_zero_process(self):
        s = _pair_sample(np.zeros((16, 3, 3)), 4)
        est = estimate_radius_ustat([s], 1, 2)
        assert est.sigma2_hat == 0.0

    def test_symmetric_kernel_factor_four(self):
        spec = EnsembleSpec(kind="UStatOuter", dim=20, extent=16, seed=7, rho=0.0)
        samples = [sample(spec, r) for r in range(40)]
        est = estimate_radius_ustat(samples, 2, 8)
        single = single_coordinate_radius(samples, 2, 8)
        assert est.sigma2_hat == pytest.approx(4 * single, rel=1e-9)

    def test_first_coordinate_only_process(self):
        # X_(i,j) = f(Y_i): the radius reduces to the one-coordinate sum up
        # to O(1/window) cross terms
        rng = np.random.default_rng(8)
        n, m, p = 24, 6, 12
        per_rep_eta, per_rep_t1 = [], []
        for _ in range(40):
            f_vals = rng.standard_normal((n, m))
            mats = np.stack(
                [np.diag(f_vals[i - 1]) for i in range(1, n + 1) for j in range(1, n + 1)]
            )
            s = _pair_sample(mats, n)
            est = estimate_radius_ustat([s], 1, p)
            per_rep_eta.append(est.sigma2_hat)
            per_rep_t1.append(single_coordinate_radius([s], 1, p))
        eta, t1 = np.mean(per_rep_eta), np.mean(per_rep_t1)
        assert eta == pytest.approx(t1, rel=6.0 / p)


class TestBerrySweep:
    def test_single_summand_two_point_distance(self):
        # |S_{+-1}(i) - S_sc(i)| = |i/2 - 0.61803i| with O(1/sqrt(m)) noise
        spec = EnsembleSpec(kind="FreeSumSigns", dim=100, extent=1, seed=9)
        rep = berry_esseen_sweep(spec, [1], [ComplexPoint(0.0, 1.0)], 10)
        assert rep.rows[0].delta == pytest.approx(0.118034, abs=0.02)

    def test_degenerate_point_mass_distance(self):
        # zero-matrix input: delta = |-1/gamma - S_sc(gamma)| at every n
        from freeclt.cltlab import _delta_and_stderr

        eig_rows = np.zeros((5, 8))
        lag_rows = np.ones((5, 1))
        g = ComplexPoint(0.0, 1.0)
        delta, stderr = _delta_and_stderr(eig_rows, lag_rows, g, np.random.default_rng(0))
        assert delta == pytest.approx(abs(1j - semicircle_stieltjes(g, 1.0)))
        assert stderr == 0.0

    def test_grid_validation(self):
        spec = EnsembleSpec(kind="FreeSumSigns", dim=8, extent=2, seed=10)
        with pytest.raises(DomainError):
            berry_esseen_sweep(spec, [2], [], 2)
        with pytest.raises(DomainError):
            berry_esseen_sweep(spec, [2], [ComplexPoint(0.0, 0.1)], 2)

    def test_reproducible(self):
        spec = EnsembleSpec(kind="FreeSumSigns", dim=16, extent=4, seed=11)
        g = [ComplexPoint(0.0, 1.0)]
        r1 = berry_esseen_sweep(spec, [2, 4], g, 5)
        r2 = berry_esseen_sweep(spec, [2, 4], g, 5)
        assert [(a.delta, a.stderr) for a in r1.rows] == [(b.delta, b.stderr) for b in r2.rows]


class TestNuSweep:
    def test_monotone_smoothing(self):
        spec = EnsembleSpec(kind="FreeSumSigns", dim=48, extent=16, seed=12)
        rep = nu_sweep(spec, 16, [2.0, 1.0, 0.5], 10)
        rows = {r.gamma.nu: r for r in rep.rows}
        assert rows[0.5].delta >= rows[1.0].delta - 3 * (rows[0.5].stderr + rows[1.0].stderr)
        assert rows[1.0].delta >= rows[2.0].delta - 3 * (rows[1.0].stderr + rows[2.0].stderr)

    def test_requires_descending(self):
        spec = EnsembleSpec(kind="FreeSumSigns", dim=8, extent=2, seed=13)
        with pytest.raises(DomainError):
            nu_sweep(spec, 2, [1.0, 2.0], 2)

    def test_single_nu(self):
        spec = EnsembleSpec(kind="FreeSumSigns", dim=8, extent=2, seed=14)
        rep = nu_sweep(spec, 2, [1.0], 3)
        assert len(rep.rows) == 1


def _synthetic_report(deltas, ns, stderr=0.0):
    rep = ConvergenceReport()
    g = ComplexPoint(0.0, 1.0)
    for n, d in zip(ns, deltas):
        rep.append(
            ReportRow(
                ensemble="synthetic", m=1, n=n, gamma=g, delta=d, stderr=stderr, replicas=1, seed=0
            )
        )
    return rep, g


class TestRateFit:
    def test_exact_half_power(self):
        ns = [4, 8, 16, 32, 64]
        rep, g = _synthetic_report([n**-0.5 for n in ns], ns)
        fit = rate_fit(rep, g)
        assert fit.slope == pytest.approx(-0.5, abs=1e-12)

    def test_exact_inverse(self):
        ns = [4, 8, 16, 32]
        rep, g = _synthetic_report([3.0 / n for n in ns], ns)
        fit = rate_fit(rep, g)
        assert fit.slope == pytest.approx(-1.0, abs=1e-12)
        assert fit.intercept == pytest.approx(np.log(3.0), abs=1e-12)

    def test_noise_floor_refusal(self):
        ns = [4, 8, 16, 32]
        rep, g = _synthetic_report([1e-6] * 4, ns, stderr=1.0)
        with pytest.raises(NoiseFloorError):
            rate_fit(rep, g)

    def test_duplicate_rows_rejected(self):
        rep, g = _synthetic_report([0.5], [4])
        with pytest.raises(DomainError):
            rep.append(rep.rows[0])


class TestKarginCheck:
    def test_identity_test_operators_cancel_exactly(self):
        def identity_builder(far_stack):
            return np.eye(far_stack.shape[1])

        spec = EnsembleSpec(kind="FreeSumSigns", dim=16, extent=5, seed=15)
        d = TestDictionary(builders=(identity_builder,))
        r1, r2 = kargin_condition_check([sample(spec, r) for r in range(20)], d)
        assert r2 == pytest.approx(0.0, abs=1e-12)

    def test_zero_process(self):
        s = IndexedSample([(1,), (2,), (3,)], np.zeros((3, 4, 4)))
        r1, r2 = kargin_condition_check([s])
        assert r1 == 0.0 and r2 == 0.0

    def test_haar_signs_nearly_free(self):
        spec = EnsembleSpec(kind="FreeSumSigns", dim=100, extent=5, seed=16)
        r1, r2 = kargin_condition_check([sample(spec, r) for r in range(100)])
        assert r1 <= 5.0 / 100
        assert r2 <= 5.0 / 100
