import numpy as np
import pytest

from freeclt import (
    ComplexPoint,
    DomainError,
    SemicircleLaw,
    SpectralMeasure,
    empirical_stieltjes,
    eigenvalues,
    hermitize,
    ks_distance,
    normalized_trace,
    semicircle_moment,
    semicircle_stieltjes,
    stieltjes_distance,
)


class TestComplexPoint:
    def test_rejects_real_axis(self):
        with pytest.raises(DomainError):
            ComplexPoint(1.0, 0.0)
        with pytest.raises(DomainError):
            ComplexPoint(0.0, -1.0)

    def test_value(self):
        assert ComplexPoint(2.0, 0.5).value == 2.0 + 0.5j


class TestHermitize:
    def test_idempotent_on_hermitian(self):
        h = np.array([[1.0, 2.0 + 1j], [2.0 - 1j, -3.0]])
        assert np.allclose(hermitize(h).matrix, h)

    def test_symmetrizes(self):
        a = np.array([[0.0, 2.0], [0.0, 0.0]])
        assert np.allclose(hermitize(a).matrix, [[0.0, 1.0], [1.0, 0.0]])

    def test_anti_hermitian_killed(self):
        a = 1j * np.eye(3)
        assert np.allclose(hermitize(a).matrix, 0.0)

    def test_non_square_rejected(self):
        with pytest.raises(DomainError):
            hermitize(np.zeros((2, 3)))


class TestNormalizedTrace:
    def test_identity(self):
        assert normalized_trace(np.eye(7)) == pytest.approx(1.0)

    def test_centered(self):
        assert normalized_trace(np.diag([1.0, -1.0])) == pytest.approx(0.0)

    def test_arithmetic(self):
        assert normalized_trace(np.diag([3.0, 1.0]) / 2) == pytest.approx(1.0)


class TestEigenvalues:
    def test_diagonal(self):
        mu = eigenvalues(np.diag([2.0, -2.0]))
        assert np.allclose(mu.eigenvalues, [-2.0, 2.0])

    def test_two_by_two_offdiagonal(self):
        # characteristic polynomial lambda^2 - 1 = 0 by hand
        mu = eigenvalues(np.array([[0.0, 1.0], [1.0, 0.0]]))
        assert np.allclose(mu.eigenvalues, [-1.0, 1.0])

    def test_zero_matrix(self):
        mu = eigenvalues(np.zeros((5, 5)))
        assert np.allclose(mu.eigenvalues, 0.0)
        assert mu.size == 5


class TestEmpiricalStieltjes:
    def test_zero_matrix_at_i(self):
        mu = eigenvalues(np.zeros((3, 3)))
        assert empirical_stieltjes(mu, ComplexPoint(0.0, 1.0)) == pytest.approx(1j)

    def test_two_point_at_i(self):
        # direct 2x2 resolvent: (1/2)[1/(1-i) + 1/(-1-i)] = i/2
        mu = eigenvalues(np.diag([1.0, -1.0]))
        assert empirical_stieltjes(mu, ComplexPoint(0.0, 1.0)) == pytest.approx(0.5j)

    def test_large_nu_asymptote(self):
        rng = np.random.default_rng(0)
        mu = eigenvalues(hermitize(rng.standard_normal((6, 6))).matrix)
        g = ComplexPoint(0.0, 1e7)
        assert empirical_stieltjes(mu, g) * (-g.value) == pytest.approx(1.0, abs=1e-6)

    def test_herglotz_and_bound(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            mu = eigenvalues(hermitize(rng.standard_normal((8, 8))).matrix)
            nu = float(rng.uniform(0.3, 4.0))
            s = empirical_stieltjes(mu, ComplexPoint(float(rng.normal()), nu))
            assert s.imag > 0
            assert abs(s) <= 1.0 / nu + 1e-12

    def test_dilation_identity(self):
        # S_{cX}(gamma) = (1/c) S_X(gamma/c) for c = 2
        rng = np.random.default_rng(2)
        x = hermitize(rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))).matrix
        c = 2.0
        g = ComplexPoint(0.7, 1.3)
        lhs = empirical_stieltjes(eigenvalues(c * x), g)
        rhs = empirical_stieltjes(eigenvalues(x), ComplexPoint(g.x / c, g.nu / c)) / c
        assert lhs == pytest.approx(rhs)


class TestSemicircleStieltjes:
    def test_unit_at_i(self):
        # positive-imaginary root of S^2 + iS + 1 = 0
        s = semicircle_stieltjes(ComplexPoint(0.0, 1.0), 1.0)
        assert s == pytest.approx(1j * (np.sqrt(5) - 1) / 2)

    def test_unit_at_2i(self):
        s = semicircle_stieltjes(ComplexPoint(0.0, 2.0), 1.0)
        assert s == pytest.approx(1j * (np.sqrt(2) - 1))

    def test_degenerate_limit(self):
        assert semicircle_stieltjes(ComplexPoint(0.0, 1.0), 0.0) == pytest.approx(1j)

    def test_residual_on_grid(self):
        for x in np.linspace(-3, 3, 21):
            for nu in np.linspace(0.25, 4.0, 21):
                g = ComplexPoint(float(x), float(nu))
                s = semicircle_stieltjes(g, 1.0)
                assert abs(s * s + g.value * s + 1.0) <= 1e-12
                assert s.imag > 0


class TestSemicircleMoment:
    def test_second(self):
        assert semicircle_moment(2, 1.0) == pytest.approx(1.0)

    def test_fourth(self):
        assert semicircle_moment(4, 1.0) == pytest.approx(2.0)

    def test_sixth_scaled(self):
        assert semicircle_moment(6, 2.0) == pytest.approx(40.0)

    def test_odd_vanishes(self):
        assert semicircle_moment(3, 1.0) == 0.0

    def test_negative_rejected(self):
        with pytest.raises(DomainError):
            semicircle_moment(-2, 1.0)

    def test_quantile_moments_match(self):
        # independent quantile-discretization oracle
        law = SemicircleLaw(1.0)
        mu = law.quantiles(10_000)
        for order in (2, 4, 6):
            emp = float(np.mean(mu.eigenvalues**order))
            assert emp == pytest.approx(semicircle_moment(order, 1.0), rel=0.01)


class TestSemicircleLaw:
    def test_mass_by_quadrature(self):
        assert SemicircleLaw(1.7).trapezoid_mass(10_000) == pytest.approx(1.0, abs=1e-9)

    def test_density_supported_on_radius(self):
        law = SemicircleLaw(1.7)
        assert law.density(law.radius + 1e-9) == 0.0
        assert law.density(-law.radius - 5.0) == 0.0
        assert law.density(0.0) > 0.0

    def test_cdf_endpoints(self):
        law = SemicircleLaw(0.5)
        assert law.cdf(-law.radius) == pytest.approx(0.0)
        assert law.cdf(0.0) == pytest.approx(0.5)
        assert law.cdf(law.radius) == pytest.approx(1.0)


class TestKsDistance:
    def test_quantile_construction(self):
        law = SemicircleLaw(1.0)
        mu = law.quantiles(1000)
        assert ks_distance(mu, law) <= 1.0 / 1000 + 1e-6

    def test_point_mass(self):
        mu = SpectralMeasure(np.zeros(64))
        assert ks_distance(mu, SemicircleLaw(1.0)) == pytest.approx(0.5)

    def test_deterministic(self):
        rng = np.random.default_rng(5)
        ev = rng.uniform(-2, 2, size=50)
        law = SemicircleLaw(1.0)
        assert ks_distance(SpectralMeasure(ev), law) == ks_distance(SpectralMeasure(ev), law)

    def test_permutation_invariant(self):
        rng = np.random.default_rng(6)
        ev = rng.uniform(-2, 2, size=50)
        law = SemicircleLaw(1.0)
        assert ks_distance(SpectralMeasure(ev), law) == ks_distance(
            SpectralMeasure(ev[::-1].copy()), law
        )


class TestStieltjesDistance:
    def test_quantile_measure_close(self):
        law = SemicircleLaw(1.0)
        mu = law.quantiles(2000)
        grid = [ComplexPoint(float(x), 1.0) for x in np.linspace(-2, 2, 9)]
        assert stieltjes_distance(mu, law, grid) <= 5e-3

    def test_law_against_itself(self):
        g = ComplexPoint(0.3, 1.0)
        assert abs(semicircle_stieltjes(g, 1.0) - semicircle_stieltjes(g, 1.0)) == 0.0

    def test_point_mass_vs_unit(self):
        mu = SpectralMeasure(np.zeros(10))
        d = stieltjes_distance(mu, SemicircleLaw(1.0), [ComplexPoint(0.0, 1.0)])
        assert d == pytest.approx((3 - np.sqrt(5)) / 2)  # |i - 0.61803i|

    def test_empty_grid_rejected(self):
        mu = SpectralMeasure(np.zeros(4))
        with pytest.raises(DomainError):
            stieltjes_distance(mu, SemicircleLaw(1.0), [])
