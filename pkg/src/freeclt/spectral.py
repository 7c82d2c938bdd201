"""Hermitian matrix primitives, spectral measures and Stieltjes transforms.

Conventions: the normalized trace of an m x m matrix is (1/m) Tr; the
Stieltjes transform of a spectral measure is S(gamma) = (1/m) sum 1/(lambda_i
- gamma), evaluated strictly in the upper half-plane (nu > 0), so Im S > 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

from .errors import DomainError, NumericError

HERMITIAN_DEFECT_TOL = 1e-10


@dataclass(frozen=True)
class ComplexPoint:
    """Spectral evaluation point x + i*nu with nu > 0."""

    x: float
    nu: float

    def __post_init__(self):
        if not self.nu > 0:
            raise DomainError(f"nu must be > 0, got {self.nu}")

    @property
    def value(self) -> complex:
        return complex(self.x, self.nu)


class HermitianSample:
    """A validated self-adjoint m x m matrix.

    Construction symmetrizes the input, so the stored matrix equals its
    conjugate transpose exactly; inputs with Hermitian defect above
    ``HERMITIAN_DEFECT_TOL`` (relative to the largest entry) are rejected.
    """

    __slots__ = ("matrix", "dim")

    def __init__(self, matrix):
        a = np.asarray(matrix)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DomainError(f"expected a square matrix, got shape {a.shape}")
        scale = max(float(np.max(np.abs(a))), 1.0)
        defect = float(np.max(np.abs(a - a.conj().T)))
        if defect > HERMITIAN_DEFECT_TOL * scale:
            raise DomainError(
                f"matrix is not Hermitian: defect {defect:.3e} exceeds "
                f"{HERMITIAN_DEFECT_TOL:.0e} * {scale:.3e}"
            )
        self.matrix = 0.5 * (a + a.conj().T)
        self.dim = a.shape[0]

    def __array__(self, dtype=None):
        return np.asarray(self.matrix, dtype=dtype)


def _as_matrix(x) -> np.ndarray:
    if isinstance(x, HermitianSample):
        return x.matrix
    return np.asarray(x)


@dataclass(frozen=True)
class SpectralMeasure:
    """Sorted eigenvalues with uniform weight 1/m."""

    eigenvalues: np.ndarray

    def __post_init__(self):
        ev = np.sort(np.asarray(self.eigenvalues, dtype=float))
        if ev.size < 1:
            raise DomainError("a spectral measure needs at least one eigenvalue")
        object.__setattr__(self, "eigenvalues", ev)

    @property
    def size(self) -> int:
        return self.eigenvalues.size

    @property
    def weight(self) -> float:
        return 1.0 / self.eigenvalues.size


@dataclass(frozen=True)
class SemicircleLaw:
    """Semicircular law with variance sigma2, supported on [-2*sigma, 2*sigma]."""

    sigma2: float

    def __post_init__(self):
        if not self.sigma2 > 0:
            raise DomainError(f"sigma2 must be > 0, got {self.sigma2}")

    @property
    def radius(self) -> float:
        return 2.0 * np.sqrt(self.sigma2)

    def density(self, t):
        t = np.asarray(t, dtype=float)
        r2 = 4.0 * self.sigma2
        inside = np.clip(r2 - t * t, 0.0, None)
        return np.sqrt(inside) / (2.0 * np.pi * self.sigma2)

    def cdf(self, t):
        """Closed-form distribution function (algebraic + arcsine term)."""
        r = self.radius
        t = np.clip(np.asarray(t, dtype=float), -r, r)
        return (
            0.5
            + t * np.sqrt(r * r - t * t) / (4.0 * np.pi * self.sigma2)
            + np.arcsin(t / r) / np.pi
        )

    def quantiles(self, m: int) -> SpectralMeasure:
        """m-point quantile discretization at levels (i - 1/2)/m."""
        levels = (np.arange(m) + 0.5) / m
        grid = np.linspace(-self.radius, self.radius, 20001)
        return SpectralMeasure(np.interp(levels, self.cdf(grid), grid))

    def trapezoid_mass(self, points: int = 10_000) -> float:
        """Total mass by trapezoid quadrature in the arcsine variable.

        The substitution t = 2*sigma*sin(theta) removes the square-root edge
        singularity, so the rule is exact up to rounding.
        """
        theta = np.linspace(-np.pi / 2, np.pi / 2, points)
        integrand = (self.radius * np.cos(theta)) ** 2 / (2.0 * np.pi * self.sigma2)
        return float(np.trapezoid(integrand, theta))


def hermitize(a) -> HermitianSample:
    """Return the self-adjoint part (A + A*)/2; idempotent on Hermitian input."""
    a = np.asarray(_as_matrix(a))
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DomainError(f"expected a square matrix, got shape {a.shape}")
    return HermitianSample(0.5 * (a + a.conj().T))


def normalized_trace(x) -> float:
    """(1/m) sum of diagonal entries, as a real number."""
    a = _as_matrix(x)
    t = np.trace(a) / a.shape[0]
    return float(np.real(t))


def eigenvalues(x) -> SpectralMeasure:
    """Eigenvalues of a Hermitian sample as a spectral measure.

    The input is symmetrized before decomposition; the eigenvalue sum is
    checked against the trace.
    """
    a = hermitize(x).matrix
    try:
        ev = np.linalg.eigvalsh(a)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise NumericError(f"eigensolver failed on a {a.shape[0]}x{a.shape[0]} matrix: {exc}")
    m = a.shape[0]
    scale = max(float(np.max(np.abs(a))), 1.0)
    if abs(ev.sum() - np.real(np.trace(a))) > 1e-8 * m * scale:
        raise NumericError("eigenvalue sum disagrees with the trace")
    return SpectralMeasure(ev)


def empirical_stieltjes(mu: SpectralMeasure, gamma: ComplexPoint) -> complex:
    """S(gamma) = (1/m) sum 1/(lambda_i - gamma) with Im S > 0 for nu > 0."""
    return complex(np.mean(1.0 / (mu.eigenvalues - gamma.value)))


def semicircle_stieltjes(gamma: ComplexPoint, sigma2: float) -> complex:
    """Stieltjes transform of the semicircular law with variance sigma2.

    Exact root of sigma2*S^2 + gamma*S + 1 = 0 with positive imaginary part
    (the Herglotz branch).  sigma2 = 0 degenerates to the point mass at 0,
    S = -1/gamma.
    """
    if sigma2 < 0:
        raise DomainError(f"sigma2 must be >= 0, got {sigma2}")
    g = gamma.value
    if sigma2 == 0.0:
        return -1.0 / g
    root = np.sqrt(g * g - 4.0 * sigma2 + 0j)
    s_plus = (-g + root) / (2.0 * sigma2)
    s_minus = (-g - root) / (2.0 * sigma2)
    return s_plus if s_plus.imag >= s_minus.imag else s_minus


def semicircle_moment(order: int, sigma2: float) -> float:
    """Moments of the semicircular law: Catalan(k) * sigma^(2k) for order 2k.

    Odd orders vanish by symmetry.
    """
    if order < 0:
        raise DomainError(f"moment order must be >= 0, got {order}")
    if order % 2 == 1:
        return 0.0
    k = order // 2
    catalan = comb(2 * k, k) // (k + 1)
    return float(catalan) * sigma2**k


def ks_distance(mu: SpectralMeasure, law: SemicircleLaw) -> float:
    """Kolmogorov distance between the empirical CDF and the semicircle CDF.

    Evaluated at the eigenvalue jump points, using both the pre- and
    post-jump value of the empirical CDF.
    """
    ev = mu.eigenvalues
    m = ev.size
    f_ref = law.cdf(ev)
    upper = np.arange(1, m + 1) / m
    lower = np.arange(0, m) / m
    return float(max(np.max(np.abs(upper - f_ref)), np.max(np.abs(lower - f_ref))))


def stieltjes_distances(mu: SpectralMeasure, ref: SemicircleLaw, grid) -> np.ndarray:
    """Per-point moduli |S_mu(gamma) - S_ref(gamma)| over a grid."""
    grid = list(grid)
    if not grid:
        raise DomainError("grid must be non-empty")
    return np.array(
        [
            abs(empirical_stieltjes(mu, g) - semicircle_stieltjes(g, ref.sigma2))
            for g in grid
        ]
    )


def stieltjes_distance(mu: SpectralMeasure, ref: SemicircleLaw, grid) -> float:
    """Max over the grid of |S_mu - S_ref|."""
    return float(np.max(stieltjes_distances(mu, ref, grid)))
