"""Damped fixed-point solvers for the semicircular self-consistency equation.

Scalar form: sigma2*S^2 + gamma*S + 1 = 0, iterated as
S <- (1-d)*S + d*(-1/(gamma + sigma2*S)).

Matrix form: eta(S)*S + gamma*S + I = 0 for a completely positive variance
map eta, iterated as S <- -(gamma*I + eta(S))^{-1}.  Small nu is reached by
warm-started continuation along a descending nu path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NonConvergenceError, NumericError
from .spectral import ComplexPoint

# Damping is halved at most this many times when the residual increases.
_MAX_DAMPING_CUTS = 4


@dataclass(frozen=True)
class FixedPointConfig:
    damping: float = 0.5
    tol: float = 1e-12
    max_iter: int = 10000
    continuation_steps: int = 0

    def __post_init__(self):
        if not 0.0 < self.damping <= 1.0:
            raise DomainError(f"damping must be in (0, 1], got {self.damping}")
        if not self.tol > 0:
            raise DomainError(f"tol must be > 0, got {self.tol}")
        if self.max_iter < 1:
            raise DomainError(f"max_iter must be >= 1, got {self.max_iter}")
        if self.continuation_steps < 0:
            raise DomainError("continuation_steps must be >= 0")


@dataclass(frozen=True)
class ScalarRadius:
    """Variance map eta(a) = sigma2 * a."""

    sigma2: float

    def __post_init__(self):
        if self.sigma2 < 0:
            raise DomainError(f"sigma2 must be >= 0, got {self.sigma2}")

    def apply(self, a):
        return self.sigma2 * a


class SandwichRadius:
    """Variance map eta(a) = sum_g mean_r L[g, r] @ a @ R[g, r].

    ``left`` and ``right`` are stacks of shape (terms, replicas, m, m).  The
    usual one-term case eta(a) = avg_r X_r a X_r is built with
    :meth:`from_replicas`.
    """

    def __init__(self, left, right):
        left = np.asarray(left, dtype=complex)
        right = np.asarray(right, dtype=complex)
        if left.shape != right.shape or left.ndim != 4 or left.shape[-1] != left.shape[-2]:
            raise DomainError(
                f"expected matching (terms, replicas, m, m) stacks, got {left.shape} and {right.shape}"
            )
        self.left = left
        self.right = right
        self.dim = left.shape[-1]

    @classmethod
    def from_replicas(cls, matrices) -> "SandwichRadius":
        stack = np.asarray(matrices, dtype=complex)[None, ...]
        return cls(stack, stack)

    def apply(self, a) -> np.ndarray:
        a = np.asarray(a, dtype=complex)
        out = (self.left @ a @ self.right).sum(axis=(0, 1))
        return out / self.left.shape[1]

    def positivity_witness(self, rng=None, trials: int = 20, tol: float = 1e-8) -> bool:
        """Check eta maps PSD test inputs to (numerically) PSD outputs."""
        rng = np.random.default_rng(0) if rng is None else rng
        m = self.dim
        for _ in range(trials):
            b = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
            a = b @ b.conj().T
            h = self.apply(a)
            h = 0.5 * (h + h.conj().T)
            lo = float(np.linalg.eigvalsh(h).min())
            if lo < -tol * float(np.linalg.norm(a, 2)):
                return False
        return True


def solve_semicircle_scalar(
    gamma: ComplexPoint,
    sigma2: float,
    cfg: FixedPointConfig = FixedPointConfig(),
    start: complex | None = None,
) -> complex:
    """Solve sigma2*S^2 + gamma*S + 1 = 0 by damped fixed-point iteration.

    Starts from S0 = -1/gamma (the large-gamma asymptote) unless a warm start
    is given; damping is halved on residual increase, at most four times.
    """
    if sigma2 < 0:
        raise DomainError(f"sigma2 must be >= 0, got {sigma2}")
    g = gamma.value
    s = -1.0 / g if start is None else complex(start)
    d = cfg.damping
    cuts = 0
    res = abs(sigma2 * s * s + g * s + 1.0)
    for _ in range(cfg.max_iter):
        if res <= cfg.tol:
            return s
        s_new = (1.0 - d) * s + d * (-1.0 / (g + sigma2 * s))
        res_new = abs(sigma2 * s_new * s_new + g * s_new + 1.0)
        if res_new > res and cuts < _MAX_DAMPING_CUTS:
            d *= 0.5
            cuts += 1
            continue
        s, res = s_new, res_new
    if res <= cfg.tol:
        return s
    raise NonConvergenceError(
        f"scalar fixed point did not reach tol={cfg.tol:g} within {cfg.max_iter} "
        f"iterations (last residual {res:.3e})",
        residual=res,
        nu=gamma.nu,
    )


def solve_semicircle_operator(
    gamma: ComplexPoint,
    eta: SandwichRadius,
    cfg: FixedPointConfig = FixedPointConfig(),
    start: np.ndarray | None = None,
) -> np.ndarray:
    """Solve eta(S)S + gamma*S + I = 0 for a matrix-valued transform S.

    The accepted solution satisfies ||eta(S)S + gamma*S + I||_F <= tol * m and
    has positive semidefinite imaginary part (Herglotz property).
    """
    m = eta.dim
    g = gamma.value
    eye = np.eye(m, dtype=complex)
    s = (-1.0 / g) * eye if start is None else np.asarray(start, dtype=complex).copy()
    d = cfg.damping
    cuts = 0

    def residual(sm):
        return float(np.linalg.norm(eta.apply(sm) @ sm + g * sm + eye))

    res = residual(s)
    for _ in range(cfg.max_iter):
        if res <= cfg.tol * m:
            break
        shifted = g * eye + eta.apply(s)
        try:
            target = -np.linalg.inv(shifted)
        except np.linalg.LinAlgError:
            raise NumericError(
                f"singular resolvent shift at nu={gamma.nu:g}; "
                "use continuation_path to reach small nu"
            )
        s_new = (1.0 - d) * s + d * target
        res_new = residual(s_new)
        if res_new > res and cuts < _MAX_DAMPING_CUTS:
            d *= 0.5
            cuts += 1
            continue
        s, res = s_new, res_new
    if res > cfg.tol * m:
        raise NonConvergenceError(
            f"operator fixed point stalled at residual {res:.3e} "
            f"(target {cfg.tol * m:.3e})",
            residual=res,
            nu=gamma.nu,
        )
    imag_part = (s - s.conj().T) / 2j
    lo = float(np.linalg.eigvalsh(0.5 * (imag_part + imag_part.conj().T)).min())
    if lo < -1e-8:
        raise NumericError(
            f"accepted solution violates the Herglotz property (min imag eigenvalue {lo:.3e})"
        )
    return s


def continuation_path(
    x: float,
    nu_targets,
    eta,
    cfg: FixedPointConfig = FixedPointConfig(),
):
    """Solve along a strictly decreasing nu path, warm-starting each step.

    ``eta`` may be a ScalarRadius (scalar solves) or a SandwichRadius
    (operator solves).  Returns one solution per target; non-convergence is
    re-raised annotated with the nu at which it occurred.
    """
    targets = [float(v) for v in nu_targets]
    if any(v <= 0 for v in targets):
        raise DomainError("all nu targets must be > 0")
    if any(b >= a for a, b in zip(targets, targets[1:])):
        raise DomainError("nu targets must be strictly decreasing")
    solutions = []
    warm = None
    scalar = isinstance(eta, ScalarRadius)
    for nu in targets:
        point = ComplexPoint(x, nu)
        try:
            if scalar:
                sol = solve_semicircle_scalar(point, eta.sigma2, cfg, start=warm)
            else:
                sol = solve_semicircle_operator(point, eta, cfg, start=warm)
        except NonConvergenceError as exc:
            raise NonConvergenceError(
                f"continuation failed at nu={nu:g}: {exc}", residual=exc.residual, nu=nu
            )
        solutions.append(sol)
        warm = sol
    return solutions
