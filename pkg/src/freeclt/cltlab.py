"""Normalized sums, U-statistic sums, limiting-radius estimates and
Berry-Esseen style convergence sweeps against the semicircle reference."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import DomainError, NoiseFloorError
from .ensembles import EnsembleSpec, IndexedSample, sample
from .rng import RngStream
from .spectral import ComplexPoint, semicircle_stieltjes

BOOTSTRAP_RESAMPLES = 200
NU_FLOOR = 0.25


def normalized_sum(sample_: IndexedSample) -> np.ndarray:
    """W = |A|^{-1/2} * sum of the indexed matrices."""
    if sample_.count == 0:
        raise DomainError("cannot sum an empty index set")
    return sample_.matrices.sum(axis=0) / np.sqrt(sample_.count)


def ustat_sum(sample_: IndexedSample, include_diagonal: bool = True) -> np.ndarray:
    """W = n^{-3/2} * sum over the complete pair grid [n]^2.

    Diagonal pairs are part of the grid; ``include_diagonal=False`` drops
    them (sensitivity runs) while keeping the n^{-3/2} normalizer.
    """
    idx = sample_.index_set
    if not idx or len(idx[0]) != 2:
        raise DomainError("ustat_sum needs a pair-indexed sample")
    n = max(ix[0] for ix in idx)
    expected = {(i, j) for i in range(1, n + 1) for j in range(1, n + 1)}
    if set(idx) != expected:
        raise DomainError(f"incomplete pair grid: expected all of [1..{n}]^2")
    total = np.zeros_like(sample_.matrices[0])
    for ix, mat in zip(idx, sample_.matrices):
        if not include_diagonal and ix[0] == ix[1]:
            continue
        total = total + mat
    return total / n**1.5


@dataclass(frozen=True)
class RadiusEstimate:
    """Scalarized variance estimate sigma2_hat = sum of per-lag contributions."""

    sigma2_hat: float
    lag_cutoff: int
    contributions: dict
    stderr: float

    def __post_init__(self):
        total = float(np.sum(list(self.contributions.values())))
        if total != self.sigma2_hat:
            raise DomainError("sigma2_hat must equal the sum of stored contributions")


def _lag_contributions(sample_: IndexedSample, lag_cutoff: int) -> np.ndarray:
    """Anchor-pooled per-lag trace correlations (1/m)Tr(X_z X_{z+b}).

    Lag b > 0 carries the two-sided symmetrization factor 2.
    """
    idx = sample_.index_set
    n = len(idx)
    if lag_cutoff >= n:
        raise DomainError(f"lag cutoff {lag_cutoff} must be below the extent {n}")
    m = sample_.dim
    out = np.empty(lag_cutoff + 1)
    mats = sample_.matrices
    for b in range(lag_cutoff + 1):
        vals = [
            float(np.real(np.einsum("ij,ji->", mats[z], mats[z + b]))) / m
            for z in range(n - b)
        ]
        out[b] = (2.0 if b else 1.0) * float(np.mean(vals))
    return out


def estimate_radius_stationary(samples, lag_cutoff: int) -> RadiusEstimate:
    """sigma2_hat = sum over |z| <= L of the mean trace correlation at lag z.

    Pools all admissible anchors within each replica (the processes are
    stationary) and averages over replicas.
    """
    per_rep = np.asarray([_lag_contributions(s, lag_cutoff) for s in samples])
    if per_rep.size == 0:
        raise DomainError("no replicas supplied")
    mean = per_rep.mean(axis=0)
    sig = per_rep.sum(axis=1)
    stderr = float(sig.std(ddof=1) / np.sqrt(per_rep.shape[0])) if per_rep.shape[0] > 1 else 0.0
    contributions = {b: float(mean[b]) for b in range(lag_cutoff + 1)}
    return RadiusEstimate(
        sigma2_hat=float(np.sum(list(contributions.values()))),
        lag_cutoff=lag_cutoff,
        contributions=contributions,
        stderr=stderr,
    )


def estimate_marginal_average(samples, coordinate: int, anchor: int, window: int) -> np.ndarray:
    """Mean over replicas of the window average with one coordinate pinned.

    For pair-indexed processes: (1/p) * sum_{j <= p} X_(anchor, j) when
    ``coordinate`` is 1, and X_(j, anchor) when it is 2.
    """
    if coordinate not in (1, 2):
        raise DomainError("coordinate must be 1 or 2 for pair processes")
    acc = None
    count = 0
    for s in samples:
        extent = max(ix[0] for ix in s.index_set)
        if window > extent:
            raise DomainError(f"window {window} exceeds the extent {extent}")
        part = _marginal_average_single(s, coordinate, anchor, window)
        acc = part if acc is None else acc + part
        count += 1
    if count == 0:
        raise DomainError("no replicas supplied")
    return acc / count


def _marginal_average_single(s: IndexedSample, coordinate: int, anchor: int, window: int):
    mats = []
    for j in range(1, window + 1):
        ix = (anchor, j) if coordinate == 1 else (j, anchor)
        mats.append(s.matrix(ix))
    return np.mean(mats, axis=0)


def estimate_radius_ustat(samples, lag_cutoff: int, window: int) -> RadiusEstimate:
    """Scalarized U-statistic radius from window-p marginal averages.

    sigma2_hat = sum over coordinates i, j in {1, 2} and lags |z| <= L of
    the mean trace correlation of the pinned-coordinate window averages.
    Exposes per-lag contributions (summed over the 2x2 coordinate pairs).
    """
    per_rep = []
    for s in samples:
        extent = max(ix[0] for ix in s.index_set)
        if window > extent:
            raise DomainError(f"window {window} exceeds the extent {extent}")
        if lag_cutoff + 1 > extent:
            raise DomainError(f"lag cutoff {lag_cutoff} needs extent > {lag_cutoff}")
        m = s.dim
        bars = {
            (i, g): _marginal_average_single(s, i, g, window)
            for i in (1, 2)
            for g in range(1, lag_cutoff + 2)
        }
        row = np.empty(lag_cutoff + 1)
        for z in range(lag_cutoff + 1):
            acc = 0.0
            for i in (1, 2):
                for j in (1, 2):
                    acc += float(
                        np.real(np.einsum("ij,ji->", bars[(i, 1)], bars[(j, 1 + z)]))
                    ) / m
            row[z] = (2.0 if z else 1.0) * acc
        per_rep.append(row)
    if not per_rep:
        raise DomainError("no replicas supplied")
    per_rep = np.asarray(per_rep)
    mean = per_rep.mean(axis=0)
    sig = per_rep.sum(axis=1)
    stderr = float(sig.std(ddof=1) / np.sqrt(per_rep.shape[0])) if per_rep.shape[0] > 1 else 0.0
    contributions = {z: float(mean[z]) for z in range(lag_cutoff + 1)}
    return RadiusEstimate(
        sigma2_hat=float(np.sum(list(contributions.values()))),
        lag_cutoff=lag_cutoff,
        contributions=contributions,
        stderr=stderr,
    )


def single_coordinate_radius(samples, lag_cutoff: int, window: int) -> float:
    """Same as the U-statistic radius but restricted to coordinate (1, 1)."""
    vals = []
    for s in samples:
        m = s.dim
        bars = {g: _marginal_average_single(s, 1, g, window) for g in range(1, lag_cutoff + 2)}
        total = float(np.real(np.einsum("ij,ji->", bars[1], bars[1]))) / m
        for z in range(1, lag_cutoff + 1):
            total += 2.0 * float(np.real(np.einsum("ij,ji->", bars[1], bars[1 + z]))) / m
        vals.append(total)
    if not vals:
        raise DomainError("no replicas supplied")
    return float(np.mean(vals))


# ---------------------------------------------------------------------------
# convergence reports


@dataclass(frozen=True)
class ReportRow:
    ensemble: str
    m: int
    n: int
    gamma: ComplexPoint
    delta: float
    stderr: float
    replicas: int
    seed: int

    def __post_init__(self):
        if self.delta < 0:
            raise DomainError("delta must be >= 0")


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    residual: float
    n_points: int


@dataclass
class ConvergenceReport:
    rows: list = field(default_factory=list)
    fitted: Optional[FitResult] = None

    def append(self, row: ReportRow) -> None:
        key = (row.ensemble, row.m, row.n, row.gamma.x, row.gamma.nu)
        if key in self._keys():
            raise DomainError(f"duplicate report row {key}")
        self.rows.append(row)

    def _keys(self):
        return {(r.ensemble, r.m, r.n, r.gamma.x, r.gamma.nu) for r in self.rows}

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(
                ["ensemble", "m", "n", "gamma_re", "gamma_im", "delta", "stderr", "replicas", "seed"]
            )
            for r in self.rows:
                w.writerow(
                    [
                        r.ensemble,
                        r.m,
                        r.n,
                        repr(r.gamma.x),
                        repr(r.gamma.nu),
                        repr(r.delta),
                        repr(r.stderr),
                        r.replicas,
                        r.seed,
                    ]
                )

    def write_fit_csv(self, path, gamma: ComplexPoint) -> None:
        if self.fitted is None:
            raise DomainError("report has no fit")
        ens = self.rows[0].ensemble if self.rows else ""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["ensemble", "gamma_re", "gamma_im", "slope", "intercept", "residual", "n_points"])
            f = self.fitted
            w.writerow(
                [ens, repr(gamma.x), repr(gamma.nu), repr(f.slope), repr(f.intercept), repr(f.residual), f.n_points]
            )


def _sweep_cell(spec: EnsembleSpec, replica: int, lag_cutoff: int):
    """Eigenvalues of the (unstandardized) sum plus per-lag radius statistics."""
    s = sample(spec, replica)
    w = normalized_sum(s)
    eigs = np.linalg.eigvalsh(0.5 * (w + w.conj().T))
    return eigs, _lag_contributions(s, lag_cutoff)


def _delta_and_stderr(eig_rows: np.ndarray, lag_rows: np.ndarray, gamma: ComplexPoint, boot_rng):
    """Distance of the replica-averaged transform of W/sigma_hat to the
    unit semicircle, with a bootstrap stderr that re-estimates sigma_hat."""
    ref = semicircle_stieltjes(gamma, 1.0)
    g = gamma.value
    sig_rows = lag_rows.sum(axis=1)

    def delta_for(idx):
        scale = np.sqrt(float(np.mean(sig_rows[idx])))
        vals = (1.0 / (eig_rows[idx] / scale - g)).mean(axis=1)
        return abs(vals.mean() - ref)

    all_idx = np.arange(eig_rows.shape[0])
    delta = delta_for(all_idx)
    picks = boot_rng.integers(0, len(all_idx), size=(BOOTSTRAP_RESAMPLES, len(all_idx)))
    boot = np.array([delta_for(p) for p in picks])
    return float(delta), float(boot.std())


def berry_esseen_sweep(
    spec: EnsembleSpec,
    n_list,
    grid,
    n_replicas: int,
    radius_lag: int = 0,
    mapper=None,
) -> ConvergenceReport:
    """Measure Delta(n, gamma) = |avg transform of W_n/sigma_hat - unit
    semicircle transform| over a gamma grid, for each extent in ``n_list``.

    ``radius_lag`` is the lag cutoff of the standardization estimate; 0 is
    exact for i.i.d. ensembles.  ``mapper(fn, items)`` evaluates replica
    cells (in item order) and may be parallel.
    """
    grid = list(grid)
    if not grid:
        raise DomainError("gamma grid must be non-empty")
    if any(g.nu < NU_FLOOR for g in grid):
        raise DomainError(f"sweep grid must keep nu >= {NU_FLOOR}")
    if mapper is None:
        mapper = lambda fn, items: [fn(it) for it in items]
    report = ConvergenceReport()
    for n in n_list:
        spec_n = replace(spec, extent=int(n))
        cells = mapper(lambda r: _sweep_cell(spec_n, r, radius_lag), range(n_replicas))
        eig_rows = np.asarray([c[0] for c in cells])
        lag_rows = np.asarray([c[1] for c in cells])
        for gi, gamma in enumerate(grid):
            boot = RngStream(spec.seed).child("sweepboot", int(n), gi).generator()
            delta, stderr = _delta_and_stderr(eig_rows, lag_rows, gamma, boot)
            report.append(
                ReportRow(
                    ensemble=spec.kind,
                    m=spec.dim,
                    n=int(n),
                    gamma=gamma,
                    delta=delta,
                    stderr=stderr,
                    replicas=n_replicas,
                    seed=spec.seed,
                )
            )
    return report


def nu_sweep(
    spec: EnsembleSpec,
    n: int,
    nu_list,
    n_replicas: int,
    radius_lag: int = 0,
) -> ConvergenceReport:
    """Delta as a function of nu at fixed extent, along a descending nu list."""
    nus = [float(v) for v in nu_list]
    if any(b >= a for a, b in zip(nus, nus[1:])):
        raise DomainError("nu_list must be strictly decreasing")
    if any(v < NU_FLOOR for v in nus):
        raise DomainError(f"nu_list must keep nu >= {NU_FLOOR}")
    grid = [ComplexPoint(0.0, v) for v in nus]
    return berry_esseen_sweep(spec, [n], grid, n_replicas, radius_lag)


def rate_fit(report: ConvergenceReport, gamma: ComplexPoint) -> FitResult:
    """Least-squares slope of log Delta vs log n at fixed gamma.

    Rows with Delta <= 3 * stderr are noise-floor points and are excluded;
    fitting requires at least four surviving extents.
    """
    rows = [
        r
        for r in report.rows
        if r.gamma.x == gamma.x and r.gamma.nu == gamma.nu and r.delta > 3.0 * r.stderr
    ]
    ns = sorted({r.n for r in rows})
    if len(ns) < 4:
        raise NoiseFloorError(
            f"floor reached: only {len(ns)} extents have Delta above 3*stderr at "
            f"gamma = {gamma.x} + {gamma.nu}i"
        )
    logn = np.log([r.n for r in rows])
    logd = np.log([r.delta for r in rows])
    a = np.vstack([logn, np.ones_like(logn)]).T
    coef, res, *_ = np.linalg.lstsq(a, logd, rcond=None)
    residual = float(res[0]) if res.size else 0.0
    fit = FitResult(slope=float(coef[0]), intercept=float(coef[1]), residual=residual, n_points=len(rows))
    report.fitted = fit
    return fit


def kargin_condition_check(samples, dictionary=None, k_index: int = None):
    """Residuals of the almost-free factorization conditions.

    Returns (r1, r2): r1 = max over test operators of |mean tau(X_k Y1)|;
    r2 = max over pairs of |mean tau(X_k Y1 X_k Y2) - mean tau(X_k^2) *
    mean tau(Y1) * mean tau(Y2)|.  Test operators are built from all indices
    other than k.
    """
    from .mixing import default_dictionary

    dictionary = default_dictionary() if dictionary is None else dictionary
    t_xy = None
    t_4 = None
    t_x2 = []
    t_y = None
    count = 0
    for s in samples:
        idx = list(s.index_set)
        k = idx[len(idx) // 2] if k_index is None else (k_index,)
        far = [ix for ix in idx if ix != k]
        far_stack = np.stack([s.matrix(ix) for ix in far])
        ops = dictionary.operators(far_stack)
        x = s.matrix(k)
        m = s.dim
        xy = [complex(np.einsum("ij,ji->", x, y)) / m for y in ops]
        quad = []
        for y1 in ops:
            a = x @ y1
            for y2 in ops:
                quad.append(complex(np.einsum("ij,ji->", a, x @ y2)) / m)
        traces = [complex(np.trace(y)) / m for y in ops]
        t_xy = np.array(xy) if t_xy is None else t_xy + np.array(xy)
        t_4 = np.array(quad) if t_4 is None else t_4 + np.array(quad)
        t_y = np.array(traces) if t_y is None else t_y + np.array(traces)
        t_x2.append(float(np.real(np.einsum("ij,ji->", x, x))) / m)
        count += 1
    if count == 0:
        raise DomainError("no replicas supplied")
    t_xy = t_xy / count
    t_4 = (t_4 / count).reshape(len(t_xy), len(t_xy))
    t_y = t_y / count
    x2 = float(np.mean(t_x2))
    r1 = float(np.max(np.abs(t_xy))) if len(t_xy) else 0.0
    r2 = 0.0
    for i in range(len(t_y)):
        for j in range(len(t_y)):
            r2 = max(r2, abs(t_4[i, j] - x2 * t_y[i] * t_y[j]))
    return r1, float(r2)
