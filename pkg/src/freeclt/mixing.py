"""Estimators of free mixing coefficients over a finite test-operator dictionary.

The population coefficients are suprema over an uncountable set of test
operators; everything here is a documented lower bound: the supremum is
replaced by a maximum over a finite dictionary of recipes and a canonical
set of admissible index placements per lag.  Estimates are maxima of
absolute Monte Carlo means, reported with bootstrap standard errors.

Index placements follow the left-invariant distance |i - j| on integer
indices and, for pair-indexed processes, the pseudo-distance
d2(z, z') = min_{a,b} |z_a - z'_b|.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DomainError
from .ensembles import EnsembleSpec, IndexedSample, sample
from .rng import RngStream

BOOTSTRAP_RESAMPLES = 200
FROZEN_NORM_REPLICAS = 200

PROFILE_KINDS = ("s", "j", "global_s", "global_j", "marginal")


# ---------------------------------------------------------------------------
# analytic references and bounds


def alpha_profile_ar1(rho: float, b: int) -> float:
    """Strong-mixing envelope rho^b of the latent AR(1) constructions.

    For jointly Gaussian chains the alpha coefficient is dominated by the
    maximal correlation, which is rho^b.
    """
    if not 0.0 <= rho < 1.0:
        raise DomainError(f"rho must be in [0, 1), got {rho}")
    if b < 1:
        raise DomainError(f"lag must be >= 1, got {b}")
    return rho**b


def covariance_mixing_bound(c: float, alpha: float, eps: float) -> float:
    """Covariance-by-mixing bound 4 * C * alpha^(eps/(2+eps)).

    C is the L_{1+eps/2} norm of the coupled-minus-ghost functional
    difference.
    """
    if c < 0:
        raise DomainError(f"C must be >= 0, got {c}")
    if not 0.0 <= alpha <= 1.0:
        raise DomainError(f"alpha must be in [0, 1], got {alpha}")
    if not eps > 0:
        raise DomainError(f"eps must be > 0, got {eps}")
    return 4.0 * c * alpha ** (eps / (2.0 + eps))


# ---------------------------------------------------------------------------
# test-operator dictionary


def _center_clip_eigh(y: np.ndarray) -> np.ndarray:
    """Trace-center and clamp the spectrum to [-1, 1] (two rounds).

    Operates in the eigenbasis, so the result is self-adjoint with operator
    norm <= 1 exactly and normalized trace at most one clamp-shift away
    from zero.
    """
    h = 0.5 * (y + y.conj().T)
    ev, q = np.linalg.eigh(h)
    ev = np.clip(ev - ev.mean(), -1.0, 1.0)
    ev = np.clip(ev - ev.mean(), -1.0, 1.0)
    return (q * ev) @ q.conj().T


def monomial_builder(degree: int):
    """Centered, clipped power of the far-block average."""
    if not 1 <= degree <= 3:
        raise DomainError("monomial recipes cover degrees 1..3")

    def build(far_stack: np.ndarray) -> np.ndarray:
        a = far_stack.mean(axis=0)
        return _center_clip_eigh(np.linalg.matrix_power(a, degree))

    build.__name__ = f"monomial{degree}"
    return build


def sign_frame_builder(far_stack: np.ndarray) -> np.ndarray:
    """Balanced sign matrix in the eigenframe of the far-block average.

    The frame is a deterministic function of the far block, so the operator
    is correlated with it; the alternating signs give exact operator norm 1
    and near-zero trace.
    """
    a = far_stack.mean(axis=0)
    _, q = np.linalg.eigh(0.5 * (a + a.conj().T))
    m = a.shape[0]
    signs = np.where(np.arange(m) % 2 == 0, 1.0, -1.0)
    signs = signs - signs.mean()
    signs = np.clip(signs, -1.0, 1.0)
    return (q * signs) @ q.conj().T


def pair_product_builder(far_stack: np.ndarray) -> np.ndarray:
    """Centered, clipped self-adjoint part of a product of two far matrices."""
    a = far_stack[0]
    b = far_stack[1] if far_stack.shape[0] > 1 else far_stack[0]
    return _center_clip_eigh(a @ b)


def zero_builder(far_stack: np.ndarray) -> np.ndarray:
    return np.zeros((far_stack.shape[1], far_stack.shape[2]))


@dataclass(frozen=True)
class TestDictionary:
    """Finite list of recipes producing test operators from a far block."""

    builders: tuple = (monomial_builder(1), sign_frame_builder, pair_product_builder)

    def operators(self, far_stack: np.ndarray) -> list:
        return [b(far_stack) for b in self.builders]

    @property
    def size(self) -> int:
        return len(self.builders)


def default_dictionary() -> TestDictionary:
    return TestDictionary()


# ---------------------------------------------------------------------------
# profiles


@dataclass(frozen=True)
class MixingRow:
    lag: int
    estimate: float
    stderr: float
    n_replicas: int

    def __post_init__(self):
        if self.estimate < 0 or self.stderr < 0:
            raise DomainError("estimates and standard errors are nonnegative")


@dataclass
class MixingProfile:
    kind: str
    rows: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in PROFILE_KINDS:
            raise DomainError(f"unknown profile kind {self.kind!r}")
        lags = [r.lag for r in self.rows]
        if any(b2 <= b1 for b1, b2 in zip(lags, lags[1:])):
            raise DomainError("profile lags must be strictly increasing")

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["kind", "lag", "estimate", "stderr", "replicas", "m", "ensemble", "seed"])
            for r in self.rows:
                w.writerow(
                    [
                        self.kind,
                        r.lag,
                        repr(r.estimate),
                        repr(r.stderr),
                        r.n_replicas,
                        self.meta.get("m", ""),
                        self.meta.get("ensemble", ""),
                        self.meta.get("seed", ""),
                    ]
                )


# ---------------------------------------------------------------------------
# placements

# A placement is (g, g_prime, far_indices); for the marginal kind it is the
# triple (g1, g2, g3, far_indices).


def placements_s(extent: int, b: int) -> list:
    """Singleton-vs-rest split: {g} far from everything else by >= b."""
    if extent < b + 2:
        raise DomainError(f"no admissible singleton placement at lag {b} with extent {extent}")
    g = (1,)
    gp = (1 + b,)
    far = [(i,) for i in range(b + 2, extent + 1)]
    if not far:
        far = [gp]
    return [(g, gp, far)]


def placements_j(extent: int, b: int, include_repeat: bool = True) -> list:
    """Near pair {g, g'} jointly far from the test block by >= b.

    g' may lie inside the ball around g, including g' = g, which probes the
    freeness deficit of a single sample against far test operators.
    """
    out = []
    if include_repeat and extent >= b + 2:
        far = [(i,) for i in range(b + 1, extent + 1)]
        out.append(((1,), (1,), far))
    if extent >= b + 3:
        far = [(i,) for i in range(b + 2, extent + 1)]
        out.append(((1,), (2,), far))
    if not out:
        raise DomainError(f"no admissible pair placement at lag {b} with extent {extent}")
    return out


def _far_pair_window(extent: int, start: int, width: int = 3) -> list:
    far = []
    for i in range(start, min(start + width, extent)):
        far.append((i, i))
        far.append((i, i + 1))
    return far


def placements_global_s(extent: int, b: int) -> list:
    if extent < b + 3:
        raise DomainError(f"no admissible tuple placement at lag {b} with extent {extent}")
    g = (1, 1)
    gp = (1 + b, 1 + b)
    far = _far_pair_window(extent, b + 2)
    if not far:
        far = [gp]
    return [(g, gp, far)]


def placements_global_j(extent: int, b: int) -> list:
    # the far window must clear both coordinates of the near pair (max 2)
    if extent < b + 3:
        raise DomainError(f"no admissible tuple placement at lag {b} with extent {extent}")
    far = _far_pair_window(extent, b + 2)
    return [((1, 1), (1, 2), far)]


def placements_marginal(extent: int, b: int) -> list:
    """Triples sharing all but one coordinate, that coordinate moved far."""
    c = 2 + b
    if extent < c + 2:
        raise DomainError(f"no admissible marginal triple at lag {b} with extent {extent}")
    g1 = (1, c)
    g3 = (2, c)
    g2 = (c, c + 1)
    far = _far_pair_window(extent, c + 1)
    if not far:
        far = [g2]
    return [(g1, g2, g3, far)]


# ---------------------------------------------------------------------------
# estimation core


def frozen_l2_norm(spec: EnsembleSpec, n_replicas: int = FROZEN_NORM_REPLICAS) -> float:
    """L2 norm of the base sample, frozen from a fixed number of replicas."""
    acc = 0.0
    for r in range(n_replicas):
        x = sample(spec, r).matrices[0]
        acc += float(np.real(np.trace(x @ x)) / x.shape[0])
    return float(np.sqrt(acc / n_replicas))


def _trace_stat(a: np.ndarray, b: np.ndarray) -> complex:
    # (1/m) Tr(a @ b) without forming the product matrix
    return complex(np.einsum("ij,ji->", a, b) / a.shape[0])


def _normalize(sample_: IndexedSample, index, l2: float) -> np.ndarray:
    x = sample_.matrix(index)
    if sample_.tail_mean is not None:
        x = x - sample_.tail_mean
    return x / l2


def _pair_stats(sample_: IndexedSample, placements, dictionary, l2) -> list:
    """Per-replica statistics tau((X_g)Y1(X_g')Y2), all placements and pairs."""
    stats = []
    for g, gp, far in placements:
        far_stack = np.stack([sample_.matrix(ix) for ix in far])
        ops = dictionary.operators(far_stack)
        xg = _normalize(sample_, g, l2)
        xgp = _normalize(sample_, gp, l2)
        left = [xg @ y for y in ops]
        right = [xgp @ y for y in ops]
        for a in left:
            for b in right:
                stats.append(_trace_stat(a, b))
    return stats


def _marginal_stats(sample_: IndexedSample, placements, dictionary, l2) -> list:
    stats = []
    for g1, g2, g3, far in placements:
        far_stack = np.stack([sample_.matrix(ix) for ix in far])
        ops = dictionary.operators(far_stack)
        delta = _normalize(sample_, g1, l2) - _normalize(sample_, g3, l2)
        x2 = _normalize(sample_, g2, l2)
        for y in ops:
            stats.append(_trace_stat(delta @ y, x2))
            stats.append(_trace_stat(x2 @ y, delta))
    return stats


def _estimate_from_stats(stats: np.ndarray, boot_rng: np.random.Generator):
    """Max over combos of |mean over replicas|, with bootstrap stderr."""
    n_rep, n_combo = stats.shape
    if n_combo == 0:
        return 0.0, 0.0
    means = np.abs(stats.mean(axis=0))
    estimate = float(means.max())
    picks = boot_rng.integers(0, n_rep, size=(BOOTSTRAP_RESAMPLES, n_rep))
    boot = np.abs(stats[picks].mean(axis=1)).max(axis=1)
    return estimate, float(boot.std())


_PLACEMENTS = {
    "s": lambda extent, b: placements_s(extent, b),
    "j": lambda extent, b: placements_j(extent, b),
    "global_s": lambda extent, b: placements_global_s(extent, b),
    "global_j": lambda extent, b: placements_global_j(extent, b),
    "marginal": lambda extent, b: placements_marginal(extent, b),
}


def _replica_stats(s: IndexedSample, kind: str, b: int, dictionary: TestDictionary, l2: float):
    extent = max(ix[0] for ix in s.index_set)
    placements = _PLACEMENTS[kind](extent, b)
    if kind == "marginal":
        return _marginal_stats(s, placements, dictionary, l2)
    return _pair_stats(s, placements, dictionary, l2)


def _collect_stats(samples, kind: str, b: int, dictionary: TestDictionary, l2: float):
    rows = []
    spec = None
    for s in samples:
        if spec is None:
            spec = s.meta.get("spec")
        rows.append(_replica_stats(s, kind, b, dictionary, l2))
    if not rows:
        raise DomainError("no replicas supplied")
    return np.asarray(rows, dtype=complex), spec


def _boot_rng(spec, kind: str, b: int) -> np.random.Generator:
    seed = spec.seed if spec is not None else 0
    return RngStream(seed).child("bootstrap", kind, b).generator()


def _estimate(samples, kind: str, b: int, dictionary: TestDictionary, l2: float) -> MixingRow:
    stats, spec = _collect_stats(samples, kind, b, dictionary, l2)
    estimate, stderr = _estimate_from_stats(stats, _boot_rng(spec, kind, b))
    return MixingRow(lag=b, estimate=estimate, stderr=stderr, n_replicas=stats.shape[0])


def estimate_free_mixing_s(samples, b: int, dictionary: TestDictionary, l2: float) -> MixingRow:
    """Singleton-type mixing estimate at lag b (lower bound of the supremum)."""
    return _estimate(samples, "s", b, dictionary, l2)


def estimate_free_mixing_j(samples, b: int, dictionary: TestDictionary, l2: float) -> MixingRow:
    """Pair-type mixing estimate at lag b."""
    return _estimate(samples, "j", b, dictionary, l2)


def estimate_global_mixing(
    samples, b: int, dictionary: TestDictionary, l2: float, kind: str = "s"
) -> MixingRow:
    """Tuple-process mixing estimate at lag b under the coordinate-minimum distance."""
    if kind not in ("s", "j"):
        raise DomainError("global mixing kind must be 's' or 'j'")
    return _estimate(samples, f"global_{kind}", b, dictionary, l2)


def estimate_marginal_mixing(samples, b: int, dictionary: TestDictionary, l2: float) -> MixingRow:
    """Marginal mixing estimate at lag b: one coordinate swapped far away."""
    return _estimate(samples, "marginal", b, dictionary, l2)


def mixing_profile(
    spec: EnsembleSpec,
    kind: str,
    lags,
    dictionary: TestDictionary = None,
    n_replicas: int = 200,
    l2: float = None,
    mapper=None,
) -> MixingProfile:
    """Assemble a per-lag profile for one ensemble and one coefficient kind.

    Each replica is sampled once and evaluated at every lag; ``mapper(fn,
    items)`` may parallelize the per-replica work.
    """
    if kind not in PROFILE_KINDS:
        raise DomainError(f"unknown profile kind {kind!r}")
    dictionary = default_dictionary() if dictionary is None else dictionary
    l2 = frozen_l2_norm(spec) if l2 is None else l2
    lags = sorted(set(int(b) for b in lags))
    if mapper is None:
        mapper = lambda fn, items: [fn(it) for it in items]

    def cell(r):
        s = sample(spec, r)
        return [_replica_stats(s, kind, b, dictionary, l2) for b in lags]

    per_replica = mapper(cell, range(n_replicas))
    rows = []
    for bi, b in enumerate(lags):
        stats = np.asarray([rep[bi] for rep in per_replica], dtype=complex)
        est, se = _estimate_from_stats(stats, _boot_rng(spec, kind, b))
        rows.append(MixingRow(lag=b, estimate=est, stderr=se, n_replicas=n_replicas))
    return MixingProfile(
        kind=kind,
        rows=rows,
        meta={"m": spec.dim, "ensemble": spec.kind, "seed": spec.seed},
    )


# ---------------------------------------------------------------------------
# coupled-vs-ghost covariance gaps (empirical check of the mixing bound)


def covariance_gap_check(
    spec: EnsembleSpec,
    b: int,
    dictionary: TestDictionary = None,
    n_replicas: int = 200,
    eps: float = 2.0,
):
    """Measure |E f(near, far) - E f(near, ghost far)| for every dictionary
    functional and compare against the covariance-by-mixing bound.

    The ghost replica replaces the far block with the same positions of an
    independent copy of the whole process, so the block keeps its internal
    law but loses all dependence on the near indices.  Returns
    (gaps, bounds, c_norms) as arrays over the dictionary functionals.
    """
    if spec.kind != "StationaryWishartField":
        raise DomainError("the covariance gap check is defined for the AR(1) field ensemble")
    dictionary = default_dictionary() if dictionary is None else dictionary
    l2 = frozen_l2_norm(spec)
    coupled = []
    ghosted = []
    for r in range(n_replicas):
        s = sample(spec, r)
        ghost_src = sample(replace(spec, seed=spec.seed + 7_654_321), r)
        placements = placements_s(spec.extent, b)
        coupled.append(_pair_stats(s, placements, dictionary, l2))
        g, gp, far = placements[0]
        hybrid_mats = s.matrices.copy()
        lookup = {ix: i for i, ix in enumerate(s.index_set)}
        for ix in far + [gp]:
            hybrid_mats[lookup[ix]] = ghost_src.matrices[lookup[ix]]
        hybrid = IndexedSample(s.index_set, hybrid_mats, meta=s.meta)
        ghosted.append(_pair_stats(hybrid, placements, dictionary, l2))
    coupled = np.asarray(coupled, dtype=complex)
    ghosted = np.asarray(ghosted, dtype=complex)
    gaps = np.abs(coupled.mean(axis=0) - ghosted.mean(axis=0))
    delta = coupled - ghosted
    p = 1.0 + eps / 2.0
    c_norms = (np.abs(delta) ** p).mean(axis=0) ** (1.0 / p)
    alpha = alpha_profile_ar1(spec.rho, b)
    bounds = np.array([covariance_mixing_bound(float(c), alpha, eps) for c in c_norms])
    return gaps, bounds, c_norms
