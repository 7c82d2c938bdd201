"""Seeded samplers for every matrix process studied in the laboratory.

Each sampler emits an IndexedSample: a family of self-adjoint matrices
indexed by group elements (integers, d-tuples, or pairs), one Monte Carlo
replica of the whole process.  All ensembles are centered analytically, so
the mean matrix is exactly zero (or, for the exchangeable ensemble, the
stored latent directing matrix).

Dependence across indices is driven by latent AR(1) Gaussian constructions,
which have the closed-form strong-mixing envelope rho^lag.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DomainError
from .rng import RngStream

KINDS = (
    "FreeSumSigns",
    "GUE",
    "StationaryWishartField",
    "PartitionedDiagonals",
    "ExchangeableGraphon",
    "UStatOuter",
    "UStatKernel",
)

GRAPHONS = ("product", "min")

# Closed-form mean of the built-in graphons over [0,1]^2.
_GRAPHON_MEAN = {"product": 0.25, "min": 1.0 / 3.0}


@dataclass(frozen=True)
class EnsembleSpec:
    """Declarative description of a matrix process.

    ``dim`` is the matrix size m; ``extent`` is the index range n (box side
    for fields, sequence length for pair processes, family size for the
    partitioned-diagonal and exchangeable ensembles).
    """

    kind: str
    dim: int
    extent: int
    seed: int
    rho: float = 0.0
    d: int = 1
    k_n: Optional[int] = None
    graphon_id: Optional[str] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown ensemble kind {self.kind!r}; expected one of {KINDS}")
        if self.dim < 1:
            raise DomainError(f"dim must be >= 1, got {self.dim}")
        if self.extent < 1:
            raise DomainError(f"extent must be >= 1, got {self.extent}")
        if not 0.0 <= self.rho < 1.0:
            raise DomainError(f"rho must be in [0, 1), got {self.rho}")
        if self.kind == "FreeSumSigns" and (self.dim < 2 or self.dim % 2):
            raise DomainError(f"FreeSumSigns needs even dim >= 2, got {self.dim}")
        if self.kind == "StationaryWishartField" and self.d not in (1, 2):
            raise DomainError(f"field dimension d must be 1 or 2, got {self.d}")
        if self.kind == "PartitionedDiagonals":
            k = self.k_n if self.k_n is not None else self.extent
            if k > self.dim:
                raise DomainError(f"k_n={k} exceeds the matrix size {self.dim}")
            if k != self.extent:
                raise DomainError("PartitionedDiagonals uses extent == k_n (the family size)")
        if self.kind == "ExchangeableGraphon" and self.graphon_id not in GRAPHONS:
            raise DomainError(
                f"unknown graphon_id {self.graphon_id!r}; built-ins are {GRAPHONS}"
            )

    def stream(self) -> RngStream:
        return RngStream(self.seed).child(self.kind)


@dataclass
class IndexedSample:
    """One replica of an indexed matrix process.

    ``matrices[i]`` is the sample at ``index_set[i]``; indices are int tuples
    with no duplicates.  ``tail_mean`` holds the frozen-latent conditional
    mean when the ensemble has a non-trivial invariant algebra (the
    exchangeable ensemble); it is None for ergodic ensembles, whose
    conditional expectation is the scalar trace.
    """

    index_set: tuple
    matrices: np.ndarray
    meta: dict = field(default_factory=dict)
    tail_mean: Optional[np.ndarray] = None
    latents: dict = field(default_factory=dict)

    def __post_init__(self):
        self.index_set = tuple(tuple(int(c) for c in np.atleast_1d(ix)) for ix in self.index_set)
        if len(set(self.index_set)) != len(self.index_set):
            raise DomainError("index_set contains duplicates")
        self.matrices = np.asarray(self.matrices)
        if self.matrices.ndim != 3 or self.matrices.shape[0] != len(self.index_set):
            raise DomainError("matrices must be a (count, m, m) stack matching index_set")
        if self.matrices.shape[1] != self.matrices.shape[2]:
            raise DomainError("matrices must be square")
        self._lookup = {ix: i for i, ix in enumerate(self.index_set)}

    @property
    def dim(self) -> int:
        return self.matrices.shape[1]

    @property
    def count(self) -> int:
        return self.matrices.shape[0]

    def matrix(self, index) -> np.ndarray:
        key = tuple(int(c) for c in np.atleast_1d(index))
        return self.matrices[self._lookup[key]]


def sample_haar_unitary(m: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary via Ginibre QR with phase normalization."""
    if m < 1:
        raise DomainError(f"m must be >= 1, got {m}")
    z = (rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    ph = np.diag(r).copy()
    ph /= np.abs(ph)
    return q * ph


def sample_free_sum_summand(m: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-conjugated balanced sign matrix: exact spectrum {-1, +1}."""
    if m % 2:
        raise DomainError(f"FreeSumSigns needs even m, got {m}")
    u = sample_haar_unitary(m, rng)
    signs = np.concatenate([np.ones(m // 2), -np.ones(m // 2)])
    x = (u * signs) @ u.conj().T
    return 0.5 * (x + x.conj().T)


def sample_gue(m: int, rng: np.random.Generator) -> np.ndarray:
    """GUE(m) normalized so that E (1/m)Tr(X^2) = 1.

    Diagonal entries are real N(0,1); off-diagonal entries have independent
    N(0, 1/2) real and imaginary parts; the result is scaled by 1/sqrt(m).
    """
    a = rng.standard_normal((m, m))
    b = rng.standard_normal((m, m))
    x = np.zeros((m, m), dtype=complex)
    iu = np.triu_indices(m, k=1)
    x[iu] = (a[iu] + 1j * b[iu]) / np.sqrt(2.0)
    x = x + x.conj().T
    x[np.diag_indices(m)] = np.diag(a)
    return x / np.sqrt(m)


def _ar1_vectors(count: int, m: int, rho: float, rng: np.random.Generator) -> np.ndarray:
    """Stationary AR(1) chain of isotropic standard-normal m-vectors."""
    y = np.empty((count, m))
    y[0] = rng.standard_normal(m)
    if count > 1:
        innov = rng.standard_normal((count - 1, m))
        c = np.sqrt(1.0 - rho * rho)
        for t in range(1, count):
            y[t] = rho * y[t - 1] + c * innov[t - 1]
    return y


def _box_indices(extent: int, d: int):
    if d == 1:
        return [(z,) for z in range(1, extent + 1)]
    return [(z1, z2) for z1 in range(1, extent + 1) for z2 in range(1, extent + 1)]


def sample_stationary_field(spec: EnsembleSpec, stream: RngStream, replica: int = 0) -> IndexedSample:
    """Wishart-type stationary field X_z = (Y_z Y_z^T - I)/sqrt(m).

    The latent vectors follow a stationary AR(1) over the raster order of the
    box, so the marginals are exactly standard normal and E X_z = 0 exactly.
    """
    if spec.kind != "StationaryWishartField":
        raise DomainError(f"spec kind {spec.kind!r} is not StationaryWishartField")
    rng = stream.child("field", replica).generator()
    idx = _box_indices(spec.extent, spec.d)
    y = _ar1_vectors(len(idx), spec.dim, spec.rho, rng)
    mats = np.einsum("zi,zj->zij", y, y) - np.eye(spec.dim)
    mats /= np.sqrt(spec.dim)
    return IndexedSample(idx, mats, meta={"spec": spec, "replica": replica})


def sample_partitioned_diagonals(spec: EnsembleSpec, stream: RngStream, replica: int = 0) -> IndexedSample:
    """Cyclic diagonal-relabel family built from k_n independent base matrices.

    Each base matrix has standard-normal entries that are i.i.d. within every
    diagonal {(i, j): |i - j| = r} and AR(1)-dependent of strength rho across
    the diagonal index r.  Family member l takes diagonal r from base copy
    (r + l - 1) mod k_n, so (1/sqrt(k_n)) * sum_l X_l recovers the law of a
    single base matrix.
    """
    if spec.kind != "PartitionedDiagonals":
        raise DomainError(f"spec kind {spec.kind!r} is not PartitionedDiagonals")
    m, k = spec.dim, spec.extent
    rng = stream.child("partdiag", replica).generator()
    # diag_vals[c, r, i] = entry at position i of diagonal r in base copy c
    diag_vals = np.empty((k, m, m))
    diag_vals[:, 0, :] = rng.standard_normal((k, m))
    c = np.sqrt(1.0 - spec.rho * spec.rho)
    for r in range(1, m):
        diag_vals[:, r, :] = spec.rho * diag_vals[:, r - 1, :] + c * rng.standard_normal((k, m))
    mats = np.zeros((k, m, m))
    for l in range(k):
        x = mats[l]
        for r in range(m):
            src = (r + l) % k
            i = np.arange(m - r)
            x[i, i + r] = diag_vals[src, r, : m - r]
            if r:
                x[i + r, i] = diag_vals[src, r, : m - r]
    return IndexedSample(
        [(l + 1,) for l in range(k)], mats, meta={"spec": spec, "replica": replica}
    )


def graphon_value(graphon_id: str, u, v):
    if graphon_id == "product":
        return np.multiply.outer(u, v) if np.ndim(u) else u * v
    if graphon_id == "min":
        return np.minimum.outer(u, v) if np.ndim(u) else min(u, v)
    raise DomainError(f"unknown graphon_id {graphon_id!r}")


def sample_exchangeable_graphon(spec: EnsembleSpec, stream: RngStream, replica: int = 0) -> IndexedSample:
    """Jointly exchangeable, conditionally i.i.d. copies over shared latents.

    One latent uniform vector U per replica; copy c has entries
    w(U_i, U_j) * eps_c(i, j) + (w(U_i, U_j) - wbar) with symmetric i.i.d.
    signs eps_c, so the conditional mean given the latents is the fixed
    directing matrix D = w - wbar for every copy.  Diagonal entries use the
    same scale as off-diagonal ones.
    """
    if spec.kind != "ExchangeableGraphon":
        raise DomainError(f"spec kind {spec.kind!r} is not ExchangeableGraphon")
    m, copies = spec.dim, spec.extent
    rng = stream.child("graphon", replica).generator()
    u = rng.uniform(size=m)
    w = graphon_value(spec.graphon_id, u, u)
    directing = w - _GRAPHON_MEAN[spec.graphon_id]
    mats = np.empty((copies, m, m))
    for ci in range(copies):
        eps = np.where(rng.uniform(size=(m, m)) < 0.5, -1.0, 1.0)
        eps = np.triu(eps)
        eps = eps + np.triu(eps, 1).T
        mats[ci] = w * eps + directing
    return IndexedSample(
        [(ci + 1,) for ci in range(copies)],
        mats,
        meta={"spec": spec, "replica": replica},
        tail_mean=directing,
        latents={"latent_u": u, "profile": w, "directing": directing},
    )


def _pair_indices(extent: int):
    return [(i, j) for i in range(1, extent + 1) for j in range(1, extent + 1)]


def sample_ustat_outer(spec: EnsembleSpec, stream: RngStream, replica: int = 0) -> IndexedSample:
    """Symmetrized outer-product pair process over AR(1) latent vectors.

    Z_(i,j) = (Y_i Y_j^T + Y_j Y_i^T)/2 - rho^|i-j| * I, exactly centered
    because E[Y_i Y_j^T] = rho^|i-j| I for the AR(1) construction.
    """
    if spec.kind != "UStatOuter":
        raise DomainError(f"spec kind {spec.kind!r} is not UStatOuter")
    n, m = spec.extent, spec.dim
    rng = stream.child("ustatouter", replica).generator()
    y = _ar1_vectors(n, m, spec.rho, rng)
    idx = _pair_indices(n)
    mats = np.empty((len(idx), m, m))
    eye = np.eye(m)
    for t, (i, j) in enumerate(idx):
        outer = np.outer(y[i - 1], y[j - 1])
        mats[t] = 0.5 * (outer + outer.T) - spec.rho ** abs(i - j) * eye
    return IndexedSample(
        idx, mats, meta={"spec": spec, "replica": replica}, latents={"vectors": y}
    )


def kernel_matrix(m: int, rho: float, rng: np.random.Generator) -> np.ndarray:
    """Direct sample of the symmetric Gaussian kernel matrix.

    Entry (i, j) is (Z_i + Z_j + g_ij)/sqrt(3 + 2*rho^|i-j|) for a stationary
    AR(1) chain Z and symmetric i.i.d. standard-normal g, so every entry is
    exactly N(0, 1).
    """
    z = _ar1_vectors(m, 1, rho, rng)[:, 0]
    g = rng.standard_normal((m, m))
    g = np.triu(g)
    g = g + np.triu(g, 1).T
    lags = np.abs(np.subtract.outer(np.arange(m), np.arange(m)))
    scale = np.sqrt(3.0 + 2.0 * rho**lags)
    return (np.add.outer(z, z) + g) / scale


def sample_ustat_kernel(spec: EnsembleSpec, stream: RngStream, replica: int = 0) -> IndexedSample:
    """Modular-relabel pair family whose normalized double sum has the kernel law.

    A grid of m x m independent kernel matrices is drawn; family member
    (z1, z2) takes entry (i, j) from the copy labeled
    ((i + z1) mod m, (j + z2) mod m), mirrored to keep symmetry.  Averaging
    the family over a full residue grid reproduces a single kernel matrix in
    distribution.
    """
    if spec.kind != "UStatKernel":
        raise DomainError(f"spec kind {spec.kind!r} is not UStatKernel")
    n, m = spec.extent, spec.dim
    rng = stream.child("ustatkernel", replica).generator()
    copies = np.empty((m, m, m, m))
    for a in range(m):
        for b in range(m):
            copies[a, b] = kernel_matrix(m, spec.rho, rng)
    idx = _pair_indices(n)
    mats = np.empty((len(idx), m, m))
    rows = np.arange(m)
    for t, (z1, z2) in enumerate(idx):
        a = (rows[:, None] + z1) % m
        b = (rows[None, :] + z2) % m
        x = copies[a, b, rows[:, None], rows[None, :]]
        upper = np.triu(x)
        mats[t] = upper + np.triu(upper, 1).T
    return IndexedSample(idx, mats, meta={"spec": spec, "replica": replica})


_SAMPLERS = {
    "StationaryWishartField": sample_stationary_field,
    "PartitionedDiagonals": sample_partitioned_diagonals,
    "ExchangeableGraphon": sample_exchangeable_graphon,
    "UStatOuter": sample_ustat_outer,
    "UStatKernel": sample_ustat_kernel,
}


def sample(spec: EnsembleSpec, replica: int = 0) -> IndexedSample:
    """Draw one replica of the process described by ``spec``.

    Deterministic: identical (spec, replica) yields a bit-identical sample.
    """
    stream = spec.stream()
    if spec.kind == "FreeSumSigns":
        rng_ = stream.child("signs", replica).generator()
        mats = np.stack([sample_free_sum_summand(spec.dim, rng_) for _ in range(spec.extent)])
        return IndexedSample(
            [(i + 1,) for i in range(spec.extent)], mats, meta={"spec": spec, "replica": replica}
        )
    if spec.kind == "GUE":
        rng_ = stream.child("gue", replica).generator()
        mats = np.stack([sample_gue(spec.dim, rng_) for _ in range(spec.extent)])
        return IndexedSample(
            [(i + 1,) for i in range(spec.extent)], mats, meta={"spec": spec, "replica": replica}
        )
    return _SAMPLERS[spec.kind](spec, stream, replica)


def replicas(spec: EnsembleSpec, count: int):
    """Generator over ``count`` independent replicas of the process."""
    for r in range(count):
        yield sample(spec, r)


# Binary cache container: header, little-endian complex64 entries, index table.
_MAGIC = b"FCLTIS01"


def save_indexed(sample_: IndexedSample, path) -> None:
    """Write the sample to the binary cache container.

    Layout (all little-endian): 8-byte magic "FCLTIS01"; u32 dim, u32 count,
    u32 index tuple width; count*m*m complex64 entries in index order; then
    the index table as count*width int64.  Entries are cast to complex64,
    so the container is a lossy cache, not an archival format.
    """
    mats = np.ascontiguousarray(sample_.matrices, dtype=np.complex64)
    width = len(sample_.index_set[0])
    idx = np.asarray(sample_.index_set, dtype="<i8").reshape(sample_.count, width)
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<III", sample_.dim, sample_.count, width))
        fh.write(mats.astype("<c8").tobytes())
        fh.write(idx.tobytes())


def load_indexed(path) -> IndexedSample:
    """Read a sample written by :func:`save_indexed`."""
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != _MAGIC:
            raise DomainError(f"not a sample container: bad magic {magic!r}")
        dim, count, width = struct.unpack("<III", fh.read(12))
        mats = np.frombuffer(fh.read(count * dim * dim * 8), dtype="<c8")
        mats = mats.reshape(count, dim, dim).astype(np.complex64)
        idx = np.frombuffer(fh.read(count * width * 8), dtype="<i8").reshape(count, width)
    return IndexedSample([tuple(row) for row in idx], mats)
