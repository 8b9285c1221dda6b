"""Manifold alignment of a source and a destination point set.

Pairs calibration points with their grid positions, assembles the joint
Laplacian over [paired | unpaired-source | observations] with the
hard-constraint block structure, and solves the constrained eigenproblem
for the shared low-dimensional embedding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ConfigurationError, NumericalError, StructuralError
from .validation import check_array, check_nonnegative_float, check_positive_int

ZERO_EIGENVALUE_TOL = 1e-8


@dataclass(frozen=True)
class PairedIndexing:
    """Index bookkeeping for the aligned order [paired | unpaired source].

    ``paired`` lists source indices in calibration order; ``unpaired`` the
    rest ascending.  ``perm`` maps aligned position -> original source index,
    ``inv_perm`` the reverse.  Destination order is fixed as
    [calibration rows | observation rows].
    """

    paired: np.ndarray
    unpaired: np.ndarray
    n_source: int

    def __post_init__(self):
        object.__setattr__(self, "paired", np.asarray(self.paired, dtype=int))
        object.__setattr__(self, "unpaired", np.asarray(self.unpaired, dtype=int))

    @property
    def n_paired(self) -> int:
        return len(self.paired)

    @property
    def perm(self) -> np.ndarray:
        return np.concatenate([self.paired, self.unpaired])

    @property
    def inv_perm(self) -> np.ndarray:
        perm = self.perm
        inv = np.empty_like(perm)
        inv[perm] = np.arange(len(perm))
        return inv


@dataclass(frozen=True)
class JointLaplacian:
    """Joint matrix over S + O rows with its mixing weights and block sizes.

    ``matrix`` keeps the raw assembled blocks (not symmetrized); the
    eigensolver symmetrizes internally.
    """

    matrix: np.ndarray
    lambda_x: float
    lambda_y: float
    n_source: int
    n_calibration: int
    n_observations: int


@dataclass(frozen=True)
class Embedding:
    """Aligned embedding: (S + O) x l, rows [paired | unpaired source | observations]."""

    vectors: np.ndarray
    eigenvalues: np.ndarray
    n_source: int
    n_calibration: int
    n_observations: int

    @property
    def paired_rows(self) -> np.ndarray:
        return self.vectors[: self.n_calibration]

    @property
    def unpaired_source_rows(self) -> np.ndarray:
        return self.vectors[self.n_calibration : self.n_source]

    @property
    def source_rows(self) -> np.ndarray:
        """All S source rows in aligned order [paired | unpaired]."""
        return self.vectors[: self.n_source]

    @property
    def observation_rows(self) -> np.ndarray:
        return self.vectors[self.n_source :]


def pair_indices(source_positions, calibration_positions) -> PairedIndexing:
    """Match each calibration position to the grid position it equals exactly."""
    source_positions = check_array(source_positions, name="source_positions", ndim=2)
    calibration_positions = check_array(
        calibration_positions, name="calibration_positions", ndim=2
    )
    if source_positions.shape[1] != calibration_positions.shape[1]:
        raise StructuralError(
            f"dimension mismatch: source positions are {source_positions.shape[1]}-d, "
            f"calibration positions are {calibration_positions.shape[1]}-d"
        )
    lookup = {tuple(p): i for i, p in enumerate(source_positions)}
    paired = []
    seen = set()
    for p in calibration_positions:
        key = tuple(p)
        if key not in lookup:
            raise ConfigurationError(f"calibration position {key} is not a grid position")
        idx = lookup[key]
        if idx in seen:
            raise ConfigurationError(f"calibration position {key} appears more than once")
        seen.add(idx)
        paired.append(idx)
    paired = np.array(paired, dtype=int)
    unpaired = np.setdiff1d(np.arange(len(source_positions)), paired)
    return PairedIndexing(paired=paired, unpaired=unpaired, n_source=len(source_positions))


def mixing_weights(n_source: int, n_calibration: int, n_observations: int) -> tuple[float, float]:
    """Balance factors for the two Laplacians: ((C+O)/(S+C+O), S/(S+C+O))."""
    s = check_positive_int(n_source, name="n_source")
    c = check_positive_int(n_calibration, name="n_calibration")
    o = check_positive_int(n_observations, name="n_observations")
    if c > s:
        raise ConfigurationError(f"n_calibration={c} cannot exceed n_source={s}")
    total = s + c + o
    return (c + o) / total, s / total


def assemble_joint_laplacian(
    source_laplacian, dest_laplacian, idx: PairedIndexing, lambda_x: float, lambda_y: float
) -> JointLaplacian:
    """Block assembly over the aligned order [paired | unpaired source | observations].

    ``source_laplacian`` must already be permuted to [paired | unpaired]
    order (S x S); ``dest_laplacian`` is (C + O) x (C + O) over
    [calibration | observations].  Paired rows share a single block, so the
    hard pairing constraint is structural.  Cross blocks between unpaired
    source and observations are exactly zero.
    """
    lx = check_array(source_laplacian, name="source_laplacian", ndim=2)
    ly = check_array(dest_laplacian, name="dest_laplacian", ndim=2)
    s = idx.n_source
    c = idx.n_paired
    if lx.shape != (s, s):
        raise StructuralError(f"source Laplacian must be ({s}, {s}), got {lx.shape}")
    if ly.shape[0] != ly.shape[1] or ly.shape[0] <= c:
        raise StructuralError(
            f"destination Laplacian must be square with more than {c} rows, got {ly.shape}"
        )
    o = ly.shape[0] - c
    lambda_x = check_nonnegative_float(lambda_x, name="lambda_x")
    lambda_y = check_nonnegative_float(lambda_y, name="lambda_y")
    n = s + o
    z = np.zeros((n, n))
    z[:c, :c] = lambda_x * lx[:c, :c] + lambda_y * ly[:c, :c]
    z[:c, c:s] = lambda_x * lx[:c, c:]
    z[:c, s:] = lambda_y * ly[:c, c:]
    z[c:s, :c] = lambda_x * lx[c:, :c]
    z[c:s, c:s] = lambda_x * lx[c:, c:]
    z[s:, :c] = lambda_y * ly[c:, :c]
    z[s:, s:] = lambda_y * ly[c:, c:]
    return JointLaplacian(
        matrix=z,
        lambda_x=lambda_x,
        lambda_y=lambda_y,
        n_source=s,
        n_calibration=c,
        n_observations=o,
    )


def compute_embedding(
    joint: JointLaplacian, n_components: int, zero_tol: float = ZERO_EIGENVALUE_TOL
) -> Embedding:
    """Eigenvectors of the smallest nonzero eigenvalues, constrained to sum to zero.

    The assembled matrix is symmetrized (the quadratic form only sees the
    symmetric part).  The sum-to-zero constraint is imposed by deflating
    with the centering projector before decomposing: the symmetric part of
    an LLE-style joint Laplacian does not annihilate the all-ones vector,
    so unconstrained eigenvectors would violate the constraint badly.
    Eigenvalues at or below zero_tol * largest count as zero and are
    skipped, as are negative ones.
    """
    n_components = check_positive_int(n_components, name="n_components")
    zero_tol = check_nonnegative_float(zero_tol, name="zero_tol")
    z = joint.matrix
    n = z.shape[0]
    if n_components >= n:
        raise ConfigurationError(
            f"n_components={n_components} must be < number of embedded points ({n})"
        )
    sym = 0.5 * (z + z.T)
    # deflation: restrict the quadratic form to the subspace orthogonal to 1
    col_means = sym.mean(axis=0, keepdims=True)
    centered = sym - col_means - col_means.T + col_means.mean()
    evals, evecs = scipy.linalg.eigh(centered)
    lam_max = evals[-1]
    if lam_max <= 0:
        raise NumericalError(
            f"joint Laplacian has no positive eigenvalues (max {lam_max:.3e})"
        )
    keep = np.flatnonzero(evals > zero_tol * lam_max)
    if len(keep) < n_components:
        raise NumericalError(
            f"only {len(keep)} eigenvalues exceed the zero threshold "
            f"{zero_tol * lam_max:.3e}, need {n_components}; "
            f"smallest eigenvalues: {np.array2string(evals[: min(8, n)], precision=3)}"
        )
    take = keep[:n_components]
    vectors = evecs[:, take].copy()
    # deterministic sign: largest-magnitude entry of each column positive
    for col in range(vectors.shape[1]):
        peak = np.argmax(np.abs(vectors[:, col]))
        if vectors[peak, col] < 0:
            vectors[:, col] = -vectors[:, col]
    return Embedding(
        vectors=vectors,
        eigenvalues=evals[take].copy(),
        n_source=joint.n_source,
        n_calibration=joint.n_calibration,
        n_observations=joint.n_observations,
    )


def align(
    source_laplacian,
    dest_laplacian,
    idx: PairedIndexing,
    n_observations: int,
    n_components: int,
    zero_tol: float = ZERO_EIGENVALUE_TOL,
) -> Embedding:
    """Full alignment: mixing weights, joint assembly, constrained eigensolve.

    ``source_laplacian`` is in original grid order here; it is permuted to
    [paired | unpaired] internally.
    """
    lx = check_array(source_laplacian, name="source_laplacian", ndim=2)
    perm = idx.perm
    lx_aligned = lx[np.ix_(perm, perm)]
    lam_x, lam_y = mixing_weights(idx.n_source, idx.n_paired, n_observations)
    joint = assemble_joint_laplacian(lx_aligned, dest_laplacian, idx, lam_x, lam_y)
    if joint.n_observations != n_observations:
        raise StructuralError(
            f"destination Laplacian implies {joint.n_observations} observations, "
            f"expected {n_observations}"
        )
    return compute_embedding(joint, n_components, zero_tol=zero_tol)
