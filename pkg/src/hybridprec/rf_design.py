"""
Analog (RF) precoder construction.

The fully-connected design takes the entry-wise phase of an orthonormal
basis of the channel's column space: since
``|e^{j phi} - u|^2 = 1 + |u|^2 - 2|u| cos(phi - arg u)``, the unit-modulus
matrix closest to ``U`` in Frobenius norm is ``exp(j arg U)``.

Subarray designs keep only ``N_sub = N / N_RF`` nonzero entries per column
on disjoint antenna sets.  For a column ``u`` and support ``S`` the residual
is ``sum_n |u_n|^2 + sum_{n in S} (1 - 2|u_n|)``, so the best support for a
single column is the ``N_sub`` largest magnitudes.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .channel import ChannelRealization, CovarianceEstimate
from .errors import InvalidInputError
from .precoding import DYNAMIC_SUBARRAY, FIXED_SUBARRAY, FULLY_CONNECTED, RfPrecoder

__all__ = [
    "SubspaceBasis",
    "INSTANTANEOUS_SVD",
    "COVARIANCE_EIG",
    "left_singular_basis",
    "covariance_basis",
    "phase_extract",
    "rf_from_left_singular",
    "rf_from_channel_phases",
    "rf_from_covariance",
    "fixed_subarray_rf",
    "dynamic_subarray_rf",
    "exhaustive_subarray_oracle",
    "partition_count",
    "subarray_objective",
    "MAX_PARTITIONS",
]

INSTANTANEOUS_SVD = "instantaneous-svd"
COVARIANCE_EIG = "covariance-eig"

MAX_PARTITIONS = 10**6
_RANK_RTOL = 1e-12
HERMITIAN_TOL = 1e-10


@dataclass(frozen=True)
class SubspaceBasis:
    """Orthonormal basis (N x m) with its singular or eigen values, descending."""

    matrix: np.ndarray
    source: str
    values: np.ndarray

    @property
    def num_columns(self) -> int:
        return self.matrix.shape[1]


def _complete_basis(Q: np.ndarray, m: int) -> np.ndarray:
    """Extend orthonormal columns ``Q`` to ``m`` columns with coordinate vectors.

    Coordinate vectors e_0, e_1, ... are orthogonalized (two passes of
    Gram-Schmidt) against the current set in index order and kept when the
    residual is not negligible, so the completion is deterministic.
    """
    n = Q.shape[0]
    cols = [Q[:, i] for i in range(Q.shape[1])]
    for i in range(n):
        if len(cols) >= m:
            break
        v = np.zeros(n, dtype=complex)
        v[i] = 1.0
        for _ in range(2):
            for c in cols:
                v -= np.vdot(c, v) * c
        norm = np.linalg.norm(v)
        if norm > 1e-6:
            cols.append(v / norm)
    return np.stack(cols, axis=1) if cols else np.zeros((n, 0), dtype=complex)


def _orthonormalize(X: np.ndarray) -> np.ndarray:
    """QR re-orthonormalization that keeps each column's phase (positive diag R)."""
    Q, R = np.linalg.qr(X)
    d = np.diag(R)
    phase = np.where(np.abs(d) > 0, d / np.where(np.abs(d) > 0, np.abs(d), 1.0), 1.0)
    return Q * phase[None, :]


def left_singular_basis(channel: ChannelRealization, num_columns: int) -> SubspaceBasis:
    """Leading left singular vectors of ``H`` via the K x K Gram matrix.

    ``H^H H = V diag(s^2) V^H`` gives ``U = H V diag(1/s)`` in O(N K^2).
    Directions whose singular value is numerically zero are dropped and the
    basis is completed deterministically when ``num_columns`` exceeds the
    rank.
    """
    H = channel.matrix
    n, k = H.shape
    if not 1 <= num_columns <= n:
        raise InvalidInputError(f"num_columns must be in 1..{n}, got {num_columns}")

    gram = H.conj().T @ H
    evals, V = np.linalg.eigh(0.5 * (gram + gram.conj().T))
    order = np.argsort(evals, kind="stable")[::-1]
    evals = np.clip(evals[order], 0.0, None)
    V = V[:, order]
    sigma = np.sqrt(evals)

    smax = sigma[0] if sigma.size else 0.0
    # eigenvalues of the Gram carry roundoff of order K * eps * lambda_max
    floor = max((_RANK_RTOL * smax) ** 2, 64 * k * np.finfo(float).eps * smax**2)
    rank = int(np.sum(evals > floor)) if smax > 0 else 0
    rank = min(rank, num_columns)

    if rank:
        U = H @ V[:, :rank] / sigma[:rank][None, :]
        U = _orthonormalize(U)
    else:
        U = np.zeros((n, 0), dtype=complex)
    U = _complete_basis(U, num_columns)

    values = np.zeros(num_columns)
    values[:rank] = sigma[:rank]
    return SubspaceBasis(matrix=U, source=INSTANTANEOUS_SVD, values=values)


def covariance_basis(cov: CovarianceEstimate, num_columns: int) -> SubspaceBasis:
    """Leading eigenvectors of a Hermitian covariance, eigenvalues descending."""
    R = np.asarray(cov.matrix, dtype=complex)
    n = R.shape[0]
    if R.ndim != 2 or R.shape[1] != n:
        raise InvalidInputError(f"covariance must be square, got shape {R.shape}")
    if not 1 <= num_columns <= n:
        raise InvalidInputError(f"num_columns must be in 1..{n}, got {num_columns}")
    asym = float(np.max(np.abs(R - R.conj().T)))
    scale = max(float(np.max(np.abs(R))), 1.0)
    if asym > HERMITIAN_TOL * scale:
        raise InvalidInputError(f"covariance is not Hermitian (max asymmetry {asym:.3e})")
    evals, vecs = np.linalg.eigh(0.5 * (R + R.conj().T))
    order = np.argsort(evals, kind="stable")[::-1][:num_columns]
    return SubspaceBasis(matrix=vecs[:, order], source=COVARIANCE_EIG,
                         values=np.clip(evals[order], 0.0, None))


def phase_extract(X: np.ndarray) -> np.ndarray:
    """Entry-wise ``exp(j arg X)``; zero entries map to 1."""
    X = np.asarray(X, dtype=complex)
    # np.angle(-0.0 + 0j) is pi, so zeros are handled explicitly
    return np.where(X == 0, 1.0 + 0j, np.exp(1j * np.angle(X)))


def rf_from_left_singular(basis: SubspaceBasis) -> RfPrecoder:
    return RfPrecoder(phase_extract(basis.matrix), architecture=FULLY_CONNECTED)


def rf_from_channel_phases(channel: ChannelRealization, num_rf: int | None = None) -> RfPrecoder:
    """Baseline analog precoder ``exp(j arg H)``; one RF chain per user."""
    if num_rf is not None and num_rf != channel.num_users:
        raise InvalidInputError(
            f"channel-phase RF design needs N_RF == K, got N_RF={num_rf}, K={channel.num_users}"
        )
    return RfPrecoder(phase_extract(channel.matrix), architecture=FULLY_CONNECTED)


def rf_from_covariance(cov: CovarianceEstimate, num_rf: int) -> RfPrecoder:
    """Phase of the ``num_rf`` leading eigenvectors of the covariance.

    Warns when the covariance has more significant eigen-directions than
    RF chains, since then the analog stage cannot cover every path.
    """
    basis = covariance_basis(cov, num_rf)
    _warn_if_undersized(cov, num_rf)
    return rf_from_left_singular(basis)


def _warn_if_undersized(cov: CovarianceEstimate, num_rf: int):
    evals = np.linalg.eigvalsh(0.5 * (cov.matrix + cov.matrix.conj().T))
    top = evals[-1] if evals.size else 0.0
    if top <= 0:
        return
    rank = int(np.sum(evals > 1e-10 * top))
    if rank > num_rf:
        warnings.warn(
            f"covariance has numerical rank {rank} > N_RF = {num_rf}; "
            "the RF precoder cannot span every propagation path",
            RuntimeWarning,
            stacklevel=3,
        )


def _check_subarray_dims(basis: SubspaceBasis, num_rf: int) -> int:
    n = basis.matrix.shape[0]
    if num_rf < 1 or num_rf > n:
        raise InvalidInputError(f"num_rf must be in 1..{n}, got {num_rf}")
    if n % num_rf != 0:
        raise InvalidInputError(
            f"subarray architectures require N divisible by N_RF (N={n}, N_RF={num_rf})"
        )
    if basis.num_columns < num_rf:
        raise InvalidInputError(
            f"basis has {basis.num_columns} columns but {num_rf} RF chains are requested"
        )
    return n // num_rf


def _subarray_matrix(U: np.ndarray, partition) -> np.ndarray:
    F = np.zeros((U.shape[0], len(partition)), dtype=complex)
    for r, subset in enumerate(partition):
        idx = np.asarray(subset, dtype=int)
        F[idx, r] = phase_extract(U[idx, r])
    return F


def subarray_objective(U: np.ndarray, F_rf: np.ndarray) -> float:
    """``||F_RF - U||_F`` over the first ``N_RF`` columns of ``U``."""
    return float(np.linalg.norm(F_rf - U[:, : F_rf.shape[1]]))


def fixed_subarray_rf(basis: SubspaceBasis, num_rf: int) -> RfPrecoder:
    """Block-diagonal analog precoder on consecutive antenna blocks."""
    n_sub = _check_subarray_dims(basis, num_rf)
    partition = tuple(tuple(range(r * n_sub, (r + 1) * n_sub)) for r in range(num_rf))
    return RfPrecoder(_subarray_matrix(basis.matrix, partition),
                      architecture=FIXED_SUBARRAY, partition=partition)


def dynamic_subarray_rf(basis: SubspaceBasis, num_rf: int) -> RfPrecoder:
    """Greedy channel-dependent antenna partitioning.

    RF chain ``r`` (in basis-column order) takes the ``N_sub`` still
    available antennas with largest ``|U[:, r]|``; ties go to the lower
    antenna index.
    """
    n_sub = _check_subarray_dims(basis, num_rf)
    U = basis.matrix
    n = U.shape[0]
    available = np.ones(n, dtype=bool)
    partition = []
    for r in range(num_rf):
        # stable sort on -|u| keeps lower indices first among equal magnitudes
        order = np.argsort(-np.abs(U[:, r]), kind="stable")
        chosen = order[available[order]][:n_sub]
        available[chosen] = False
        partition.append(tuple(sorted(int(i) for i in chosen)))
    partition = tuple(partition)
    return RfPrecoder(_subarray_matrix(U, partition),
                      architecture=DYNAMIC_SUBARRAY, partition=partition)


def partition_count(num_antennas: int, num_rf: int) -> int:
    """Number of unordered partitions of N antennas into N_RF equal subsets."""
    if num_rf < 1 or num_antennas % num_rf != 0:
        raise InvalidInputError(f"N={num_antennas} is not divisible by N_RF={num_rf}")
    n_sub = num_antennas // num_rf
    return math.factorial(num_antennas) // (math.factorial(n_sub) ** num_rf * math.factorial(num_rf))


def _equal_partitions(items: tuple, n_sub: int):
    """Yield unordered equal-size partitions in lexicographic order.

    The smallest remaining item always opens the next block, so every
    unordered partition is produced exactly once.
    """
    if not items:
        yield ()
        return
    first, rest = items[0], items[1:]
    for others in itertools.combinations(rest, n_sub - 1):
        block = (first,) + others
        remaining = tuple(x for x in rest if x not in others)
        for tail in _equal_partitions(remaining, n_sub):
            yield (block,) + tail


def exhaustive_subarray_oracle(basis: SubspaceBasis, num_rf: int,
                               max_partitions: int = MAX_PARTITIONS):
    """Globally optimal equal-size subarray partition for ``||F_RF - U||_F``.

    Enumerates every unordered partition and matches subsets to RF chains
    with the Hungarian algorithm.  Among equal objectives the
    lexicographically first partition wins.

    Returns
    -------
    rf : RfPrecoder
        Dynamic-subarray precoder with the optimal partition; ``partition[r]``
        is the subset wired to RF chain ``r``.
    objective : float
        The attained ``||F_RF - U||_F``.
    """
    n_sub = _check_subarray_dims(basis, num_rf)
    n = basis.matrix.shape[0]
    count = partition_count(n, num_rf)
    if count > max_partitions:
        raise InvalidInputError(
            f"exhaustive search over {count} partitions exceeds the limit of {max_partitions}"
        )
    U = basis.matrix[:, :num_rf]
    mag = np.abs(U)
    # gain[n, r]: change of the squared residual when antenna n joins column r
    gain = 1.0 - 2.0 * mag

    best_cost = np.inf
    best = None
    for part in _equal_partitions(tuple(range(n)), n_sub):
        cost_matrix = np.stack([gain[list(block), :].sum(axis=0) for block in part])
        rows, cols = linear_sum_assignment(cost_matrix)
        cost = float(cost_matrix[rows, cols].sum())
        if cost < best_cost:
            best_cost = cost
            assigned = [None] * num_rf
            for b, r in zip(rows, cols):
                assigned[r] = part[b]
            best = tuple(assigned)

    F = _subarray_matrix(U, best)
    rf = RfPrecoder(F, architecture=DYNAMIC_SUBARRAY, partition=best)
    return rf, subarray_objective(U, F)
