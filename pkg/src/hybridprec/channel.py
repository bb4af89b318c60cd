"""
Geometric multipath channels for a uniform linear array.

Each user sees ``L`` propagation paths with complex gain ``alpha`` and angle
of departure ``theta``; the user's channel vector is

    h_k = (1/sqrt(L)) * sum_l alpha_{k,l} a(theta_{k,l})

and the columns ``h_k`` are stacked into the ``N x K`` matrix ``H``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvalidInputError

__all__ = [
    "ArrayGeometry",
    "PathSet",
    "ChannelRealization",
    "CovarianceEstimate",
    "array_response",
    "steering_matrix",
    "assemble_channel",
    "generate_channel",
    "redraw_gains",
    "sample_covariance",
    "true_covariance",
]


@dataclass(frozen=True)
class ArrayGeometry:
    """Uniform linear array with ``num_antennas`` elements.

    ``spacing_ratio`` is the element spacing divided by the wavelength.
    """

    num_antennas: int
    spacing_ratio: float = 0.5

    def __post_init__(self):
        if int(self.num_antennas) != self.num_antennas or self.num_antennas < 1:
            raise InvalidInputError(f"num_antennas must be a positive integer, got {self.num_antennas!r}")
        if not np.isfinite(self.spacing_ratio) or self.spacing_ratio <= 0:
            raise InvalidInputError(f"spacing_ratio must be positive, got {self.spacing_ratio!r}")


@dataclass(frozen=True)
class PathSet:
    """Path gains and angles (radians) of one user."""

    gains: np.ndarray
    angles: np.ndarray

    def __post_init__(self):
        gains = np.asarray(self.gains, dtype=complex).reshape(-1)
        angles = np.asarray(self.angles, dtype=float).reshape(-1)
        if gains.size < 1 or gains.size != angles.size:
            raise InvalidInputError(
                f"gains and angles must have equal nonzero length, got {gains.size} and {angles.size}"
            )
        if not np.all(np.isfinite(angles)) or np.any(np.abs(angles) > np.pi):
            raise InvalidInputError("path angles must lie in [-pi, pi]")
        object.__setattr__(self, "gains", gains)
        object.__setattr__(self, "angles", angles)

    @property
    def num_paths(self) -> int:
        return self.gains.size


@dataclass(frozen=True)
class ChannelRealization:
    """One draw of the multiuser channel.

    Attributes
    ----------
    per_user_paths : tuple of PathSet
        Path parameters of each of the ``K`` users. May be empty when the
        realization was built directly from a matrix.
    matrix : ndarray, shape (N, K)
        Channel matrix whose k-th column is the channel of user k.
    """

    per_user_paths: tuple
    matrix: np.ndarray

    @classmethod
    def from_matrix(cls, matrix) -> "ChannelRealization":
        """Wrap a raw channel matrix (1-D input is treated as a single user)."""
        H = np.asarray(matrix, dtype=complex)
        if H.ndim == 1:
            H = H[:, None]
        if H.ndim != 2 or H.size == 0:
            raise InvalidInputError(f"channel matrix must be 2-D and non-empty, got shape {H.shape}")
        return cls(per_user_paths=(), matrix=H)

    @property
    def num_antennas(self) -> int:
        return self.matrix.shape[0]

    @property
    def num_users(self) -> int:
        return self.matrix.shape[1]


@dataclass(frozen=True)
class CovarianceEstimate:
    """Hermitian PSD channel covariance and the number of samples behind it."""

    matrix: np.ndarray
    sample_count: int = field(default=1)


def array_response(angle: float, geometry: ArrayGeometry) -> np.ndarray:
    """Steering vector ``a(angle)`` of the array; element 0 is exactly 1."""
    if not np.isfinite(angle):
        raise InvalidInputError(f"angle must be finite, got {angle!r}")
    return steering_matrix(np.array([angle], dtype=float), geometry)[:, 0]


def steering_matrix(angles, geometry: ArrayGeometry) -> np.ndarray:
    """Stack ``a(theta)`` for every angle into an ``N x len(angles)`` matrix."""
    angles = np.asarray(angles, dtype=float).reshape(-1)
    n = np.arange(geometry.num_antennas)[:, None]
    phase = 2.0 * np.pi * geometry.spacing_ratio * n * np.sin(angles)[None, :]
    return np.exp(1j * phase)


def assemble_channel(paths: Sequence[PathSet], geometry: ArrayGeometry) -> ChannelRealization:
    """Build ``H`` from per-user path parameters."""
    if len(paths) < 1:
        raise InvalidInputError("at least one user is required")
    columns = []
    for ps in paths:
        A = steering_matrix(ps.angles, geometry)
        columns.append(A @ ps.gains / np.sqrt(ps.num_paths))
    return ChannelRealization(per_user_paths=tuple(paths), matrix=np.stack(columns, axis=1))


def _complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def generate_channel(geometry: ArrayGeometry, num_users: int, num_paths: int,
                     rng: np.random.Generator) -> ChannelRealization:
    """Draw a channel with CN(0, 1) gains and angles uniform on [-pi, pi].

    Angles are drawn before gains, user-major, so that a given generator
    state always maps to the same realization.
    """
    if num_users < 1 or num_paths < 1:
        raise InvalidInputError(f"need num_users >= 1 and num_paths >= 1, got {num_users}, {num_paths}")
    angles = rng.uniform(-np.pi, np.pi, size=(num_users, num_paths))
    gains = _complex_normal(rng, (num_users, num_paths))
    paths = [PathSet(gains=gains[k], angles=angles[k]) for k in range(num_users)]
    return assemble_channel(paths, geometry)


def redraw_gains(channel: ChannelRealization, geometry: ArrayGeometry,
                 rng: np.random.Generator) -> ChannelRealization:
    """Same angles as ``channel``, fresh CN(0, 1) gains (fast-fading redraw)."""
    if not channel.per_user_paths:
        raise InvalidInputError("channel carries no path parameters to redraw")
    paths = [PathSet(gains=_complex_normal(rng, ps.num_paths), angles=ps.angles)
             for ps in channel.per_user_paths]
    return assemble_channel(paths, geometry)


def sample_covariance(channels: Sequence[ChannelRealization]) -> CovarianceEstimate:
    """Average of ``H H^H`` over the given realizations."""
    if len(channels) == 0:
        raise InvalidInputError("sample_covariance needs at least one channel realization")
    n = channels[0].num_antennas
    acc = np.zeros((n, n), dtype=complex)
    for ch in channels:
        if ch.num_antennas != n:
            raise InvalidInputError(
                f"all channels must share the antenna count: expected {n}, got {ch.num_antennas}"
            )
        acc += ch.matrix @ ch.matrix.conj().T
    acc /= len(channels)
    # exact Hermitian symmetry regardless of summation roundoff
    acc = 0.5 * (acc + acc.conj().T)
    return CovarianceEstimate(matrix=acc, sample_count=len(channels))


def true_covariance(channel: ChannelRealization, geometry: ArrayGeometry) -> CovarianceEstimate:
    """E[H H^H] over CN(0, 1) gains with the angles of ``channel`` held fixed.

    Equals ``sum_k (1/L) sum_l a(theta_{k,l}) a(theta_{k,l})^H``.
    """
    if not channel.per_user_paths:
        raise InvalidInputError("channel carries no path parameters")
    n = geometry.num_antennas
    R = np.zeros((n, n), dtype=complex)
    for ps in channel.per_user_paths:
        A = steering_matrix(ps.angles, geometry)
        R += A @ A.conj().T / ps.num_paths
    return CovarianceEstimate(matrix=R, sample_count=np.iinfo(np.int64).max)
