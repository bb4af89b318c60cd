"""Precoder containers, spectral efficiency and joint power normalization."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .channel import ChannelRealization
from .errors import ContractViolation, DegenerateInputError, InvalidInputError

__all__ = [
    "FULLY_CONNECTED",
    "FIXED_SUBARRAY",
    "DYNAMIC_SUBARRAY",
    "FULLY_DIGITAL",
    "RfPrecoder",
    "DigitalPrecoder",
    "HybridPrecoder",
    "SnrPoint",
    "RfReport",
    "user_se",
    "sum_se",
    "sinr",
    "composite_power",
    "normalize_power",
    "make_hybrid",
    "fully_digital_rf",
    "validate_rf",
]

FULLY_CONNECTED = "fully-connected"
FIXED_SUBARRAY = "fixed-subarray"
DYNAMIC_SUBARRAY = "dynamic-subarray"
FULLY_DIGITAL = "fully-digital"
_ARCHITECTURES = (FULLY_CONNECTED, FIXED_SUBARRAY, DYNAMIC_SUBARRAY, FULLY_DIGITAL)

POWER_TOL = 1e-9


@dataclass(frozen=True)
class RfPrecoder:
    """Analog precoder ``F_RF`` (N x N_RF).

    ``partition`` holds one sorted tuple of 0-based antenna indices per RF
    chain for subarray architectures and is ``None`` otherwise.
    """

    matrix: np.ndarray
    architecture: str = FULLY_CONNECTED
    partition: Optional[tuple] = None

    def __post_init__(self):
        if self.architecture not in _ARCHITECTURES:
            raise InvalidInputError(f"unknown RF architecture {self.architecture!r}")
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2:
            raise InvalidInputError(f"RF matrix must be 2-D, got shape {m.shape}")
        object.__setattr__(self, "matrix", m)

    @property
    def num_antennas(self) -> int:
        return self.matrix.shape[0]

    @property
    def num_rf(self) -> int:
        return self.matrix.shape[1]


@dataclass(frozen=True)
class DigitalPrecoder:
    """Baseband precoder ``F_D`` (N_RF x K); column k feeds user k."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2:
            raise InvalidInputError(f"digital precoder must be 2-D, got shape {m.shape}")
        object.__setattr__(self, "matrix", m)


@dataclass(frozen=True)
class HybridPrecoder:
    rf: RfPrecoder
    digital: DigitalPrecoder
    composite: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.rf.num_rf != self.digital.matrix.shape[0]:
            raise InvalidInputError(
                f"RF precoder has {self.rf.num_rf} chains but digital precoder has "
                f"{self.digital.matrix.shape[0]} rows"
            )
        object.__setattr__(self, "composite", self.rf.matrix @ self.digital.matrix)

    @property
    def num_users(self) -> int:
        return self.digital.matrix.shape[1]


@dataclass(frozen=True)
class SnrPoint:
    """Transmit power ``P`` and noise power ``sigma2``; only their ratio matters."""

    transmit_power: float
    noise_power: float

    def __post_init__(self):
        if not (self.transmit_power > 0 and self.noise_power > 0):
            raise InvalidInputError("transmit and noise power must both be strictly positive")

    @classmethod
    def from_db(cls, snr_db: float) -> "SnrPoint":
        """P = 1 and sigma^2 = 10^(-snr_db/10)."""
        return cls(transmit_power=1.0, noise_power=10.0 ** (-snr_db / 10.0))

    @property
    def snr(self) -> float:
        return self.transmit_power / self.noise_power

    @property
    def noise_to_power(self) -> float:
        return self.noise_power / self.transmit_power


def composite_power(rf: RfPrecoder, digital: DigitalPrecoder) -> float:
    """tr(F_RF F_D F_D^H F_RF^H), i.e. the squared Frobenius norm of F."""
    F = rf.matrix @ digital.matrix
    return float(np.real(np.vdot(F, F)))


def normalize_power(rf: RfPrecoder, digital: DigitalPrecoder) -> DigitalPrecoder:
    """Scale ``F_D`` so the composite precoder has unit total power."""
    power = composite_power(rf, digital)
    if not np.isfinite(power) or power <= 0.0:
        raise DegenerateInputError("composite precoder F_RF F_D is zero; cannot normalize power")
    return DigitalPrecoder(digital.matrix / np.sqrt(power))


def make_hybrid(rf: RfPrecoder, digital: DigitalPrecoder, normalize: bool = True) -> HybridPrecoder:
    if normalize:
        digital = normalize_power(rf, digital)
    return HybridPrecoder(rf=rf, digital=digital)


def fully_digital_rf(num_antennas: int) -> RfPrecoder:
    """Identity pass-through so a fully-digital precoder reuses the hybrid code paths."""
    return RfPrecoder(np.eye(num_antennas, dtype=complex), architecture=FULLY_DIGITAL)


def _check_dims(channel: ChannelRealization, precoder: HybridPrecoder):
    if channel.num_antennas != precoder.composite.shape[0]:
        raise InvalidInputError(
            f"channel has {channel.num_antennas} antennas, precoder has {precoder.composite.shape[0]}"
        )
    if channel.num_users != precoder.num_users:
        raise InvalidInputError(
            f"channel has {channel.num_users} users, precoder serves {precoder.num_users}"
        )


def _check_normalized(precoder: HybridPrecoder):
    power = float(np.real(np.vdot(precoder.composite, precoder.composite)))
    if abs(power - 1.0) > POWER_TOL:
        raise ContractViolation(f"precoder is not power-normalized: tr(F F^H) = {power!r}")


def sinr(channel: ChannelRealization, precoder: HybridPrecoder, snr: SnrPoint,
         validate: bool = False) -> np.ndarray:
    """Per-user SINR with the noise term sigma^2/P."""
    _check_dims(channel, precoder)
    if validate:
        _check_normalized(precoder)
    # G[k, l] = h_k^H F_RF f_{D,l}
    G = channel.matrix.conj().T @ precoder.composite
    gains = np.abs(G) ** 2
    signal = np.diag(gains)
    interference = gains.sum(axis=1) - signal
    return signal / (interference + snr.noise_to_power)


def user_se(channel: ChannelRealization, precoder: HybridPrecoder, snr: SnrPoint, user: int,
            validate: bool = False) -> float:
    """Spectral efficiency of ``user`` (0-based) in bits/s/Hz."""
    if not 0 <= user < channel.num_users:
        raise InvalidInputError(f"user index {user} out of range for {channel.num_users} users")
    return float(np.log2(1.0 + sinr(channel, precoder, snr, validate=validate)[user]))


def sum_se(channel: ChannelRealization, precoder: HybridPrecoder, snr: SnrPoint,
           validate: bool = False) -> float:
    return float(np.sum(np.log2(1.0 + sinr(channel, precoder, snr, validate=validate))))


@dataclass
class RfReport:
    """Structural diagnostics of an RF precoder; ``ok`` summarizes them."""

    architecture: str
    unit_modulus_deviation: float
    off_support_max: float = 0.0
    partition_errors: list = field(default_factory=list)
    semi_unitary_deviation: Optional[float] = None
    tolerance: float = 1e-12

    @property
    def ok(self) -> bool:
        return (self.unit_modulus_deviation <= self.tolerance
                and self.off_support_max == 0.0
                and not self.partition_errors)

    def lines(self) -> list:
        out = [f"architecture: {self.architecture}",
               f"max |abs(F_RF) - 1| on support: {self.unit_modulus_deviation:.3e}"]
        if self.architecture in (FIXED_SUBARRAY, DYNAMIC_SUBARRAY):
            out.append(f"max |F_RF| off support: {self.off_support_max:.3e}")
        if self.semi_unitary_deviation is not None:
            out.append(f"||F_RF^H F_RF - N I||_F: {self.semi_unitary_deviation:.3e}")
        out.extend(f"partition: {e}" for e in self.partition_errors)
        out.append("status: " + ("ok" if self.ok else "VIOLATION"))
        return out


def validate_rf(rf: RfPrecoder, tolerance: float = 1e-12) -> RfReport:
    """Check unit modulus on support and, for subarrays, the antenna partition.

    Never raises; problems are reported on the returned ``RfReport``.
    """
    F = rf.matrix
    n, n_rf = F.shape
    mag = np.abs(F)

    if rf.architecture == FULLY_DIGITAL:
        return RfReport(architecture=rf.architecture, unit_modulus_deviation=0.0, tolerance=tolerance)

    if rf.architecture == FULLY_CONNECTED:
        dev = float(np.max(np.abs(mag - 1.0))) if F.size else 0.0
        gram = F.conj().T @ F
        semi = float(np.linalg.norm(gram - n * np.eye(n_rf)))
        return RfReport(architecture=rf.architecture, unit_modulus_deviation=dev,
                        semi_unitary_deviation=semi, tolerance=tolerance)

    errors = []
    support = np.zeros(F.shape, dtype=bool)
    if rf.partition is None:
        errors.append("subarray precoder has no partition")
    elif len(rf.partition) != n_rf:
        errors.append(f"expected {n_rf} subsets, got {len(rf.partition)}")
    else:
        seen = np.zeros(n, dtype=int)
        for r, subset in enumerate(rf.partition):
            idx = np.asarray(subset, dtype=int)
            if idx.size and (idx.min() < 0 or idx.max() >= n):
                errors.append(f"subset {r} has antenna index outside 0..{n - 1}")
                continue
            support[idx, r] = True
            seen[idx] += 1
            if n % n_rf != 0 or idx.size != n // n_rf:
                errors.append(f"subset {r} has size {idx.size}, expected N/N_RF = {n / n_rf:g}")
            if np.unique(idx).size != idx.size:
                errors.append(f"subset {r} repeats an antenna")
        if np.any(seen == 0):
            errors.append(f"antennas not covered: {np.flatnonzero(seen == 0).tolist()}")
        if np.any(seen > 1):
            errors.append(f"antennas shared between subsets: {np.flatnonzero(seen > 1).tolist()}")

    dev = float(np.max(np.abs(mag[support] - 1.0))) if support.any() else 0.0
    off = float(np.max(mag[~support])) if (~support).any() else 0.0
    return RfReport(architecture=rf.architecture, unit_modulus_deviation=dev,
                    off_support_max=off, partition_errors=errors, tolerance=tolerance)
