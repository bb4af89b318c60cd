"""
Baseband precoding on the effective channel ``H_eff = F_RF^H H``.

The digital precoder is parametrized as ``F_D = H_eff W`` with a K x K
combiner ``W``, so every update below works on K x K matrices:

* ``A = H_eff^H H_eff``, whose k-th column is ``g_k``; the signal user k
  receives from stream j is ``g_k^H w_j = (A W)[k, j]``.
* ``B = H_eff^H F_RF^H F_RF H_eff``, so that the composite transmit power is
  ``tr(W^H B W)``.  For a fully-digital precoder ``B = A``.

Because the noise enters the MSE as ``sigma^2/P * tr(W^H B W)``, the
iteration optimizes the power-normalized sum rate and its output only needs
a final rescaling.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelRealization
from .errors import DegenerateInputError, InvalidInputError
from .precoding import (
    DigitalPrecoder,
    HybridPrecoder,
    RfPrecoder,
    SnrPoint,
    fully_digital_rf,
    make_hybrid,
)

__all__ = [
    "EffectiveChannel",
    "WmmseState",
    "effective_channel",
    "zf_precoder",
    "zf_combiner",
    "initial_combiner",
    "combiner_sum_se",
    "r_wmmse",
    "design_digital",
    "fully_digital_wmmse",
    "T_MAX",
    "EPSILON",
]

logger = logging.getLogger(__name__)

T_MAX = 30
EPSILON = 0.01
ZF_MAX_CONDITION = 1e12


@dataclass(frozen=True)
class EffectiveChannel:
    """Channel seen by the baseband stage.

    Attributes
    ----------
    matrix : ndarray, shape (N_RF, K)
        ``F_RF^H H``.
    gram : ndarray, shape (K, K)
        ``matrix^H matrix``; column k is ``g_k``.
    power_gram : ndarray, shape (K, K)
        ``matrix^H F_RF^H F_RF matrix``, the quadratic form of the composite
        transmit power in the combiner.
    """

    matrix: np.ndarray
    gram: np.ndarray
    power_gram: np.ndarray

    @property
    def num_users(self) -> int:
        return self.matrix.shape[1]


@dataclass
class WmmseState:
    receive_scalars: np.ndarray
    weights: np.ndarray
    combiner: np.ndarray
    iterations: int
    objective_trace: list = field(default_factory=list)
    converged: bool = False
    last_change: float = float("inf")


def _hermitize(M):
    return 0.5 * (M + M.conj().T)


def effective_channel(rf: RfPrecoder, channel: ChannelRealization) -> EffectiveChannel:
    F = rf.matrix
    H = channel.matrix
    if F.shape[0] != H.shape[0]:
        raise InvalidInputError(
            f"RF precoder has {F.shape[0]} antennas but the channel has {H.shape[0]}"
        )
    H_eff = F.conj().T @ H
    gram = _hermitize(H_eff.conj().T @ H_eff)
    FH = F @ H_eff
    power_gram = _hermitize(FH.conj().T @ FH)
    return EffectiveChannel(matrix=H_eff, gram=gram, power_gram=power_gram)


def _composite_column_power(eff: EffectiveChannel, W: np.ndarray) -> np.ndarray:
    return np.real(np.einsum("ik,ij,jk->k", W.conj(), eff.power_gram, W))


def zf_combiner(eff: EffectiveChannel) -> np.ndarray:
    """Combiner ``A^{-1} D`` with ``D`` equalizing per-user composite power.

    Total composite power is one.
    """
    A = eff.gram
    cond = np.linalg.cond(A)
    if not np.isfinite(cond) or cond >= ZF_MAX_CONDITION:
        raise DegenerateInputError(f"effective channel Gram is near-singular (condition number {cond:.3e})")
    W = np.linalg.solve(A, np.eye(A.shape[0], dtype=complex))
    W = W / np.sqrt(_composite_column_power(eff, W))[None, :]
    return W / np.sqrt(W.shape[1])


def zf_precoder(eff: EffectiveChannel) -> DigitalPrecoder:
    """Zero-forcing ``F_D = H_eff (H_eff^H H_eff)^{-1} D`` with equal per-user power."""
    return DigitalPrecoder(eff.matrix @ zf_combiner(eff))


def initial_combiner(eff: EffectiveChannel) -> np.ndarray:
    """ZF combiner, or the matched filter (``W = I`` scaled) when ZF is degenerate."""
    try:
        return zf_combiner(eff)
    except DegenerateInputError:
        logger.debug("ZF initialization degenerate; falling back to matched filter")
        W = np.eye(eff.num_users, dtype=complex)
        power = float(np.sum(_composite_column_power(eff, W)))
        if power <= 0:
            raise
        return W / np.sqrt(power)


def combiner_sum_se(eff: EffectiveChannel, W: np.ndarray, snr: SnrPoint) -> float:
    """Sum SE of ``F_D = H_eff W`` after power normalization."""
    AW = eff.gram @ W
    gains = np.abs(AW) ** 2
    signal = np.diag(gains)
    noise = snr.noise_to_power * float(np.real(np.trace(W.conj().T @ eff.power_gram @ W)))
    return float(np.sum(np.log2(1.0 + signal / (gains.sum(axis=1) - signal + noise))))


def _solve(M, rhs):
    try:
        X = np.linalg.solve(M, rhs)
        if np.all(np.isfinite(X)):
            return X
    except np.linalg.LinAlgError:
        pass
    load = 1e-12 * float(np.real(np.trace(M))) / M.shape[0]
    logger.debug("singular WMMSE update matrix; retrying with diagonal loading %.3e", load)
    try:
        X = np.linalg.solve(M + load * np.eye(M.shape[0]), rhs)
    except np.linalg.LinAlgError as exc:
        raise DegenerateInputError("WMMSE update matrix is singular even after diagonal loading") from exc
    if not np.all(np.isfinite(X)):
        raise DegenerateInputError("WMMSE update produced non-finite values")
    return X


def r_wmmse(eff: EffectiveChannel, snr: SnrPoint, init: np.ndarray,
            t_max: int = T_MAX, epsilon: float = EPSILON):
    """Reduced-dimension WMMSE on the K x K combiner.

    Each round updates the receive scalars ``u``, then the MSE weights
    ``lambda``, then the combiner ``W``.  Iteration stops once
    ``||W_t - W_{t-1}||_F / ||W_{t-1}||_F <= epsilon`` or after ``t_max``
    rounds.

    Parameters
    ----------
    eff : EffectiveChannel
    snr : SnrPoint
    init : ndarray, shape (K, K)
        Starting combiner; any nonzero scaling works.
    t_max : int
    epsilon : float

    Returns
    -------
    digital : DigitalPrecoder
        ``H_eff W``, not power-normalized.
    state : WmmseState
        Final variables; ``objective_trace[t]`` is the normalized sum SE
        after round ``t`` (entry 0 is the initial point).
    """
    W = np.array(init, dtype=complex)
    k = eff.num_users
    if W.shape != (k, k):
        raise InvalidInputError(f"initial combiner must be {k}x{k}, got {W.shape}")
    if not np.any(W):
        raise InvalidInputError("initial combiner is zero")
    if t_max < 1 or not epsilon > 0:
        raise InvalidInputError("need t_max >= 1 and epsilon > 0")

    A, B = eff.gram, eff.power_gram
    rho = snr.noise_to_power
    tiny = np.finfo(float).tiny
    u = np.zeros(k, dtype=complex)
    lam = np.ones(k)
    trace = [combiner_sum_se(eff, W, snr)]
    change = float("inf")
    t = 0
    while t < t_max:
        AW = A @ W
        noise = rho * float(np.real(np.trace(W.conj().T @ B @ W)))
        useful = np.diag(AW)
        u = useful / (np.sum(np.abs(AW) ** 2, axis=1) + noise)
        mse = 1.0 - np.real(np.conj(u) * useful)
        lam = 1.0 / np.maximum(mse, tiny)

        c = np.abs(u) ** 2 * lam
        M = rho * float(np.sum(c)) * B + (A * c[None, :]) @ A.conj().T
        W_new = _solve(_hermitize(M), A * (u * lam)[None, :])

        change = float(np.linalg.norm(W_new - W) / np.linalg.norm(W))
        W = W_new
        t += 1
        trace.append(combiner_sum_se(eff, W, snr))
        if change <= epsilon:
            break

    state = WmmseState(receive_scalars=u, weights=lam, combiner=W, iterations=t,
                       objective_trace=trace, converged=change <= epsilon, last_change=change)
    return DigitalPrecoder(eff.matrix @ W), state


def design_digital(rf: RfPrecoder, channel: ChannelRealization, snr: SnrPoint,
                   t_max: int = T_MAX, epsilon: float = EPSILON, return_state: bool = False):
    """Effective channel, ZF-initialized R-WMMSE, then power normalization."""
    eff = effective_channel(rf, channel)
    digital, state = r_wmmse(eff, snr, initial_combiner(eff), t_max=t_max, epsilon=epsilon)
    precoder = make_hybrid(rf, digital)
    if return_state:
        return precoder, state
    return precoder


def fully_digital_wmmse(channel: ChannelRealization, snr: SnrPoint, t_max: int = T_MAX,
                        epsilon: float = EPSILON, return_state: bool = False):
    """Fully-digital WMMSE (``F_RF = I``); the sum-SE reference for hybrids."""
    return design_digital(fully_digital_rf(channel.num_antennas), channel, snr,
                          t_max=t_max, epsilon=epsilon, return_state=return_state)
