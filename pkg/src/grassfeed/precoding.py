"""Multiuser precoding and instantaneous rates.

The downlink has M transmit antennas and K = M/N users with N antennas
each, y_k = H_k^H x + n_k. Power P is split uniformly over the M transmit
streams. Block diagonalization sends user k through an orthonormal basis of
the left nullspace of the stacked other-user channel knowledge; zero
forcing treats every receive antenna as its own user and beams orthogonally
to all other M - 1 known columns.

Rates are evaluated as the difference of two log-dets,

    R_k = log2 det(I + c sum_j G_j G_j^H) - log2 det(I + c sum_{j!=k} ...)

with G_j = H_k^H V_j and c = P/M. When the precoders were built from
perfect knowledge the interference term vanishes and the expression reduces
to a single log-det; with quantized or analog knowledge the residual
interference is what produces the rate loss studied here.
"""

import math
from dataclasses import dataclass

import numpy as np

from .ensembles import as_generator, gaussian_matrix
from .errors import DimensionError, ParameterError
from .linalg import (
    left_nullspace_basis,
    left_nullspace_basis_batch,
    logdet_hermitian,
    logdet_hermitian_batch,
)

__all__ = [
    "SystemConfig",
    "PrecoderSet",
    "AnalogObservation",
    "bd_precoders",
    "zf_precoders",
    "instant_rate_per_user",
    "analog_feedback",
    "rate_loss_bound",
    "analog_rate_loss_bound",
    "analog_rate_loss_limit",
]


@dataclass(frozen=True)
class SystemConfig:
    """Downlink shape: M transmit antennas, N per user, power P.

    The antenna budget is fully loaded: K = M/N users exactly, K >= 2.
    """

    m: int
    n: int
    p: float

    def __post_init__(self):
        if self.n < 1 or self.m < 2 * self.n:
            raise ParameterError(f"need 1 <= N <= M/2, got M={self.m}, N={self.n}")
        if self.m % self.n != 0:
            raise ParameterError(f"M must be a multiple of N, got M={self.m}, N={self.n}")
        if not self.p > 0:
            raise ParameterError(f"power must be positive, got {self.p}")

    @property
    def k(self):
        return self.m // self.n


@dataclass(frozen=True)
class PrecoderSet:
    """K precoding matrices of shape (M, N), one per user.

    scheme is "bd" (orthonormal per-user blocks) or "zf" (unit-norm
    per-antenna beams, not mutually orthogonal within a block).
    """

    matrices: np.ndarray
    scheme: str

    def __post_init__(self):
        m = np.asarray(self.matrices, dtype=np.complex128)
        if m.ndim != 3:
            raise DimensionError(f"matrices must be (K, M, N), got {m.shape}")
        if self.scheme not in ("bd", "zf"):
            raise ParameterError(f"scheme must be 'bd' or 'zf', got {self.scheme!r}")
        object.__setattr__(self, "matrices", m)


def _knowledge_stack(cfg, knowledge):
    k = np.asarray(knowledge, dtype=np.complex128)
    if k.shape != (cfg.k, cfg.m, cfg.n):
        raise DimensionError(
            f"knowledge must be K={cfg.k} matrices of shape ({cfg.m}, {cfg.n}), got {k.shape}"
        )
    return k


def bd_precoders(cfg, knowledge):
    """Block-diagonalization precoders from per-user channel knowledge.

    V_k is an orthonormal basis of the left nullspace of the other users'
    stacked knowledge matrices, so knowledge_j^H V_k = 0 for j != k. Any
    basis gives the same rates (only V_k V_k^H enters them).
    """
    know = _knowledge_stack(cfg, knowledge)
    mats = np.empty_like(know)
    for k in range(cfg.k):
        others = np.concatenate([know[j] for j in range(cfg.k) if j != k], axis=1)
        mats[k] = left_nullspace_basis(others)
    return PrecoderSet(matrices=mats, scheme="bd")


def zf_precoders(cfg, knowledge):
    """Zero-forcing beams from per-antenna channel knowledge.

    The M knowledge columns are treated as M single-antenna users; beam
    (k, i) is the unit vector orthogonal to all other M - 1 columns,
    grouped N per user.
    """
    know = _knowledge_stack(cfg, knowledge)
    cols = np.concatenate([know[k] for k in range(cfg.k)], axis=1)  # (M, K*N)
    mats = np.empty((cfg.k, cfg.m, cfg.n), dtype=np.complex128)
    for j in range(cfg.m):
        others = np.delete(cols, j, axis=1)
        beam = left_nullspace_basis(others)
        mats[j // cfg.n, :, j % cfg.n] = beam[:, 0]
    return PrecoderSet(matrices=mats, scheme="zf")


def instant_rate_per_user(cfg, h_k, precoders, k):
    """Instantaneous rate of user k under a full precoder set.

    Treats user k's N receive antennas jointly; power P/M per stream.
    """
    h_k = np.asarray(h_k, dtype=np.complex128)
    if h_k.shape != (cfg.m, cfg.n):
        raise DimensionError(f"channel must be ({cfg.m}, {cfg.n}), got {h_k.shape}")
    mats = precoders.matrices
    if mats.shape[0] != cfg.k:
        raise DimensionError(f"precoder set has {mats.shape[0]} users, config says {cfg.k}")
    if not 0 <= k < cfg.k:
        raise ParameterError(f"user index {k} out of range 0..{cfg.k - 1}")
    c = cfg.p / cfg.m
    eye = np.eye(cfg.n)
    full = eye.astype(np.complex128).copy()
    intf = eye.astype(np.complex128).copy()
    for j in range(cfg.k):
        g = h_k.conj().T @ mats[j]
        term = c * (g @ g.conj().T)
        full += term
        if j != k:
            intf += term
    return logdet_hermitian(full) - logdet_hermitian(intf)


@dataclass(frozen=True)
class AnalogObservation:
    """Unquantized feedback of one user's channel.

    received = sqrt(beta P) H + W with unit-variance complex Gaussian W;
    estimate is the MMSE reconstruction sqrt(beta P)/(1 + beta P) received;
    residual F = sqrt(1 + beta P) (H - estimate) has unit-variance entries,
    exposed for the moment tests.
    """

    beta: float
    received: np.ndarray
    estimate: np.ndarray
    residual: np.ndarray


def analog_feedback(rng, cfg, h_k, beta):
    """Observe a channel through beta M uses of an AWGN feedback link."""
    if not beta > 0:
        raise ParameterError(f"beta must be positive, got {beta}")
    h_k = np.asarray(h_k, dtype=np.complex128)
    if h_k.shape != (cfg.m, cfg.n):
        raise DimensionError(f"channel must be ({cfg.m}, {cfg.n}), got {h_k.shape}")
    gen = as_generator(rng)
    snr = beta * cfg.p
    noise = gaussian_matrix(gen, cfg.m, cfg.n)
    received = math.sqrt(snr) * h_k + noise
    estimate = math.sqrt(snr) / (1.0 + snr) * received
    residual = math.sqrt(1.0 + snr) * (h_k - estimate)
    return AnalogObservation(beta=float(beta), received=received, estimate=estimate, residual=residual)


def rate_loss_bound(cfg, distortion):
    """Per-user rate loss bound under quantized feedback.

    N log2(1 + (P/N) D) with D the expected quantization distortion
    E[min d^2].
    """
    if distortion < 0:
        raise ParameterError(f"distortion must be >= 0, got {distortion}")
    return cfg.n * math.log2(1.0 + cfg.p / cfg.n * distortion)


def analog_rate_loss_bound(cfg, beta):
    """Per-user rate loss bound under analog feedback at finite power.

    N log2(1 + ((M-N)/M) P / (1 + beta P)).
    """
    if not beta > 0:
        raise ParameterError(f"beta must be positive, got {beta}")
    frac = (cfg.m - cfg.n) / cfg.m
    return cfg.n * math.log2(1.0 + frac * cfg.p / (1.0 + beta * cfg.p))

def analog_rate_loss_limit(m, n, beta):
    """High-power limit of the analog bound: N log2(1 + ((M-N)/M)/beta)."""
    if not beta > 0:
        raise ParameterError(f"beta must be positive, got {beta}")
    return n * math.log2(1.0 + (m - n) / m / beta)


def bd_precoders_batch(knowledge):
    """Batched BD precoders for a (T, K, M, N) knowledge stack. Internal."""
    t, k, m, n = knowledge.shape
    mats = np.empty_like(knowledge)
    for kk in range(k):
        others = np.concatenate(
            [knowledge[:, j] for j in range(k) if j != kk], axis=2
        )
        mats[:, kk] = left_nullspace_basis_batch(others)
    return mats


def zf_precoders_batch(knowledge):
    """Batched ZF beams for a (T, K, M, N) knowledge stack. Internal."""
    t, k, m, n = knowledge.shape
    cols = np.concatenate([knowledge[:, j] for j in range(k)], axis=2)  # (T, M, M)
    mats = np.empty((t, k, m, n), dtype=knowledge.dtype)
    for j in range(m):
        others = np.delete(cols, j, axis=2)
        mats[:, j // n, :, j % n] = left_nullspace_basis_batch(others)[:, :, 0]
    return mats


def rates_batch(p, channels, precoders):
    """Per-user rates for a (T, K, M, N) channel and precoder stack. Internal."""
    t, k, m, n = channels.shape
    c = p / m
    g = np.einsum("tkmn,tjmp->tkjnp", channels.conj(), precoders)
    gram = np.einsum("tkjnp,tkjqp->tkjnq", g, g.conj())
    eye = np.eye(n)
    total = eye + c * gram.sum(axis=2)
    diag = c * gram[:, np.arange(k), np.arange(k)]
    full = logdet_hermitian_batch(total)
    intf = logdet_hermitian_batch(total - diag)
    return full - intf
