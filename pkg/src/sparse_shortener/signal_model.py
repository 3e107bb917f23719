"""Channels, convolution matrices and exact second-order statistics.

Everything downstream (closed-form designs, sparse approximation problems,
coherence profiles, experiments) consumes the correlation matrices built
here.  Input symbols and additive noise are white, so their correlation
matrices are never materialized: the identity and the scaled identity are
hard-coded into the formulas.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

__all__ = [
    "Cir",
    "NoiseSpec",
    "ChannelMatrix",
    "CorrelationSet",
    "generate_updp_cir",
    "build_channel_matrix",
    "build_correlations",
]


def _frozen(a: np.ndarray) -> np.ndarray:
    """Return a C-contiguous read-only copy, so dataclass values stay immutable."""
    out = np.ascontiguousarray(a)
    if out is a:
        out = a.copy()
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Cir:
    """Complex channel impulse response with ``memory + 1`` taps."""

    taps: np.ndarray
    memory: int

    def __post_init__(self):
        taps = np.asarray(self.taps, dtype=np.complex128)
        if self.memory < 0:
            raise ValueError(f"memory must be >= 0, got {self.memory}")
        if taps.ndim != 1 or taps.size != self.memory + 1:
            raise ValueError(
                f"expected {self.memory + 1} taps, got shape {taps.shape}"
            )
        object.__setattr__(self, "taps", _frozen(taps))

    @property
    def energy(self) -> float:
        return float(np.sum(np.abs(self.taps) ** 2))


@dataclass(frozen=True)
class NoiseSpec:
    """White-noise level as a linear SNR; ``sigma2`` is the noise variance."""

    snr: float

    def __post_init__(self):
        if not (self.snr > 0.0 and np.isfinite(self.snr)):
            raise ValueError(f"snr must be a positive finite ratio, got {self.snr}")

    @property
    def sigma2(self) -> float:
        return 1.0 / self.snr

    @classmethod
    def from_db(cls, snr_db: float) -> "NoiseSpec":
        """Public interfaces quote SNR in dB; conversion happens here."""
        return cls(snr=10.0 ** (snr_db / 10.0))


@dataclass(frozen=True)
class ChannelMatrix:
    """Banded Toeplitz convolution matrix of shape ``n_f x (n_f + memory)``.

    Entry ``(r, c)`` equals ``taps[c - r]`` when ``0 <= c - r <= memory``
    and zero otherwise, i.e. the first row is the tap vector followed by
    zeros and every later row shifts it one column right.
    """

    h_matrix: np.ndarray
    n_f: int

    def __post_init__(self):
        m = np.asarray(self.h_matrix, dtype=np.complex128)
        if m.shape[0] != self.n_f or m.shape[1] < m.shape[0]:
            raise ValueError(f"bad channel matrix shape {m.shape} for n_f={self.n_f}")
        object.__setattr__(self, "h_matrix", _frozen(m))

    @property
    def memory(self) -> int:
        return self.h_matrix.shape[1] - self.n_f


@dataclass(frozen=True)
class CorrelationSet:
    """Output autocorrelation, output-input cross-correlation and the
    error covariance whose quadratic form gives the target-response MSE."""

    r_yy: np.ndarray
    r_yx: np.ndarray
    r_delta: np.ndarray
    n: int = field(default=0)

    def __post_init__(self):
        r_yy = np.asarray(self.r_yy, dtype=np.complex128)
        r_yx = np.asarray(self.r_yx, dtype=np.complex128)
        r_delta = np.asarray(self.r_delta, dtype=np.complex128)
        n = r_yx.shape[1]
        if r_yy.shape != (r_yx.shape[0], r_yx.shape[0]):
            raise ValueError("r_yy does not conform with r_yx")
        if r_delta.shape != (n, n):
            raise ValueError("r_delta does not conform with r_yx")
        object.__setattr__(self, "r_yy", _frozen(r_yy))
        object.__setattr__(self, "r_yx", _frozen(r_yx))
        object.__setattr__(self, "r_delta", _frozen(r_delta))
        object.__setattr__(self, "n", n)

    @property
    def n_f(self) -> int:
        return self.r_yy.shape[0]


def generate_updp_cir(v: int, rng: np.random.Generator) -> Cir:
    """Draw a unit-energy uniform power-delay-profile channel of memory ``v``.

    The ``v + 1`` taps are i.i.d. circular complex Gaussian draws scaled to
    unit total energy, so the result is deterministic given the generator
    state.
    """
    if v < 0:
        raise ValueError(f"v must be >= 0, got {v}")
    taps = (rng.standard_normal(v + 1) + 1j * rng.standard_normal(v + 1)) / np.sqrt(2.0)
    taps /= np.linalg.norm(taps)
    return Cir(taps=taps, memory=v)


def build_channel_matrix(cir: Cir, n_f: int) -> ChannelMatrix:
    """Assemble the banded Toeplitz matrix mapping an input block through the channel."""
    if n_f < 1:
        raise ValueError(f"n_f must be >= 1, got {n_f}")
    v = cir.memory
    h = np.zeros((n_f, n_f + v), dtype=np.complex128)
    rows = np.arange(n_f)
    for lag in range(v + 1):
        h[rows, rows + lag] = cir.taps[lag]
    return ChannelMatrix(h_matrix=h, n_f=n_f)


def build_correlations(channel: ChannelMatrix, noise: NoiseSpec) -> CorrelationSet:
    """Exact second-order statistics for a channel and noise level.

    r_yy = H H^H + sigma2 I   (Hermitian positive definite)
    r_yx = H                  (white unit-power input)
    r_delta = I - H^H r_yy^{-1} H

    r_delta is produced by a Hermitian solve rather than an explicit
    inverse; the algebraically equivalent (I + H^H H / sigma2)^{-1} form is
    reserved for cross-checks.
    """
    h = channel.h_matrix
    n_f, n = h.shape
    r_yy = h @ h.conj().T + noise.sigma2 * np.eye(n_f)
    r_yy = 0.5 * (r_yy + r_yy.conj().T)
    try:
        cho = sla.cho_factor(r_yy, lower=True, check_finite=False)
    except sla.LinAlgError as exc:  # unreachable for sigma2 > 0, keep the guard
        raise ValueError("r_yy is numerically singular") from exc
    r_delta = np.eye(n, dtype=np.complex128) - h.conj().T @ sla.cho_solve(
        cho, h, check_finite=False
    )
    r_delta = 0.5 * (r_delta + r_delta.conj().T)
    return CorrelationSet(r_yy=r_yy, r_yx=h.copy(), r_delta=r_delta)
