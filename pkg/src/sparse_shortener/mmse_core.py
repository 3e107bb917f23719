"""Closed-form MMSE shortening under the unit-tap constraint.

The target response ``b`` and equalizer ``w`` minimizing the shortening MSE
have closed forms in the correlation matrices: the optimal unit-tap position
maximizes the diagonal of the inverse error covariance, the optimal target
is the corresponding normalized column of that inverse, and the optimal
equalizer follows from the orthogonality principle.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .signal_model import CorrelationSet, _frozen

__all__ = [
    "Tir",
    "Cse",
    "MseReport",
    "optimal_unit_tap",
    "optimal_tir",
    "tir_mse",
    "optimal_cse",
    "cse_mse",
    "shortening_snr",
    "loss_budget",
    "default_unit_tap",
]


@dataclass(frozen=True)
class Tir:
    """Target impulse response with a unit tap pinned at ``unit_index``."""

    coeffs: np.ndarray
    unit_index: int
    support: tuple[int, ...]

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.complex128)
        if not (0 <= self.unit_index < c.size):
            raise ValueError(f"unit_index {self.unit_index} out of range for {c.size}")
        if c[self.unit_index] != 1.0:
            raise ValueError("coefficient at unit_index must be exactly 1")
        object.__setattr__(self, "coeffs", _frozen(c))
        object.__setattr__(self, "support", tuple(sorted(self.support)))

    @classmethod
    def from_coeffs(cls, coeffs: np.ndarray, unit_index: int) -> "Tir":
        coeffs = np.asarray(coeffs, dtype=np.complex128)
        support = tuple(int(i) for i in np.nonzero(coeffs)[0])
        return cls(coeffs=coeffs, unit_index=unit_index, support=support)


@dataclass(frozen=True)
class Cse:
    """Shortening equalizer taps; ``support`` lists the nonzero positions."""

    coeffs: np.ndarray
    support: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(
            self, "coeffs", _frozen(np.asarray(self.coeffs, dtype=np.complex128))
        )
        object.__setattr__(self, "support", tuple(sorted(self.support)))

    @classmethod
    def from_coeffs(cls, coeffs: np.ndarray) -> "Cse":
        coeffs = np.asarray(coeffs, dtype=np.complex128)
        support = tuple(int(i) for i in np.nonzero(coeffs)[0])
        return cls(coeffs=coeffs, support=support)


@dataclass(frozen=True)
class MseReport:
    """Total MSE split into its floor and the equalizer excess."""

    xi_total: float
    xi_min: float
    xi_excess: float


def _rdelta_inv_diag(corr: CorrelationSet) -> np.ndarray:
    # Full diagonal of the inverse is needed, so solve against the identity.
    cho = sla.cho_factor(corr.r_delta, lower=True, check_finite=False)
    inv = sla.cho_solve(cho, np.eye(corr.n, dtype=np.complex128), check_finite=False)
    return np.real(np.diag(inv))


def optimal_unit_tap(corr: CorrelationSet) -> tuple[int, float]:
    """Best unit-tap index and the minimum MSE it achieves.

    Ties break to the smallest index, so the result is deterministic.
    """
    diag = _rdelta_inv_diag(corr)
    i_opt = int(np.argmax(diag))
    return i_opt, 1.0 / diag[i_opt]


def default_unit_tap(corr: CorrelationSet) -> int:
    """Mid-span placement, a near-optimal default when the scan is skipped."""
    return corr.n // 2


def optimal_tir(corr: CorrelationSet, i: int) -> Tir:
    """Dense MSE-optimal target response with the unit tap at index ``i``."""
    if not (0 <= i < corr.n):
        raise IndexError(f"unit-tap index {i} out of range for n={corr.n}")
    e_i = np.zeros(corr.n, dtype=np.complex128)
    e_i[i] = 1.0
    cho = sla.cho_factor(corr.r_delta, lower=True, check_finite=False)
    col = sla.cho_solve(cho, e_i, check_finite=False)
    coeffs = col / col[i]
    coeffs[i] = 1.0
    return Tir.from_coeffs(coeffs, unit_index=i)


def tir_mse(corr: CorrelationSet, b: Tir) -> float:
    """Shortening MSE of a target response under the optimal equalizer."""
    c = b.coeffs
    if c.size != corr.n:
        raise ValueError(f"target length {c.size} does not match n={corr.n}")
    return float(np.real(c.conj() @ (corr.r_delta @ c)))


def optimal_cse(corr: CorrelationSet, b: Tir) -> Cse:
    """MMSE equalizer for a fixed target response."""
    t = corr.r_yx @ b.coeffs
    cho = sla.cho_factor(corr.r_yy, lower=True, check_finite=False)
    w = sla.cho_solve(cho, t, check_finite=False)
    return Cse.from_coeffs(w)


def cse_mse(corr: CorrelationSet, w: Cse, b: Tir) -> MseReport:
    """Evaluate the MSE of an equalizer/target pair and its decomposition.

    ``xi_total`` comes from the full quadratic form, ``xi_min`` from the
    target alone, and ``xi_excess`` from the distance to the optimal
    equalizer; the three are computed independently so the identity
    ``xi_total = xi_min + xi_excess`` stays a meaningful check.
    """
    wc = w.coeffs
    bc = b.coeffs
    if wc.size != corr.n_f or bc.size != corr.n:
        raise ValueError("equalizer or target length mismatch")
    t = corr.r_yx @ bc
    xi_total = float(
        np.real(
            wc.conj() @ (corr.r_yy @ wc)
            - wc.conj() @ t
            - t.conj() @ wc
            + bc.conj() @ bc
        )
    )
    xi_min = float(np.real(bc.conj() @ (corr.r_delta @ bc)))
    cho = sla.cho_factor(corr.r_yy, lower=True, check_finite=False)
    dw = wc - sla.cho_solve(cho, t, check_finite=False)
    xi_excess = float(np.real(dw.conj() @ (corr.r_yy @ dw)))
    return MseReport(xi_total=xi_total, xi_min=xi_min, xi_excess=xi_excess)


def shortening_snr(corr: CorrelationSet, w: Cse, b: Tir) -> float:
    """Shortening SNR in dB, the monotone transform -10 log10 of the MSE."""
    xi = cse_mse(corr, w, b).xi_total
    if xi <= 0.0:
        raise ValueError(f"MSE must be positive to express an SNR, got {xi}")
    return -10.0 * np.log10(xi)


def loss_budget(eta_max_db: float, xi_min: float) -> float:
    """Excess-MSE budget that caps the shortening-SNR loss at ``eta_max_db``.

    Any equalizer whose excess MSE stays within the returned budget realizes
    a loss of at most ``eta_max_db`` relative to the optimal equalizer for
    the same target.
    """
    if eta_max_db < 0.0:
        raise ValueError(f"eta_max_db must be >= 0, got {eta_max_db}")
    if xi_min <= 0.0:
        raise ValueError(f"xi_min must be > 0, got {xi_min}")
    return xi_min * (10.0 ** (eta_max_db / 10.0) - 1.0)
