"""Square-root factors of the correlation matrices.

Exact factors come from Cholesky, unit-triangular LDL and eigenvalue
decompositions.  The fast alternative replaces each Toeplitz (or
near-Toeplitz) correlation matrix with the circulant matrix sharing its
banded autocorrelation, which the DFT diagonalizes; applying that matrix or
its inverse then costs O(M log M) via the FFT instead of a dense solve.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .signal_model import Cir, NoiseSpec, _frozen

__all__ = [
    "FactorizationError",
    "SqrtFactor",
    "CirculantSpectrum",
    "cholesky_factor",
    "ldl_factor",
    "eigen_factor",
    "circulant_ryy_spectrum",
    "circulant_rdelta_spectrum",
    "circulant_apply",
    "circulant_apply_inverse",
    "circulant_dense",
    "circulant_factor",
]

FACTOR_KINDS = ("cholesky_lower", "ldl_unitriangular", "eigen", "circulant")

# Relative threshold separating roundoff from genuinely indefinite input.
_EIG_CLAMP_REL = 1e-12


class FactorizationError(ValueError):
    """Raised when a matrix fails the positivity its factorization requires."""


@dataclass(frozen=True)
class SqrtFactor:
    """A matrix ``B`` with ``M = B B^H``, plus how it was obtained.

    kind:
      cholesky_lower     B is lower triangular with positive real diagonal.
      ldl_unitriangular  B = P sqrt(S) for unit-lower-triangular P, diagonal S > 0.
      eigen              B = U sqrt(D), columns of U orthonormal, D sorted descending.
      circulant          B = (1/sqrt(M)) F^H sqrt(L) for the DFT matrix F.
    """

    b_matrix: np.ndarray
    kind: str
    source: str = ""

    def __post_init__(self):
        if self.kind not in FACTOR_KINDS:
            raise ValueError(f"unknown factor kind {self.kind!r}")
        object.__setattr__(
            self, "b_matrix", _frozen(np.asarray(self.b_matrix, dtype=np.complex128))
        )

    def reconstruct(self) -> np.ndarray:
        return self.b_matrix @ self.b_matrix.conj().T


@dataclass(frozen=True)
class CirculantSpectrum:
    """Eigenvalues of the circulant stand-in for a correlation matrix.

    Entry ``k`` is paired with DFT bin ``k`` of the matrix's own
    diagonalization ``C = F^H diag(eigenvalues) F / length``.  For the
    Hermitian Toeplitz targets here that pairing corresponds to the DFT of
    the conjugate channel (the plain channel DFT lists the same values in
    mirrored bin order).
    """

    length: int
    eigenvalues: np.ndarray
    source: str = ""

    def __post_init__(self):
        lam = np.asarray(self.eigenvalues, dtype=np.float64)
        if lam.ndim != 1 or lam.size != self.length:
            raise ValueError("eigenvalues must be a vector matching length")
        if np.any(lam < 0.0):
            raise FactorizationError("circulant spectrum has negative entries")
        object.__setattr__(self, "eigenvalues", _frozen(lam))


def _as_square(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    return m


def cholesky_factor(m: np.ndarray, source: str = "") -> SqrtFactor:
    """Lower Cholesky factor of a Hermitian positive definite matrix."""
    m = _as_square(m)
    try:
        low = sla.cholesky(m, lower=True, check_finite=False)
    except sla.LinAlgError as exc:
        raise FactorizationError("matrix is not positive definite") from exc
    return SqrtFactor(b_matrix=low, kind="cholesky_lower", source=source)


def ldl_factor(m: np.ndarray, source: str = "") -> SqrtFactor:
    """Unit-triangular LDL-style factor ``B = P sqrt(S)``.

    For positive definite input this equals the Cholesky factor after
    rescaling its columns, which avoids the symmetric-pivoting machinery a
    general indefinite LDL would need.
    """
    low = cholesky_factor(m, source=source).b_matrix
    # P = low / diag(low) is unit triangular and S = diag(low)^2, so
    # P sqrt(S) reproduces low exactly; materialize it that way to pin the
    # advertised structure.
    d = np.real(np.diag(low)).copy()
    p = low / d[np.newaxis, :]
    b = p * d[np.newaxis, :]
    return SqrtFactor(b_matrix=b, kind="ldl_unitriangular", source=source)


def eigen_factor(m: np.ndarray, source: str = "") -> SqrtFactor:
    """Factor ``B = U sqrt(D)`` from the eigendecomposition of a Hermitian PSD matrix.

    Eigenvalues are sorted descending.  Values in ``[-tol, 0)`` relative to
    the largest eigenvalue are clamped to zero; anything more negative is an
    error rather than a clamp.
    """
    m = _as_square(m)
    w, u = np.linalg.eigh(m)
    order = np.argsort(-w, kind="stable")
    w = w[order]
    u = u[:, order]
    scale = max(w[0], 0.0) if w.size else 0.0
    tol = _EIG_CLAMP_REL * max(scale, 1.0)
    if np.any(w < -tol):
        raise FactorizationError(
            f"matrix is indefinite: eigenvalue {w.min():.3e} below -{tol:.3e}"
        )
    w = np.maximum(w, 0.0)
    return SqrtFactor(b_matrix=u * np.sqrt(w)[np.newaxis, :], kind="eigen", source=source)


def _conjugate_spectrum(cir: Cir, length: int) -> np.ndarray:
    """Power spectrum of the channel in the bin order its circulant uses."""
    return np.abs(np.fft.fft(np.conj(cir.taps), length)) ** 2


def circulant_ryy_spectrum(cir: Cir, n_f: int, noise: NoiseSpec) -> CirculantSpectrum:
    """Circulant eigenvalues approximating the output autocorrelation.

    The DFT length is ``n_f`` and every eigenvalue is a channel power-sample
    plus the noise variance, hence bounded below by it.
    """
    if n_f < cir.memory + 1:
        raise ValueError(
            f"n_f={n_f} too small, the {cir.memory + 1}-tap channel must fit"
        )
    lam = _conjugate_spectrum(cir, n_f) + noise.sigma2
    return CirculantSpectrum(length=n_f, eigenvalues=lam, source="r_yy")


def circulant_rdelta_spectrum(cir: Cir, n_f: int, noise: NoiseSpec) -> CirculantSpectrum:
    """Circulant eigenvalues approximating the error covariance.

    The DFT length is ``n_f + memory`` and each eigenvalue simplifies to
    sigma2 / (power-sample + sigma2), which lies in (0, 1].
    """
    if n_f < cir.memory + 1:
        raise ValueError(
            f"n_f={n_f} too small, the {cir.memory + 1}-tap channel must fit"
        )
    n = n_f + cir.memory
    s2 = noise.sigma2
    lam = s2 / (_conjugate_spectrum(cir, n) + s2)
    return CirculantSpectrum(length=n, eigenvalues=lam, source="r_delta")


def _check_vector(spec: CirculantSpectrum, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.complex128)
    if x.shape != (spec.length,):
        raise ValueError(f"vector shape {x.shape} does not match length {spec.length}")
    return x


def circulant_apply(spec: CirculantSpectrum, x: np.ndarray) -> np.ndarray:
    """Multiply by the circulant matrix via FFT/IFFT."""
    x = _check_vector(spec, x)
    return np.fft.ifft(spec.eigenvalues * np.fft.fft(x))


def circulant_apply_inverse(spec: CirculantSpectrum, x: np.ndarray) -> np.ndarray:
    """Solve against the circulant matrix via FFT/IFFT in O(M log M)."""
    x = _check_vector(spec, x)
    if np.any(spec.eigenvalues == 0.0):
        raise FactorizationError("circulant matrix is singular (zero eigenvalue)")
    return np.fft.ifft(np.fft.fft(x) / spec.eigenvalues)


def circulant_dense(spec: CirculantSpectrum) -> np.ndarray:
    """Materialize the circulant matrix (test and small-scale use only)."""
    first_col = np.fft.ifft(spec.eigenvalues.astype(np.complex128))
    idx = (np.arange(spec.length)[:, None] - np.arange(spec.length)[None, :]) % spec.length
    return first_col[idx]


def circulant_factor(spec: CirculantSpectrum) -> SqrtFactor:
    """Dense square-root factor ``B = (1/sqrt(M)) F^H sqrt(L)`` of the circulant."""
    m = spec.length
    f = sla.dft(m)
    b = (f.conj().T * np.sqrt(spec.eigenvalues)[np.newaxis, :]) / np.sqrt(m)
    return SqrtFactor(b_matrix=b, kind="circulant", source=spec.source)
