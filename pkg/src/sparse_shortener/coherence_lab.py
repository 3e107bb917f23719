"""Worst-case coherence of the sparsifying dictionaries.

The coherence of a dictionary upper-bounds how correlated two distinct
atoms can be; smaller values favor sparse recovery.  For dictionaries that
are transposed square-root factors the Gram matrix of the atoms equals the
factored parent matrix, so all exact factors of the same matrix share one
coherence.  A closed-form eigenanalysis of the 0/1 super/sub-diagonal
matrix yields the channel that maximizes the output-autocorrelation
coherence at high SNR.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .mmse_core import optimal_unit_tap
from .signal_model import Cir, NoiseSpec, build_channel_matrix, build_correlations, _frozen
from .spectral_factors import (
    circulant_dense,
    circulant_factor,
    circulant_rdelta_spectrum,
    circulant_ryy_spectrum,
)
from .sparse_engine import _factor_transpose

__all__ = [
    "CoherenceReport",
    "TridiagEigen",
    "PROFILE_DICTIONARY_KINDS",
    "worst_case_coherence",
    "tridiag_ones_eigen",
    "worst_case_cir",
    "coherence_vs_snr_profile",
]

# Dictionary kinds coherence_vs_snr_profile understands.  The tir_* kinds
# factor the error covariance (unit-tap column removed); the cse_* kinds
# factor or use the output autocorrelation directly.
PROFILE_DICTIONARY_KINDS = (
    "tir_cholesky",
    "tir_ldl",
    "tir_eigen",
    "tir_circulant",
    "cse_cholesky",
    "cse_eigen",
    "cse_gram",
    "cse_circulant",
    "cse_circulant_gram",
)


@dataclass(frozen=True)
class CoherenceReport:
    """Worst-case coherence and the column pair attaining it."""

    mu: float
    argpair: tuple[int, int]
    label: str = ""


@dataclass(frozen=True)
class TridiagEigen:
    """Closed-form eigensystem of the 0/1 super/sub-diagonal matrix.

    eigenvalues[s-1] = 2 cos(pi s / (order + 1)) for s = 1..order, sorted
    descending; eigenvector columns have unit norm.
    """

    order: int
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "eigenvalues", _frozen(np.asarray(self.eigenvalues, dtype=np.float64))
        )
        object.__setattr__(
            self, "eigenvectors", _frozen(np.asarray(self.eigenvectors, dtype=np.float64))
        )


def worst_case_coherence(phi: np.ndarray, label: str = "") -> CoherenceReport:
    """Maximum normalized inner product over distinct column pairs."""
    phi = np.asarray(phi, dtype=np.complex128)
    if phi.ndim != 2 or phi.shape[1] < 2:
        raise ValueError("coherence needs a matrix with at least two columns")
    norms = np.linalg.norm(phi, axis=0)
    if np.any(norms == 0.0):
        raise ValueError("dictionary contains a zero column")
    normalized = phi / norms[np.newaxis, :]
    gram = np.abs(normalized.conj().T @ normalized)
    np.fill_diagonal(gram, -1.0)
    flat = int(np.argmax(gram))
    i, j = divmod(flat, gram.shape[1])
    return CoherenceReport(mu=float(gram[i, j]), argpair=(i, j), label=label)


def tridiag_ones_eigen(v: int) -> TridiagEigen:
    """Closed-form eigenvalues and eigenvectors for memory ``v`` (order v+1)."""
    if v < 0:
        raise ValueError(f"v must be >= 0, got {v}")
    order = v + 1
    s = np.arange(1, order + 1)
    eigenvalues = 2.0 * np.cos(np.pi * s / (v + 2))
    j = np.arange(1, order + 1)
    vectors = np.sqrt(2.0 / (v + 2)) * np.sin(np.outer(j, s) * np.pi / (v + 2))
    return TridiagEigen(order=order, eigenvalues=eigenvalues, eigenvectors=vectors)


def worst_case_cir(v: int) -> Cir:
    """Unit-energy channel maximizing the high-SNR autocorrelation coherence.

    This is the top eigenvector of the 0/1 super/sub-diagonal matrix, which
    the closed forms give directly.
    """
    eig = tridiag_ones_eigen(v)
    taps = eig.eigenvectors[:, 0].astype(np.complex128)
    return Cir(taps=taps, memory=v)


def _profile_dictionary(
    kind: str, cir: Cir, n_f: int, noise: NoiseSpec, remove_index: int | None
) -> np.ndarray:
    corr = None
    if not kind.endswith("circulant") and not kind.endswith("circulant_gram"):
        corr = build_correlations(build_channel_matrix(cir, n_f), noise)
    if kind.startswith("tir_"):
        base = kind[len("tir_"):]
        if base == "circulant":
            spec = circulant_rdelta_spectrum(cir, n_f, noise)
            a = circulant_factor(spec).b_matrix.conj().T
        else:
            a = _factor_transpose(base, corr, "r_delta")
        if remove_index is None:
            corr = corr or build_correlations(build_channel_matrix(cir, n_f), noise)
            remove_index, _ = optimal_unit_tap(corr)
        return np.delete(a, remove_index, axis=1)
    if kind == "cse_gram":
        return corr.r_yy.copy()
    if kind == "cse_circulant":
        return circulant_factor(circulant_ryy_spectrum(cir, n_f, noise)).b_matrix.conj().T
    if kind == "cse_circulant_gram":
        return circulant_dense(circulant_ryy_spectrum(cir, n_f, noise))
    if kind in ("cse_cholesky", "cse_eigen"):
        return _factor_transpose(kind[len("cse_"):], corr, "r_yy")
    raise ValueError(f"unknown dictionary kind {kind!r}")


def coherence_vs_snr_profile(
    cir: Cir,
    n_f: int,
    snr_grid_db: Sequence[float],
    kinds: Iterable[str],
    remove_index: int | None = None,
) -> list[tuple[float, str, float]]:
    """Worst-case coherence of each dictionary kind across an SNR grid.

    Returns ``(snr_db, kind, mu)`` rows.  For target-response dictionaries
    the unit-tap column is removed first; by default that index is the
    optimal unit-tap position at each SNR.
    """
    kinds = list(kinds)
    if not kinds:
        raise ValueError("no dictionary kinds requested")
    for kind in kinds:
        if kind not in PROFILE_DICTIONARY_KINDS:
            raise ValueError(f"unknown dictionary kind {kind!r}")
    grid = [float(s) for s in snr_grid_db]
    if not grid:
        raise ValueError("empty SNR grid")
    rows = []
    for snr_db in grid:
        noise = NoiseSpec.from_db(snr_db)
        for kind in kinds:
            phi = _profile_dictionary(kind, cir, n_f, noise, remove_index)
            rows.append((snr_db, kind, worst_case_coherence(phi, label=kind).mu))
    return rows
