"""Pure NumPy orthogonal matching pursuit kernel.

This is the fallback implementation of the greedy loop; the compiled
extension in ``_omp_kernel.pyx`` implements the same contract.  Keep the two
in algorithmic lockstep: atom scoring against the current residual,
restricted least squares by incrementally built orthogonalization, and the
stopping value recomputed from the actual weights each iteration.
"""
from __future__ import annotations

import numpy as np

# Relative threshold below which a newly selected column is numerically
# dependent on the already selected ones.
_DEGENERATE_REL = 1e-14


def omp_greedy(
    phi: np.ndarray,
    d: np.ndarray,
    weight_gram: np.ndarray | None,
    eps: float,
    max_sel: int,
    by_tol: bool,
):
    """Greedy pursuit of ``d`` over the columns of ``phi``.

    Selection correlates the raw columns with the current residual
    (normalized by column norm); the restricted least-squares fit is plain;
    the stopping value is the weighted squared residual norm
    ``Re(r^H G r)`` with ``G = weight_gram`` (identity when None).

    Returns ``(support, weights, trace, converged)`` where ``support`` lists
    atoms in selection order, ``weights`` is the final restricted solution,
    and ``trace[k]`` is the stopping value after ``k + 1`` selections.
    """
    m, n = phi.shape
    norms = np.linalg.norm(phi, axis=0)

    def stop_value(res: np.ndarray) -> float:
        if weight_gram is None:
            return float(np.real(np.vdot(res, res)))
        return max(float(np.real(res.conj() @ (weight_gram @ res))), 0.0)

    kmax = n if by_tol else min(max_sel, n)
    support: list[int] = []
    weights = np.zeros(0, dtype=np.complex128)
    trace = np.zeros(kmax, dtype=np.float64)
    q = np.zeros((m, kmax), dtype=np.complex128)
    r_upper = np.zeros((kmax, kmax), dtype=np.complex128)
    c = np.zeros(kmax, dtype=np.complex128)
    residual = d.astype(np.complex128, copy=True)
    pre = stop_value(residual)
    converged = False

    k = 0
    while True:
        if by_tol and pre <= eps:
            converged = True
            break
        if not by_tol and k >= max_sel:
            converged = True
            break
        if k >= n:
            converged = False
            break
        with np.errstate(invalid="ignore", divide="ignore"):
            scores = np.abs(phi.conj().T @ residual) / norms
        scores[~np.isfinite(scores)] = -1.0  # zero columns are never atoms
        if support:
            scores[support] = -1.0
        j = int(np.argmax(scores))
        if scores[j] <= 0.0:
            # Residual orthogonal to every remaining atom: an exact fit in
            # fixed-count mode, a dead end otherwise.
            converged = not by_tol and pre == 0.0
            break
        col = phi[:, j].copy()
        if k > 0:
            # Gram-Schmidt with one reorthogonalization pass, which keeps the
            # basis orthogonal even for badly conditioned supports.
            proj = q[:, :k].conj().T @ col
            r_upper[:k, k] = proj
            col -= q[:, :k] @ proj
            proj = q[:, :k].conj().T @ col
            r_upper[:k, k] += proj
            col -= q[:, :k] @ proj
        nrm = np.linalg.norm(col)
        if nrm <= _DEGENERATE_REL * norms[j]:
            converged = False
            break
        support.append(j)
        r_upper[k, k] = nrm
        q[:, k] = col / nrm
        c[k] = np.vdot(q[:, k], d)
        kk = k + 1
        weights = np.linalg.solve(r_upper[:kk, :kk], c[:kk])
        residual = d - phi[:, support] @ weights
        pre = stop_value(residual)
        trace[k] = pre
        k = kk

    return (
        np.asarray(support, dtype=np.int64),
        weights[: len(support)].astype(np.complex128, copy=False),
        trace[: len(support)].copy(),
        bool(converged),
    )
