# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled orthogonal matching pursuit kernel.

Mirrors ``_omp_numpy.omp_greedy`` exactly: atom scoring against the current
residual, restricted least squares through an incrementally grown
orthogonal basis, stopping value recomputed from the actual weights.  The
loops here avoid per-call NumPy overhead, which dominates at the small
matrix sizes the Monte Carlo experiments use.
"""
import numpy as np

from libc.math cimport sqrt

ctypedef double complex cplx

cdef double DEGENERATE_REL = 1e-14


cdef inline double _abs2(cplx z) nogil:
    return z.real * z.real + z.imag * z.imag


cdef double _stop_value(const cplx[::1] res, const cplx[:, ::1] gram, cplx[::1] scratch) nogil:
    """Re(res^H G res), or the plain squared norm when gram has zero size."""
    cdef Py_ssize_t m = res.shape[0]
    cdef Py_ssize_t i, j
    cdef double out = 0.0
    cdef cplx acc
    if gram.shape[0] == 0:
        for i in range(m):
            out += _abs2(res[i])
        return out
    for i in range(m):
        acc = 0
        for j in range(m):
            acc = acc + gram[i, j] * res[j]
        scratch[i] = acc
    for i in range(m):
        out += res[i].real * scratch[i].real + res[i].imag * scratch[i].imag
    if out < 0.0:
        out = 0.0
    return out


def omp_greedy(phi_in, d_in, weight_gram, double eps, Py_ssize_t max_sel, bint by_tol):
    """Same contract as the NumPy kernel; see ``_omp_numpy.omp_greedy``."""
    cdef const cplx[:, ::1] phi = np.ascontiguousarray(phi_in, dtype=np.complex128)
    cdef const cplx[::1] d = np.ascontiguousarray(d_in, dtype=np.complex128)
    cdef Py_ssize_t m = phi.shape[0]
    cdef Py_ssize_t n = phi.shape[1]

    cdef bint weighted = weight_gram is not None
    gram_arr = (
        np.ascontiguousarray(weight_gram, dtype=np.complex128)
        if weighted
        else np.zeros((0, 0), dtype=np.complex128)
    )
    cdef const cplx[:, ::1] gram = gram_arr

    cdef Py_ssize_t kmax = n if by_tol else (max_sel if max_sel < n else n)
    if kmax < 0:
        kmax = 0

    support_arr = np.empty(kmax, dtype=np.intp)
    trace_arr = np.empty(kmax, dtype=np.float64)
    q_arr = np.zeros((kmax, m), dtype=np.complex128)      # rows are basis vectors
    r_arr = np.zeros((kmax, kmax), dtype=np.complex128)
    c_arr = np.zeros(kmax, dtype=np.complex128)
    z_arr = np.zeros(kmax, dtype=np.complex128)
    res_arr = np.array(d_in, dtype=np.complex128, copy=True)
    scratch_arr = np.zeros(m, dtype=np.complex128)
    norms_arr = np.empty(n, dtype=np.float64)
    taken_arr = np.zeros(n, dtype=np.uint8)

    cdef Py_ssize_t[::1] support = support_arr
    cdef double[::1] trace = trace_arr
    cdef cplx[:, ::1] q = q_arr
    cdef cplx[:, ::1] r_upper = r_arr
    cdef cplx[::1] c = c_arr
    cdef cplx[::1] z = z_arr
    cdef cplx[::1] residual = res_arr
    cdef cplx[::1] scratch = scratch_arr
    cdef double[::1] norms = norms_arr
    cdef unsigned char[::1] taken = taken_arr

    cdef Py_ssize_t i, j, k, t, best
    cdef double acc, best_score, score, nrm, pre
    cdef cplx dot
    cdef bint converged = False

    for j in range(n):
        acc = 0.0
        for i in range(m):
            acc += _abs2(phi[i, j])
        norms[j] = sqrt(acc)

    pre = _stop_value(residual, gram, scratch)

    k = 0
    while True:
        if by_tol and pre <= eps:
            converged = True
            break
        if (not by_tol) and k >= max_sel:
            converged = True
            break
        if k >= n:
            converged = False
            break

        # score = |phi_j^H residual| / ||phi_j|| over atoms not yet taken
        best = -1
        best_score = 0.0
        for j in range(n):
            if taken[j]:
                continue
            dot = 0
            for i in range(m):
                dot = dot + phi[i, j].conjugate() * residual[i]
            score = sqrt(_abs2(dot)) / norms[j]
            if score > best_score:
                best_score = score
                best = j
        if best < 0 or best_score <= 0.0:
            converged = (not by_tol) and pre == 0.0
            break

        # grow the orthogonal basis with the chosen column; one extra
        # orthogonalization pass keeps the basis clean on badly conditioned
        # supports
        for i in range(m):
            scratch[i] = phi[i, best]
        for t in range(k):
            dot = 0
            for i in range(m):
                dot = dot + q[t, i].conjugate() * scratch[i]
            r_upper[t, k] = dot
            for i in range(m):
                scratch[i] = scratch[i] - dot * q[t, i]
        for t in range(k):
            dot = 0
            for i in range(m):
                dot = dot + q[t, i].conjugate() * scratch[i]
            r_upper[t, k] = r_upper[t, k] + dot
            for i in range(m):
                scratch[i] = scratch[i] - dot * q[t, i]
        acc = 0.0
        for i in range(m):
            acc += _abs2(scratch[i])
        nrm = sqrt(acc)
        if nrm <= DEGENERATE_REL * norms[best]:
            converged = False
            break
        taken[best] = 1
        support[k] = best
        r_upper[k, k] = nrm
        for i in range(m):
            q[k, i] = scratch[i] / nrm
        dot = 0
        for i in range(m):
            dot = dot + q[k, i].conjugate() * d[i]
        c[k] = dot

        # back-substitute R z = c for the current support size
        for t in range(k, -1, -1):
            dot = c[t]
            for j in range(t + 1, k + 1):
                dot = dot - r_upper[t, j] * z[j]
            z[t] = dot / r_upper[t, t]

        # honest residual and stopping value from the actual weights
        for i in range(m):
            residual[i] = d[i]
        for t in range(k + 1):
            j = support[t]
            dot = z[t]
            for i in range(m):
                residual[i] = residual[i] - dot * phi[i, j]
        pre = _stop_value(residual, gram, scratch)
        trace[k] = pre
        k += 1

    return (
        support_arr[:k].astype(np.int64),
        z_arr[:k].copy(),
        trace_arr[:k].copy(),
        bool(converged),
    )
