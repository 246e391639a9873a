# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernel for the profiled negative log-likelihood and its gradient.

Mirrors the NumPy implementation in likelihood.py exactly; the test suite
checks both backends agree. LAPACK is called on the row-major buffer, which
it reads as the transpose -- harmless here because every matrix involved is
symmetric, but it means the Cholesky/inverse triangle lands in the C upper
triangle (w[i, j] with i <= j).
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport exp, log
from scipy.linalg.cython_lapack cimport dpotrf, dpotri, dpotrs

from .errors import NumericalFailureError

cnp.import_array()

_JITTERS = (0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6)


def nll_kernel(double[:, :, ::1] E, double[::1] rho, double delta, double[::1] y):
    """Return (value, grad_delta, grad_rho, nu2, jitter_used) at (delta, rho)."""
    cdef int k = E.shape[0]
    cdef int n = E.shape[1]
    cdef int info = 0, nrhs = 1
    cdef int i, j, t
    cdef double jit = 0.0, acc, bij, common, logdet, nu2, value, trace_b

    cdef cnp.ndarray[double, ndim=1] logr = np.log(np.asarray(rho))
    cdef cnp.ndarray[double, ndim=2] psi_arr = np.empty((n, n))
    cdef cnp.ndarray[double, ndim=2] w_arr = np.empty((n, n))
    cdef cnp.ndarray[double, ndim=1] alpha_arr = np.empty(n)
    cdef cnp.ndarray[double, ndim=1] grad_rho = np.zeros(k)
    cdef double[:, ::1] psi = psi_arr
    cdef double[:, ::1] w = w_arr
    cdef double[::1] alpha = alpha_arr
    cdef double[::1] lr = logr
    cdef double[::1] gr = grad_rho

    for i in range(n):
        for j in range(n):
            acc = 0.0
            for t in range(k):
                acc += E[t, i, j] * lr[t]
            psi[i, j] = exp(acc)
        psi[i, i] = 1.0

    cdef bint ok = False
    for jit in _JITTERS:
        for i in range(n):
            for j in range(n):
                w[i, j] = psi[i, j]
            w[i, i] += delta + jit
        dpotrf("L", &n, &w[0, 0], &n, &info)
        if info == 0:
            ok = True
            break
    if not ok:
        raise NumericalFailureError(
            "Cholesky of the run correlation failed", jitter=jit
        )

    for i in range(n):
        alpha[i] = y[i]
    dpotrs("L", &n, &nrhs, &w[0, 0], &n, &alpha[0], &n, &info)
    if info != 0:
        raise NumericalFailureError("triangular solve failed", jitter=jit)

    nu2 = 0.0
    for i in range(n):
        nu2 += y[i] * alpha[i]
    nu2 /= n
    if not nu2 > 0.0:
        raise NumericalFailureError("profiled variance is not positive", jitter=jit)

    logdet = 0.0
    for i in range(n):
        logdet += log(w[i, i])
    logdet *= 2.0
    value = log(nu2) + logdet / n

    dpotri("L", &n, &w[0, 0], &n, &info)
    if info != 0:
        raise NumericalFailureError("inverse from Cholesky failed", jitter=jit)

    # B = Kinv/n - alpha alpha'/(n nu2);  Kinv(i,j) = w[i, j] for i <= j
    trace_b = 0.0
    for i in range(n):
        trace_b += w[i, i] / n - alpha[i] * alpha[i] / (n * nu2)
    for i in range(n):
        for j in range(i + 1, n):
            bij = w[i, j] / n - alpha[i] * alpha[j] / (n * nu2)
            common = 2.0 * bij * psi[i, j]
            for t in range(k):
                gr[t] += common * E[t, i, j]
    for t in range(k):
        gr[t] /= rho[t]

    return value, trace_b, grad_rho, nu2, jit
