# cython: language_level=3
"""Compiled CACm trajectory kernel.

Same contract as ``_pykernel.run_trajectory``.  The matrix-vector
products run column-wise (``mu += y[j] * w[j, :]``, valid because ``w`` is
symmetric) so the inner loop vectorizes without reassociating sums.
"""
import numpy as np

from libc.math cimport tanh, isfinite
from libc.stdlib cimport malloc, free


cdef inline void _matvec(const double[:, ::1] w, const double* v, double* out, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double vj
    cdef const double* row
    for i in range(n):
        out[i] = 0.0
    for j in range(n):
        vj = v[j]
        row = &w[j, 0]
        for i in range(n):
            out[i] += vj * row[i]


cdef inline double _energy(const double[:, ::1] w, const double* s, double* tmp, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i
    cdef double acc = 0.0
    _matvec(w, s, tmp, n)
    for i in range(n):
        acc += s[i] * tmp[i]
    return -0.5 * acc


def run_trajectory(const double[:, ::1] w, const double[::1] x0, long steps,
                   double beta1, double beta2, double alpha, double gamma,
                   double xi, double dt, double threshold, double e_floor,
                   signed char[::1] best_spins, energy_trace=None, emean_trace=None):
    cdef Py_ssize_t n = x0.shape[0]
    cdef Py_ssize_t i
    cdef long t
    cdef double beta, best, h, acc, mean_e, xpi
    cdef long first_hit = -1
    cdef bint diverged = False
    cdef long steps_done = steps
    cdef bint record = energy_trace is not None and len(energy_trace) > 0
    cdef double[::1] etrace
    cdef double[::1] mtrace
    if record:
        etrace = energy_trace
        mtrace = emean_trace
    cdef double* buf = <double*> malloc(8 * n * sizeof(double))
    if buf == NULL:
        raise MemoryError()
    cdef double* x = buf
    cdef double* xp = buf + n
    cdef double* xpp = buf + 2 * n
    cdef double* e = buf + 3 * n
    cdef double* y = buf + 4 * n
    cdef double* mu = buf + 5 * n
    cdef double* s = buf + 6 * n
    cdef double* tmp = buf + 7 * n
    try:
        with nogil:
            for i in range(n):
                x[i] = x0[i]
                xp[i] = x0[i]
                e[i] = 1.0
                s[i] = 1.0 if x[i] >= 0.0 else -1.0
            best = _energy(w, s, tmp, n)
            for i in range(n):
                best_spins[i] = <signed char> s[i]
            if best <= threshold:
                first_hit = 0
            for t in range(steps):
                beta = beta1 + (<double> t / <double> steps) * (beta2 - beta1)
                for i in range(n):
                    xpp[i] = xp[i]
                    xp[i] = x[i]
                    y[i] = tanh(xp[i])
                _matvec(w, y, mu, n)
                acc = 0.0
                for i in range(n):
                    xpi = xp[i]
                    x[i] = xpi + dt * ((-beta * xpi + alpha * e[i] * mu[i]) + gamma * (xpi - xpp[i]))
                    e[i] = e[i] - (xpi * xpi - 1.0) * e[i] * xi
                    if e[i] < e_floor:
                        e[i] = e_floor
                    acc += e[i]
                mean_e = acc / n
                for i in range(n):
                    e[i] = e[i] / mean_e
                    if not (isfinite(x[i]) and isfinite(e[i])):
                        diverged = True
                if diverged:
                    steps_done = t + 1
                    break
                for i in range(n):
                    s[i] = 1.0 if x[i] >= 0.0 else -1.0
                h = _energy(w, s, tmp, n)
                if record:
                    etrace[t] = h
                    acc = 0.0
                    for i in range(n):
                        acc += e[i]
                    mtrace[t] = acc / n
                if h < best:
                    best = h
                    for i in range(n):
                        best_spins[i] = <signed char> s[i]
                if first_hit < 0 and h <= threshold:
                    first_hit = t + 1
    finally:
        free(buf)
    return best, first_hit, bool(diverged), steps_done
