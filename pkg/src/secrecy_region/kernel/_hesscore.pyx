# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled log-det Hessian accumulation.

For a term ``logdet(A + sum_i B_i X_i B_i^H)`` the negated Hessian block
between variables ``i`` and ``j`` in real Hermitian coordinates is
``Re Tr(W_ji E_a W_ij E_b)``.  Each basis matrix ``E`` has at most two
nonzero entries, so every Hessian entry costs at most four complex products.
"""
import numpy as np

from .hermitian import basis_entries


cdef void _block(const double complex[:, ::1] P, const double complex[:, ::1] Q,
                 const Py_ssize_t[::1] cnt, const Py_ssize_t[:, ::1] rows,
                 const Py_ssize_t[:, ::1] cols, const double complex[:, ::1] coef,
                 double weight, double[:, ::1] out, Py_ssize_t oi, Py_ssize_t oj,
                 Py_ssize_t dim) noexcept nogil:
    cdef Py_ssize_t a, b, e, f
    cdef double complex acc
    for a in range(dim):
        for b in range(dim):
            acc = 0
            for e in range(cnt[a]):
                for f in range(cnt[b]):
                    acc = acc + coef[a, e] * coef[b, f] * P[cols[b, f], rows[a, e]] * Q[cols[a, e], rows[b, f]]
            out[oi + a, oj + b] += weight * acc.real


def accumulate_term(W, offsets, double weight, double[:, ::1] out, Py_ssize_t n):
    """Add ``weight * Re Tr(W[j,i] E_a W[i,j] E_b)`` into ``out`` for all block pairs."""
    cnt_a, rows_a, cols_a, coef_a = basis_entries(n)
    cdef const Py_ssize_t[::1] cnt = cnt_a
    cdef const Py_ssize_t[:, ::1] rows = rows_a
    cdef const Py_ssize_t[:, ::1] cols = cols_a
    cdef const double complex[:, ::1] coef = coef_a
    cdef const double complex[:, :, :, ::1] Wv = np.ascontiguousarray(W, dtype=np.complex128)
    cdef const Py_ssize_t[::1] off = np.ascontiguousarray(offsets, dtype=np.intp)
    cdef Py_ssize_t nb = Wv.shape[0]
    cdef Py_ssize_t dim = n * n
    cdef Py_ssize_t i, j
    with nogil:
        for i in range(nb):
            for j in range(nb):
                _block(Wv[j, i], Wv[i, j], cnt, rows, cols, coef, weight, out,
                       off[i], off[j], dim)
