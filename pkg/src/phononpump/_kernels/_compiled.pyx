# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled propagation kernels. Semantics match ``_python.py`` exactly."""

import numpy as np
cimport numpy as cnp
from scipy.linalg.cython_blas cimport zgemm

cnp.import_array()


cdef void _mm(double complex* a, double complex* b, double complex* c,
              int m, int n, int k, bint trans_a) noexcept nogil:
    # row-major c(m x n) = op(a)(m x k) @ b(k x n); op(a) = a^T when trans_a
    cdef double complex one = 1.0
    cdef double complex zero = 0.0
    cdef char tn = b'N'
    cdef char ta = b'T' if trans_a else b'N'
    cdef int lda = m if trans_a else k
    zgemm(&tn, &ta, &n, &m, &k, &one, b, &n, a, &lda, &zero, c, &n)


def split_step(psi, ua_stack, ua_index, phonon_half, wy, wq, eb, record_steps):
    cdef double complex[:, ::1] state = np.array(psi, dtype=np.complex128, order="C", copy=True)
    cdef double complex[:, :, ::1] uas = np.ascontiguousarray(ua_stack, dtype=np.complex128)
    cdef cnp.int64_t[::1] uidx = np.ascontiguousarray(ua_index, dtype=np.int64)
    cdef double complex[::1] ph = np.ascontiguousarray(phonon_half, dtype=np.complex128)
    cdef double complex[:, ::1] wy_c = np.ascontiguousarray(wy, dtype=np.complex128)
    cdef double complex[:, ::1] wyt_c = np.ascontiguousarray(np.asarray(wy).T, dtype=np.complex128)
    cdef double complex[:, ::1] wq_c = np.ascontiguousarray(wq, dtype=np.complex128)
    cdef double complex[:, ::1] wqt_c = np.ascontiguousarray(np.asarray(wq).T, dtype=np.complex128)
    cdef double complex[:, ::1] ebc = np.ascontiguousarray(eb, dtype=np.complex128)
    cdef cnp.int64_t[::1] rec = np.ascontiguousarray(record_steps, dtype=np.int64)

    cdef int du = state.shape[0]
    cdef int dp = state.shape[1]
    cdef Py_ssize_t nsteps = uidx.shape[0]
    cdef Py_ssize_t nrec = rec.shape[0]
    out = np.empty((nrec, du, dp), dtype=np.complex128)
    cdef double complex[:, :, ::1] outv = out
    cdef double complex[:, ::1] t1 = np.empty((du, dp), dtype=np.complex128)
    cdef double complex[:, ::1] t2 = np.empty((du, dp), dtype=np.complex128)

    cdef Py_ssize_t j, r = 0
    cdef int i, k
    cdef double complex* ua

    with nogil:
        for j in range(nsteps + 1):
            while r < nrec and rec[r] == j:
                for i in range(du):
                    for k in range(dp):
                        outv[r, i, k] = state[i, k]
                r += 1
            if j == nsteps:
                break
            ua = &uas[uidx[j], 0, 0]
            # first half of A
            _mm(ua, &state[0, 0], &t1[0, 0], du, dp, du, False)
            for i in range(du):
                for k in range(dp):
                    t1[i, k] = t1[i, k] * ph[k]
            # B in its eigenbasis
            _mm(&wyt_c[0, 0], &t1[0, 0], &t2[0, 0], du, dp, du, False)
            _mm(&t2[0, 0], &wq_c[0, 0], &t1[0, 0], du, dp, dp, False)
            for i in range(du):
                for k in range(dp):
                    t1[i, k] = t1[i, k] * ebc[i, k]
            _mm(&wy_c[0, 0], &t1[0, 0], &t2[0, 0], du, dp, du, False)
            _mm(&t2[0, 0], &wqt_c[0, 0], &t1[0, 0], du, dp, dp, False)
            # second half of A
            _mm(ua, &t1[0, 0], &state[0, 0], du, dp, du, False)
            for i in range(du):
                for k in range(dp):
                    state[i, k] = state[i, k] * ph[k]
    return out


cdef void _rhs(double complex[:, ::1] r, double complex[:, ::1] out,
               double complex f, double[::1] sq, double[:, ::1] dephase,
               double g_down, double g_up, int n) noexcept nogil:
    cdef int m, k
    cdef double complex fc = f.conjugate()
    cdef double complex acc, comm
    for m in range(n):
        for k in range(n):
            acc = dephase[m, k] * r[m, k]
            comm = 0
            if m + 1 < n:
                comm = comm + fc * sq[m + 1] * r[m + 1, k]
                if k + 1 < n:
                    acc = acc + g_down * sq[m + 1] * sq[k + 1] * r[m + 1, k + 1]
            if m >= 1:
                comm = comm + f * sq[m] * r[m - 1, k]
                if k >= 1:
                    acc = acc + g_up * sq[m] * sq[k] * r[m - 1, k - 1]
            if k >= 1:
                comm = comm - fc * r[m, k - 1] * sq[k]
            if k + 1 < n:
                comm = comm - f * r[m, k + 1] * sq[k + 1]
            out[m, k] = acc - 1j * comm


def lindblad_rk4(rho, f_nodes, double dt, double g_down, double g_up, double g_deph):
    from ._python import dephase_matrix
    cdef double complex[:, ::1] r = np.array(rho, dtype=np.complex128, order="C", copy=True)
    cdef double complex[::1] fn = np.ascontiguousarray(f_nodes, dtype=np.complex128)
    cdef int n = r.shape[0]
    cdef double[::1] sq = np.sqrt(np.arange(n, dtype=np.float64))
    cdef double[:, ::1] deph = np.ascontiguousarray(dephase_matrix(n, g_down, g_up, g_deph))
    cdef double complex[:, ::1] k1 = np.empty((n, n), dtype=np.complex128)
    cdef double complex[:, ::1] k2 = np.empty((n, n), dtype=np.complex128)
    cdef double complex[:, ::1] k3 = np.empty((n, n), dtype=np.complex128)
    cdef double complex[:, ::1] k4 = np.empty((n, n), dtype=np.complex128)
    cdef double complex[:, ::1] tmp = np.empty((n, n), dtype=np.complex128)
    cdef Py_ssize_t nsteps = (fn.shape[0] - 1) // 2
    cdef Py_ssize_t j
    cdef int a, b
    cdef double h2 = 0.5 * dt
    cdef double h6 = dt / 6.0
    with nogil:
        for j in range(nsteps):
            _rhs(r, k1, fn[2 * j], sq, deph, g_down, g_up, n)
            for a in range(n):
                for b in range(n):
                    tmp[a, b] = r[a, b] + h2 * k1[a, b]
            _rhs(tmp, k2, fn[2 * j + 1], sq, deph, g_down, g_up, n)
            for a in range(n):
                for b in range(n):
                    tmp[a, b] = r[a, b] + h2 * k2[a, b]
            _rhs(tmp, k3, fn[2 * j + 1], sq, deph, g_down, g_up, n)
            for a in range(n):
                for b in range(n):
                    tmp[a, b] = r[a, b] + dt * k3[a, b]
            _rhs(tmp, k4, fn[2 * j + 2], sq, deph, g_down, g_up, n)
            for a in range(n):
                for b in range(n):
                    r[a, b] = r[a, b] + h6 * (k1[a, b] + 2.0 * k2[a, b] + 2.0 * k3[a, b] + k4[a, b])
    return np.asarray(r)
