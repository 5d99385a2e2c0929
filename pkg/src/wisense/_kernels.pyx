# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled typical-set kernels; see ``_kernels_py`` for the reference semantics."""

import numpy as np
from libc.math cimport fabs, exp2, INFINITY


def scan_pairs(const long long[:, ::1] m_codes, const long long[:, ::1] mh_codes,
               const double[::1] m_logp, const double[::1] mh_logp,
               const double[:, ::1] log_joint, const double[:, ::1] dist,
               double h_m, double h_mh, double h_joint, double d_mean,
               double eps, double rhs_offset, double tol):
    cdef Py_ssize_t n = m_codes.shape[1]
    cdef Py_ssize_t am = m_codes.shape[0], ah = mh_codes.shape[0]
    cdef Py_ssize_t i, k, j, nrow = 0, ncol = 0
    cdef double lj, ds, slack, dn = <double>n
    cdef long long count = 0, violations = 0
    cdef double mass = 0.0, max_slack = -INFINITY
    cdef long long[::1] rows = np.empty(am, dtype=np.int64)
    cdef long long[::1] cols = np.empty(ah, dtype=np.int64)

    with nogil:
        for i in range(am):
            if fabs(-m_logp[i] / dn - h_m) < eps:
                rows[nrow] = i
                nrow += 1
        for k in range(ah):
            if fabs(-mh_logp[k] / dn - h_mh) < eps:
                cols[ncol] = k
                ncol += 1
        for i in range(nrow):
            for k in range(ncol):
                lj = 0.0
                ds = 0.0
                for j in range(n):
                    lj += log_joint[m_codes[rows[i], j], mh_codes[cols[k], j]]
                    ds += dist[m_codes[rows[i], j], mh_codes[cols[k], j]]
                if not fabs(-lj / dn - h_joint) < eps:
                    continue
                if not fabs(ds / dn - d_mean) < eps:
                    continue
                count += 1
                mass += exp2(lj)
                slack = (lj - m_logp[rows[i]]) - (mh_logp[cols[k]] + rhs_offset)
                if slack > tol:
                    violations += 1
                if slack > max_slack:
                    max_slack = slack
    return count, mass, violations, max_slack


def encode_first(const long long[:, :, ::1] codebooks, const long long[:, ::1] m_seqs,
                 const double[::1] m_logp, const double[:, :, ::1] mh_logtab,
                 const double[:, ::1] log_joint, const double[:, ::1] dist,
                 double h_m, double h_mh, double h_joint, double d_mean, double eps):
    cdef Py_ssize_t T = codebooks.shape[0], C = codebooks.shape[1], n = codebooks.shape[2]
    cdef Py_ssize_t t, w, j
    cdef long long b, m
    cdef double lq, lj, ds, dn = <double>n
    out_arr = np.full(T, -1, dtype=np.int64)
    cdef long long[::1] out = out_arr

    with nogil:
        for t in range(T):
            if not fabs(-m_logp[t] / dn - h_m) < eps:
                continue
            for w in range(C):
                lq = 0.0
                lj = 0.0
                ds = 0.0
                for j in range(n):
                    b = codebooks[t, w, j]
                    m = m_seqs[t, j]
                    lq += mh_logtab[t, j, b]
                    lj += log_joint[m, b]
                    ds += dist[m, b]
                if (fabs(-lq / dn - h_mh) < eps and fabs(-lj / dn - h_joint) < eps
                        and fabs(ds / dn - d_mean) < eps):
                    out[t] = w
                    break
    return out_arr
