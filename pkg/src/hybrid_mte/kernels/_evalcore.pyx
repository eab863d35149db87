# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled evaluation lane: per-point loop with early exit per piece."""

from libc.math cimport exp


def eval_batch(double[:, ::1] pts,
               long long[::1] pc_start,
               double[:, ::1] c_coeff,
               double[::1] c_const,
               unsigned char[::1] c_strict,
               long long[::1] pt_start,
               double[::1] t_coeff,
               long long[:, ::1] t_pow,
               double[:, ::1] t_exp,
               double[::1] t_expc,
               double[::1] out):
    cdef Py_ssize_t n_pts = pts.shape[0]
    cdef Py_ssize_t n_vars = pts.shape[1]
    cdef Py_ssize_t n_pieces = pc_start.shape[0] - 1
    cdef Py_ssize_t i, p, c, t, j
    cdef long long k
    cdef double val, acc, tv, mono
    cdef bint inside
    for i in range(n_pts):
        acc = 0.0
        for p in range(n_pieces):
            inside = True
            for c in range(pc_start[p], pc_start[p + 1]):
                val = c_const[c]
                for j in range(n_vars):
                    val += c_coeff[c, j] * pts[i, j]
                if c_strict[c]:
                    if val <= 0.0:
                        inside = False
                        break
                elif val < 0.0:
                    inside = False
                    break
            if not inside:
                continue
            for t in range(pt_start[p], pt_start[p + 1]):
                val = t_expc[t]
                for j in range(n_vars):
                    val += t_exp[t, j] * pts[i, j]
                tv = t_coeff[t] * exp(val)
                for j in range(n_vars):
                    k = t_pow[t, j]
                    while k > 0:
                        tv *= pts[i, j]
                        k -= 1
                acc += tv
            break
        out[i] = acc
    return None
