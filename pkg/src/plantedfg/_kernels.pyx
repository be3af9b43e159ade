# cython: language_level=3
"""Compiled versions of the hot kernels (see _kernels_py for semantics)."""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def zf_batch(tables, gammas):
    cdef const double[:, ::1] T = np.ascontiguousarray(tables, dtype=np.float64)
    cdef const double[:, :, ::1] G = np.ascontiguousarray(gammas, dtype=np.float64)
    cdef Py_ssize_t F = G.shape[0], k = G.shape[1], q = G.shape[2]
    cdef Py_ssize_t Q = T.shape[1]
    out_arr = np.zeros(F)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t[::1] dig = np.zeros(max(k, 1), dtype=np.intp)
    cdef Py_ssize_t f, t, h
    cdef double acc, w
    with nogil:
        for f in range(F):
            for h in range(k):
                dig[h] = 0
            acc = 0.0
            for t in range(Q):
                w = T[f, t]
                for h in range(k):
                    w = w * G[f, h, dig[h]]
                acc = acc + w
                h = k - 1
                while h >= 0:
                    dig[h] += 1
                    if dig[h] < q:
                        break
                    dig[h] = 0
                    h -= 1
            out[f] = acc
    return out_arr


def messages_batch(tables, hs, gammas):
    cdef const double[:, ::1] T = np.ascontiguousarray(tables, dtype=np.float64)
    cdef const double[:, :, ::1] G = np.ascontiguousarray(gammas, dtype=np.float64)
    cdef const cnp.int64_t[::1] H = np.ascontiguousarray(hs, dtype=np.int64)
    cdef Py_ssize_t F = G.shape[0], k = G.shape[1], q = G.shape[2]
    cdef Py_ssize_t Q = T.shape[1]
    out_arr = np.zeros((F, q))
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t[::1] dig = np.zeros(max(k, 1), dtype=np.intp)
    cdef Py_ssize_t f, t, h, hf
    cdef double w
    with nogil:
        for f in range(F):
            hf = H[f]
            for h in range(k):
                dig[h] = 0
            for t in range(Q):
                w = T[f, t]
                for h in range(k):
                    if h != hf:
                        w = w * G[f, h, dig[h]]
                out[f, dig[hf]] += w
                h = k - 1
                while h >= 0:
                    dig[h] += 1
                    if dig[h] < q:
                        break
                    dig[h] = 0
                    h -= 1
    return out_arr


def assignment_log_weights(Py_ssize_t n, Py_ssize_t q, wires, log_tables, log_prior):
    w_arr = np.asarray(wires, dtype=np.int64)
    l_arr = np.asarray(log_tables, dtype=np.float64)
    if l_arr.shape[0] == 0:
        w_arr = np.zeros((0, 1), dtype=np.int64)
        l_arr = np.zeros((0, 1))
    cdef const cnp.int64_t[:, ::1] W = np.ascontiguousarray(w_arr)
    cdef const double[:, ::1] L = np.ascontiguousarray(l_arr)
    cdef const double[::1] P = np.ascontiguousarray(log_prior, dtype=np.float64)
    cdef Py_ssize_t m = W.shape[0], k = W.shape[1]
    cdef Py_ssize_t size = q ** n
    out_arr = np.zeros(size)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t[::1] dig = np.zeros(max(n, 1), dtype=np.intp)
    cdef Py_ssize_t s, i, a, h, idx
    cdef double acc
    with nogil:
        for s in range(size):
            acc = 0.0
            for i in range(n):
                acc = acc + P[dig[i]]
            for a in range(m):
                idx = 0
                for h in range(k):
                    idx = idx * q + dig[W[a, h]]
                acc = acc + L[a, idx]
            out[s] = acc
            i = n - 1
            while i >= 0:
                dig[i] += 1
                if dig[i] < q:
                    break
                dig[i] = 0
                i -= 1
    return out_arr
