# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled DP kernels. Semantics match ``_pykernels`` exactly."""

import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY

cnp.import_array()


def viterbi_align(logprobs, tokens, Py_ssize_t blank):
    cdef double[:, ::1] lp = np.ascontiguousarray(logprobs, dtype=np.float64)
    cdef cnp.int64_t[::1] tok = np.ascontiguousarray(tokens, dtype=np.int64)
    cdef Py_ssize_t n_frames = lp.shape[0]
    cdef Py_ssize_t n_tok = tok.shape[0]
    cdef Py_ssize_t t, j
    cdef double ub, uc, stay, adv, emit

    prev_arr = np.full(n_tok + 1, -np.inf)
    cur_arr = np.empty(n_tok + 1)
    adv_arr = np.zeros((n_frames, n_tok + 1), dtype=np.uint8)
    cdef double[::1] prev = prev_arr
    cdef double[::1] cur = cur_arr
    cdef double[::1] tmp
    cdef cnp.uint8_t[:, ::1] advance = adv_arr
    prev[0] = 0.0

    for t in range(n_frames):
        ub = lp[t, blank]
        cur[0] = prev[0] + ub
        for j in range(1, n_tok + 1):
            uc = lp[t, tok[j - 1]]
            emit = uc if uc > ub else ub
            stay = prev[j] + emit
            adv = prev[j - 1] + uc
            if adv > stay:
                cur[j] = adv
                advance[t, j] = 1
            else:
                cur[j] = stay
        tmp = prev
        prev = cur
        cur = tmp

    cdef double score = prev[n_tok]
    if score == -INFINITY:
        return float(score), None
    states_arr = np.empty(n_frames, dtype=np.int64)
    cdef cnp.int64_t[::1] states = states_arr
    j = n_tok
    for t in range(n_frames - 1, -1, -1):
        states[t] = j
        if j > 0 and advance[t, j]:
            j -= 1
    return float(score), states_arr


def edit_rows(a, b, rows):
    cdef cnp.int64_t[::1] av = np.ascontiguousarray(a, dtype=np.int64)
    cdef cnp.int64_t[::1] bv = np.ascontiguousarray(b, dtype=np.int64)
    uniq, inverse = np.unique(np.asarray(rows, dtype=np.int64), return_inverse=True)
    cdef cnp.int64_t[::1] rv = np.ascontiguousarray(uniq, dtype=np.int64)
    cdef Py_ssize_t m = av.shape[0]
    cdef Py_ssize_t n = bv.shape[0]
    cdef Py_ssize_t i, k, r
    cdef cnp.int64_t sub, dele, ins, best, ai
    if rv.shape[0] and (rv[0] < 0 or rv[rv.shape[0] - 1] > m):
        raise ValueError(f"rows must lie in [0, {m}]")

    # row index -> output slot, -1 when not requested
    slot_arr = np.full(m + 1, -1, dtype=np.int64)
    cdef cnp.int64_t[::1] slot = slot_arr
    for r in range(rv.shape[0]):
        slot[rv[r]] = r
    out_arr = np.zeros((rv.shape[0], n + 1), dtype=np.int64)
    cdef cnp.int64_t[:, ::1] out = out_arr

    prev_arr = np.arange(n + 1, dtype=np.int64)
    cur_arr = np.empty(n + 1, dtype=np.int64)
    cdef cnp.int64_t[::1] prev = prev_arr
    cdef cnp.int64_t[::1] cur = cur_arr
    cdef cnp.int64_t[::1] tmp
    if slot[0] >= 0:
        out[slot[0], :] = prev
    for i in range(1, m + 1):
        ai = av[i - 1]
        cur[0] = i
        for k in range(1, n + 1):
            sub = prev[k - 1] + (ai != bv[k - 1])
            dele = prev[k] + 1
            ins = cur[k - 1] + 1
            best = sub
            if dele < best:
                best = dele
            if ins < best:
                best = ins
            cur[k] = best
        tmp = prev
        prev = cur
        cur = tmp
        if slot[i] >= 0:
            out[slot[i], :] = prev
    return out_arr[inverse.ravel()]
