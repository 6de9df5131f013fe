# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled neighbor selection and voting kernels.

Must stay semantically identical to ``_nnkernels_py``: neighbor order
is (similarity descending, sample index ascending); majority-vote ties
break by higher summed similarity then lower class index.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


cdef inline bint _worse(double s1, Py_ssize_t i1, double s2, Py_ssize_t i2) nogil:
    # "worse" = ranked after under (similarity desc, index asc)
    if s1 != s2:
        return s1 < s2
    return i1 > i2


cdef void _sift_down(double* hs, Py_ssize_t* hi, Py_ssize_t size, Py_ssize_t pos) nogil:
    cdef Py_ssize_t child
    cdef double ts
    cdef Py_ssize_t ti
    while True:
        child = 2 * pos + 1
        if child >= size:
            return
        if child + 1 < size and _worse(hs[child + 1], hi[child + 1], hs[child], hi[child]):
            child += 1
        if _worse(hs[child], hi[child], hs[pos], hi[pos]):
            ts = hs[pos]; hs[pos] = hs[child]; hs[child] = ts
            ti = hi[pos]; hi[pos] = hi[child]; hi[child] = ti
            pos = child
        else:
            return


def top_k_block(double[:, ::1] sims, Py_ssize_t k):
    """Per-row indices of the k best columns, ordered by (-similarity, index)."""
    cdef Py_ssize_t q = sims.shape[0]
    cdef Py_ssize_t m = sims.shape[1]
    if k > m:
        k = m
    out_arr = np.empty((q, k), dtype=np.int64)
    cdef cnp.int64_t[:, ::1] out = out_arr
    heap_s_arr = np.empty(k, dtype=np.float64)
    heap_i_arr = np.empty(k, dtype=np.intp)
    cdef double[::1] heap_s = heap_s_arr
    cdef cnp.intp_t[::1] heap_i = heap_i_arr
    cdef double* hs = &heap_s[0]
    cdef Py_ssize_t* hi = <Py_ssize_t*> &heap_i[0]
    cdef Py_ssize_t row, col, size, pos
    cdef double s

    for row in range(q):
        # root of the heap is the weakest of the current top-k
        size = 0
        for col in range(m):
            s = sims[row, col]
            if size < k:
                hs[size] = s
                hi[size] = col
                size += 1
                if size == k:
                    for pos in range(size // 2 - 1, -1, -1):
                        _sift_down(hs, hi, size, pos)
            elif _worse(hs[0], hi[0], s, col):
                hs[0] = s
                hi[0] = col
                _sift_down(hs, hi, size, 0)
        # pop from worst to best, filling the row back to front
        for pos in range(k - 1, -1, -1):
            out[row, pos] = hi[0]
            size -= 1
            hs[0] = hs[size]
            hi[0] = hi[size]
            _sift_down(hs, hi, size, 0)
    return out_arr


def vote_block(cnp.int64_t[:, ::1] top_labels, double[:, ::1] top_sims,
               Py_ssize_t k, Py_ssize_t num_classes, bint weighted=False):
    """Predicted class per row from the first k ranked neighbors."""
    cdef Py_ssize_t q = top_labels.shape[0]
    if k > top_labels.shape[1]:
        k = top_labels.shape[1]
    preds_arr = np.empty(q, dtype=np.int64)
    cdef cnp.int64_t[::1] preds = preds_arr
    counts_arr = np.zeros(num_classes, dtype=np.int64)
    sums_arr = np.zeros(num_classes, dtype=np.float64)
    cdef cnp.int64_t[::1] counts = counts_arr
    cdef double[::1] sums = sums_arr
    cdef Py_ssize_t row, j, best
    cdef cnp.int64_t lab, best_count
    cdef double best_sum

    for row in range(q):
        for j in range(num_classes):
            counts[j] = 0
            sums[j] = 0.0
        for j in range(k):
            lab = top_labels[row, j]
            counts[lab] += 1
            sums[lab] += top_sims[row, j]
        best = -1
        best_count = -1
        best_sum = 0.0
        for j in range(num_classes):
            if counts[j] == 0:
                continue
            if weighted:
                if best < 0 or sums[j] > best_sum:
                    best = j
                    best_sum = sums[j]
            else:
                if (
                    best < 0
                    or counts[j] > best_count
                    or (counts[j] == best_count and sums[j] > best_sum)
                ):
                    best = j
                    best_count = counts[j]
                    best_sum = sums[j]
        preds[row] = best
    return preds_arr
