# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled split-scan and attribution kernels.

Each function mirrors its namesake in pykernels.py operation for
operation: same stable sort permutation, same sequential prefix sums,
same expression order, same tie-breaking. The pure-Python module is
the readable reference; this one exists for speed only, and the test
suite asserts bit-identical outputs between the two.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def backend_name():
    return "compiled"


cdef void _stable_argsort(double* v, Py_ssize_t n, cnp.intp_t* order, cnp.intp_t* buf) noexcept nogil:
    # bottom-up stable merge sort of row indices by value
    cdef Py_ssize_t i, width, lo, mid, hi, a, b, k
    cdef cnp.intp_t* src = order
    cdef cnp.intp_t* dst = buf
    cdef cnp.intp_t* swp
    for i in range(n):
        order[i] = i
    width = 1
    while width < n:
        lo = 0
        while lo < n:
            mid = lo + width
            hi = lo + 2 * width
            if mid > n:
                mid = n
            if hi > n:
                hi = n
            a = lo
            b = mid
            k = lo
            while a < mid and b < hi:
                if v[src[a]] <= v[src[b]]:
                    dst[k] = src[a]
                    a += 1
                else:
                    dst[k] = src[b]
                    b += 1
                k += 1
            while a < mid:
                dst[k] = src[a]
                a += 1
                k += 1
            while b < hi:
                dst[k] = src[b]
                b += 1
                k += 1
            lo = hi
        swp = src
        src = dst
        dst = swp
        width *= 2
    if src != order:
        for i in range(n):
            order[i] = src[i]


def best_split(double[:, ::1] values, double[::1] w, cnp.uint8_t[::1] y):
    """See pykernels.best_split; identical contract and results."""
    cdef Py_ssize_t n = values.shape[0]
    cdef Py_ssize_t m = values.shape[1]
    cdef cnp.ndarray[cnp.intp_t, ndim=1] order_arr = np.empty(n, dtype=np.intp)
    cdef cnp.ndarray[cnp.intp_t, ndim=1] buf_arr = np.empty(n, dtype=np.intp)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] col_arr = np.empty(n, dtype=np.float64)
    cdef cnp.intp_t* order = <cnp.intp_t*> order_arr.data
    cdef cnp.intp_t* buf = <cnp.intp_t*> buf_arr.data
    cdef double* col = <double*> col_arr.data
    cdef Py_ssize_t i, j, row
    cdef double t0, t1, l0, l1, r0, r1, lw, rw, la, lb, ra, rb, gl, gr, score
    cdef double a, b, thr
    cdef int best_col = -1
    cdef double best_thr = 0.0
    cdef double best_score = np.inf
    for j in range(m):
        for i in range(n):
            col[i] = values[i, j]
        _stable_argsort(col, n, order, buf)
        t0 = 0.0
        t1 = 0.0
        for i in range(n):
            row = order[i]
            if y[row] == 0:
                t0 = t0 + w[row]
                t1 = t1 + 0.0
            else:
                t0 = t0 + 0.0
                t1 = t1 + w[row]
        l0 = 0.0
        l1 = 0.0
        for i in range(n - 1):
            row = order[i]
            if y[row] == 0:
                l0 = l0 + w[row]
                l1 = l1 + 0.0
            else:
                l0 = l0 + 0.0
                l1 = l1 + w[row]
            if col[order[i]] != col[order[i + 1]]:
                r0 = t0 - l0
                r1 = t1 - l1
                lw = l0 + l1
                rw = r0 + r1
                la = l0 / lw
                lb = l1 / lw
                ra = r0 / rw
                rb = r1 / rw
                gl = 1.0 - la * la - lb * lb
                gr = 1.0 - ra * ra - rb * rb
                score = lw * gl + rw * gr
                if score < best_score:
                    a = col[order[i]]
                    b = col[order[i + 1]]
                    thr = 0.5 * (a + b)
                    if thr == b:
                        thr = a
                    best_col = <int> j
                    best_thr = thr
                    best_score = score
    return best_col, best_thr, best_score


cdef void _extend_path(cnp.int64_t* fi, double* zf, double* of_, double* pw,
                       int unique_depth, double zero_fraction,
                       double one_fraction, cnp.int64_t feature_index) noexcept nogil:
    cdef int i
    fi[unique_depth] = feature_index
    zf[unique_depth] = zero_fraction
    of_[unique_depth] = one_fraction
    pw[unique_depth] = 1.0 if unique_depth == 0 else 0.0
    for i in range(unique_depth - 1, -1, -1):
        pw[i + 1] += one_fraction * pw[i] * (i + 1.0) / (unique_depth + 1.0)
        pw[i] = zero_fraction * pw[i] * (unique_depth - i) / (unique_depth + 1.0)


cdef void _unwind_path(cnp.int64_t* fi, double* zf, double* of_, double* pw,
                       int unique_depth, int path_index) noexcept nogil:
    cdef double one_fraction = of_[path_index]
    cdef double zero_fraction = zf[path_index]
    cdef double next_one_portion = pw[unique_depth]
    cdef double tmp
    cdef int i
    for i in range(unique_depth - 1, -1, -1):
        if one_fraction != 0.0:
            tmp = pw[i]
            pw[i] = next_one_portion * (unique_depth + 1.0) / ((i + 1.0) * one_fraction)
            next_one_portion = tmp - pw[i] * zero_fraction * (unique_depth - i) / (
                unique_depth + 1.0
            )
        else:
            pw[i] = (pw[i] * (unique_depth + 1.0)) / (zero_fraction * (unique_depth - i))
    for i in range(path_index, unique_depth):
        fi[i] = fi[i + 1]
        zf[i] = zf[i + 1]
        of_[i] = of_[i + 1]


cdef double _unwound_path_sum(cnp.int64_t* fi, double* zf, double* of_, double* pw,
                              int unique_depth, int path_index) noexcept nogil:
    cdef double one_fraction = of_[path_index]
    cdef double zero_fraction = zf[path_index]
    cdef double next_one_portion = pw[unique_depth]
    cdef double total = 0.0
    cdef double tmp
    cdef int i
    for i in range(unique_depth - 1, -1, -1):
        if one_fraction != 0.0:
            tmp = next_one_portion * (unique_depth + 1.0) / ((i + 1.0) * one_fraction)
            total += tmp
            next_one_portion = pw[i] - tmp * zero_fraction * (
                (unique_depth - i) / (unique_depth + 1.0)
            )
        else:
            total += (pw[i] / zero_fraction) / ((unique_depth - i) / (unique_depth + 1.0))
    return total


cdef void _shap_recurse(int* feature, double* threshold, int* left, int* right,
                        double* cover, double* value, double* x, double* phi,
                        cnp.int64_t* fi, double* zf, double* of_, double* pw,
                        int node, int unique_depth, int parent_offset,
                        double parent_zero_fraction, double parent_one_fraction,
                        cnp.int64_t parent_feature_index) noexcept nogil:
    cdef int offset = parent_offset + unique_depth + 1
    cdef int i, f, hot, cold, path_index
    cdef double leaf_value, wsum, wnode
    cdef double hot_zero_fraction, cold_zero_fraction
    cdef double incoming_zero_fraction, incoming_one_fraction
    for i in range(unique_depth + 1):
        fi[offset + i] = fi[parent_offset + i]
        zf[offset + i] = zf[parent_offset + i]
        of_[offset + i] = of_[parent_offset + i]
        pw[offset + i] = pw[parent_offset + i]
    _extend_path(fi + offset, zf + offset, of_ + offset, pw + offset,
                 unique_depth, parent_zero_fraction, parent_one_fraction,
                 parent_feature_index)
    f = feature[node]
    if f < 0:
        leaf_value = value[node]
        for i in range(1, unique_depth + 1):
            wsum = _unwound_path_sum(fi + offset, zf + offset, of_ + offset,
                                     pw + offset, unique_depth, i)
            phi[fi[offset + i]] += wsum * (of_[offset + i] - zf[offset + i]) * leaf_value
        return
    if x[f] <= threshold[node]:
        hot = left[node]
        cold = right[node]
    else:
        hot = right[node]
        cold = left[node]
    wnode = cover[node]
    hot_zero_fraction = cover[hot] / wnode
    cold_zero_fraction = cover[cold] / wnode
    incoming_zero_fraction = 1.0
    incoming_one_fraction = 1.0
    path_index = 0
    while path_index <= unique_depth:
        if fi[offset + path_index] == f:
            break
        path_index += 1
    if path_index != unique_depth + 1:
        incoming_zero_fraction = zf[offset + path_index]
        incoming_one_fraction = of_[offset + path_index]
        _unwind_path(fi + offset, zf + offset, of_ + offset, pw + offset,
                     unique_depth, path_index)
        unique_depth -= 1
    _shap_recurse(feature, threshold, left, right, cover, value, x, phi,
                  fi, zf, of_, pw,
                  hot, unique_depth + 1, offset,
                  hot_zero_fraction * incoming_zero_fraction,
                  incoming_one_fraction, f)
    _shap_recurse(feature, threshold, left, right, cover, value, x, phi,
                  fi, zf, of_, pw,
                  cold, unique_depth + 1, offset,
                  cold_zero_fraction * incoming_zero_fraction, 0.0, f)


def tree_shap(feature, threshold, left, right, cover, value, max_path, x, phi):
    """See pykernels.tree_shap; identical contract and results."""
    cdef cnp.ndarray[cnp.int32_t, ndim=1] fe = np.ascontiguousarray(feature, dtype=np.int32)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] th = np.ascontiguousarray(threshold, dtype=np.float64)
    cdef cnp.ndarray[cnp.int32_t, ndim=1] le = np.ascontiguousarray(left, dtype=np.int32)
    cdef cnp.ndarray[cnp.int32_t, ndim=1] ri = np.ascontiguousarray(right, dtype=np.int32)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] co = np.ascontiguousarray(cover, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] va = np.ascontiguousarray(value, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[::1] ph = phi
    cdef Py_ssize_t size = (max_path + 2) * (max_path + 3) // 2
    cdef cnp.ndarray[cnp.int64_t, ndim=1] fi = np.zeros(size, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] zf = np.zeros(size, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] of_ = np.zeros(size, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] pw = np.zeros(size, dtype=np.float64)
    _shap_recurse(<int*> fe.data, <double*> th.data, <int*> le.data, <int*> ri.data,
                  <double*> co.data, <double*> va.data, <double*> xv.data,
                  &ph[0],
                  <cnp.int64_t*> fi.data, <double*> zf.data, <double*> of_.data,
                  <double*> pw.data,
                  0, 0, 0, 1.0, 1.0, -1)
