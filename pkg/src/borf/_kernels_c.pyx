# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled receptive-field encoder.

Must stay arithmetically identical to ``_kernels_py``: same left-to-right
summation order, no fused multiply-add (built with -ffp-contract=off).
"""

import numpy as np

from libc.math cimport sqrt, isnan, NAN


def encode_signal(
    const double[::1] x,
    double sigma_x,
    Py_ssize_t w,
    Py_ssize_t d,
    Py_ssize_t s,
    Py_ssize_t l,
    double beta,
    const double[::1] mean_bp,
    const double[::1] slope_bp,
    long long alpha_slope,
):
    cdef Py_ssize_t m = x.shape[0]
    cdef Py_ssize_t span = d * (w - 1) + 1
    if m < span:
        return np.empty(0, dtype=np.int64)
    cdef Py_ssize_t count = (m - span) // s + 1
    out_arr = np.empty(count, dtype=np.int64)
    buf_arr = np.empty(w, dtype=np.float64)
    edge_arr = np.array([k * w // l for k in range(l + 1)], dtype=np.intp)
    cdef long long[::1] out = out_arr
    cdef double[::1] v = buf_arr
    cdef Py_ssize_t[::1] edges = edge_arr

    cdef Py_ssize_t n_mbp = mean_bp.shape[0]
    cdef Py_ssize_t n_sbp = slope_bp.shape[0]
    cdef long long nan_entry = (n_mbp + 1) * alpha_slope
    cdef long long base = nan_entry + 1

    cdef Py_ssize_t f, p, k, a, b, start, cnt, i
    cdef double xv, total, mean, sq, diff, std, sv, st, tm, num, den, dt, t, seg_mean, slope
    cdef bint keep
    cdef long long code, msym, ssym, entry

    with nogil:
        for f in range(count):
            start = f * s
            total = 0.0
            cnt = 0
            for p in range(w):
                xv = x[start + p * d]
                if not isnan(xv):
                    total = total + xv
                    cnt = cnt + 1
            code = 0
            if cnt == 0:
                for k in range(l):
                    code = code * base + nan_entry
                out[f] = code
                continue
            mean = total / cnt
            sq = 0.0
            for p in range(w):
                xv = x[start + p * d]
                if not isnan(xv):
                    diff = xv - mean
                    sq = sq + diff * diff
            std = sqrt(sq / cnt)
            keep = sigma_x > 0.0 and std > 0.0 and std / sigma_x >= beta
            for p in range(w):
                xv = x[start + p * d]
                if isnan(xv):
                    v[p] = NAN
                elif keep:
                    v[p] = (xv - mean) / std
                else:
                    v[p] = 0.0
            for k in range(l):
                a = edges[k]
                b = edges[k + 1]
                sv = 0.0
                st = 0.0
                cnt = 0
                for p in range(a, b):
                    if not isnan(v[p]):
                        sv = sv + v[p]
                        st = st + <double>(d * p)
                        cnt = cnt + 1
                if cnt == 0:
                    code = code * base + nan_entry
                    continue
                seg_mean = sv / cnt
                if cnt == 1:
                    slope = 0.0
                else:
                    tm = st / cnt
                    num = 0.0
                    den = 0.0
                    for p in range(a, b):
                        if not isnan(v[p]):
                            t = <double>(d * p)
                            dt = t - tm
                            num = num + dt * (v[p] - seg_mean)
                            den = den + dt * dt
                    slope = num / den
                msym = 0
                for i in range(n_mbp):
                    if mean_bp[i] <= seg_mean:
                        msym = msym + 1
                    else:
                        break
                ssym = 0
                for i in range(n_sbp):
                    if slope_bp[i] <= slope:
                        ssym = ssym + 1
                    else:
                        break
                entry = msym * alpha_slope + ssym
                code = code * base + entry
            out[f] = code
    return out_arr
