# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: single-pass C loops, same contracts as
``_kernels_py``."""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def twist_scan(raw, desired):
    """See ``_kernels_py.twist_scan``."""
    cdef cnp.int8_t[::1] x = np.ascontiguousarray(raw, dtype=np.int8)
    cdef cnp.int8_t[::1] want = np.ascontiguousarray(desired, dtype=np.int8)
    cdef Py_ssize_t n_raw = x.shape[0]
    cdef Py_ssize_t n_want = want.shape[0]

    out_arr = np.empty(n_raw, dtype=np.int8)
    stops_arr = np.empty(n_want, dtype=np.int64)
    cdef cnp.int8_t[::1] out = out_arr
    cdef cnp.int64_t[::1] stops = stops_arr

    cdef long long s = 0, s_anchor = 0
    cdef Py_ssize_t n, j, start = 0, k = 0
    cdef cnp.int8_t mult
    for n in range(n_raw):
        if k >= n_want:
            break
        s += x[n]
        if s - s_anchor == 2 or s_anchor - s == 2:
            mult = 1 if (s > s_anchor) == (want[k] > 0) else -1
            for j in range(start, n + 1):
                out[j] = mult * x[j]
            stops[k] = n + 1
            k += 1
            s_anchor = s
            start = n + 1
    return out_arr[:start], stops_arr[:k]


def lattice_step_back(next_values, double q_up, double inv_gross):
    """See ``_kernels_py.lattice_step_back``."""
    cdef cnp.float64_t[::1] nxt = np.ascontiguousarray(
        next_values, dtype=np.float64)
    cdef Py_ssize_t n = nxt.shape[0] - 1
    out_arr = np.empty(n, dtype=np.float64)
    cdef cnp.float64_t[::1] out = out_arr
    cdef double q_down = 1.0 - q_up
    cdef Py_ssize_t i
    for i in range(n):
        out[i] = inv_gross * (q_up * nxt[i + 1] + q_down * nxt[i])
    return out_arr


def sup_diff_nested(fine, coarse, int gap2, double scale_fine,
                    double scale_coarse):
    """See ``_kernels_py.sup_diff_nested``."""
    cdef cnp.int32_t[::1] f = np.ascontiguousarray(fine, dtype=np.int32)
    cdef cnp.int32_t[::1] c = np.ascontiguousarray(coarse, dtype=np.int32)
    cdef Py_ssize_t n_fine = f.shape[0] - 1
    cdef Py_ssize_t span = (<Py_ssize_t>1) << gap2
    cdef Py_ssize_t needed = ((n_fine - 1) >> gap2) + 2 if n_fine >= 1 else 1
    if c.shape[0] < needed:
        raise ValueError("coarse path too short for the fine path length")

    cdef double best = 0.0, dev, interp, frac
    cdef double inv_span = 1.0 / span
    cdef Py_ssize_t j, idx, rem
    cdef long long base, step
    for j in range(n_fine + 1):
        idx = j >> gap2
        rem = j & (span - 1)
        base = c[idx]
        if rem == 0:
            interp = scale_coarse * base
        else:
            step = c[idx + 1] - base
            frac = rem * inv_span
            interp = scale_coarse * (base + frac * step)
        dev = scale_fine * f[j] - interp
        if dev < 0.0:
            dev = -dev
        if dev > best:
            best = dev
    return best
