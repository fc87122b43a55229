# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled integration kernels; semantics match ``pyref`` exactly."""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, sqrt

cnp.import_array()

ALPHA_FLOOR = 0.13
SAFETY_CAP = 10.0

cdef double _ALPHA_FLOOR = 0.13


cdef inline double _alpha(double z, double vdim) noexcept nogil:
    cdef double a
    if vdim <= 0.0:
        return _ALPHA_FLOOR
    a = 1.0 - 0.87 * exp(-z / vdim)
    if a < _ALPHA_FLOOR:
        return _ALPHA_FLOOR
    if a > 1.0:
        return 1.0
    return a


cdef inline double _drift(const long long* exps, const double* coeffs, Py_ssize_t m,
                          double v, double z, double vp, double chi, double s,
                          double v_scale) noexcept nogil:
    cdef double vals[5]
    cdef double tot = 0.0
    cdef double f
    cdef Py_ssize_t j, i
    cdef long long k, t
    vals[0] = v
    vals[1] = _alpha(z, v * v_scale)
    vals[2] = vp
    vals[3] = chi
    vals[4] = s
    for j in range(m):
        f = coeffs[j]
        for i in range(5):
            k = exps[5 * j + i]
            for t in range(k):
                f = f * vals[i]
        tot += f
    return tot


cdef inline double _clamp(double v, double lo, double hi) noexcept nogil:
    if v < lo:
        return lo
    if v > hi:
        return hi
    return v


def rollout_deterministic(exps, coeffs, v0, z, vp, chi, s, int substeps,
                          double v_scale=50.0, double clamp_lo=0.0,
                          double clamp_hi=SAFETY_CAP):
    cdef cnp.ndarray[cnp.int64_t, ndim=2, mode="c"] e = \
        np.ascontiguousarray(exps, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] c = \
        np.ascontiguousarray(coeffs, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1, mode="c"] v0a = \
        np.ascontiguousarray(v0, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] za = \
        np.ascontiguousarray(z, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] vpa = \
        np.ascontiguousarray(vp, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] ca = \
        np.ascontiguousarray(chi, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] sa = \
        np.ascontiguousarray(s, dtype=np.float64)

    cdef Py_ssize_t B = v0a.shape[0]
    cdef Py_ssize_t n = za.shape[1]
    cdef Py_ssize_t m = e.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] out = np.empty((B, n + 1))

    cdef double h = 1.0 / substeps
    cdef double v, k1, k2, k3, k4, zk, vpk, ck, sk
    cdef Py_ssize_t b, k, sub
    cdef const long long* ep = <const long long*> e.data
    cdef const double* cp
    with nogil:
        for b in range(B):
            cp = <const double*> c.data + b * m
            v = v0a[b]
            out[b, 0] = v
            for k in range(n):
                zk = za[b, k]
                vpk = vpa[b, k]
                ck = ca[b, k]
                sk = sa[b, k]
                for sub in range(substeps):
                    k1 = _drift(ep, cp, m, v, zk, vpk, ck, sk, v_scale)
                    k2 = _drift(ep, cp, m, v + 0.5 * h * k1, zk, vpk, ck, sk, v_scale)
                    k3 = _drift(ep, cp, m, v + 0.5 * h * k2, zk, vpk, ck, sk, v_scale)
                    k4 = _drift(ep, cp, m, v + h * k3, zk, vpk, ck, sk, v_scale)
                    v = v + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
                    v = _clamp(v, clamp_lo, clamp_hi)
                out[b, k + 1] = v
    return np.asarray(out)


def rollout_stochastic(exps, coeffs, v0, z, vp, chi, s, int substeps,
                       double sigma_slope, double sigma_intercept, noise,
                       double v_scale=50.0, double clamp_lo=0.0,
                       double clamp_hi=SAFETY_CAP):
    cdef cnp.ndarray[cnp.int64_t, ndim=2, mode="c"] e = \
        np.ascontiguousarray(exps, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1, mode="c"] c = \
        np.ascontiguousarray(coeffs, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1, mode="c"] v0a = \
        np.ascontiguousarray(v0, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1, mode="c"] za = \
        np.ascontiguousarray(z, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1, mode="c"] vpa = \
        np.ascontiguousarray(vp, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1, mode="c"] ca = \
        np.ascontiguousarray(chi, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1, mode="c"] sa = \
        np.ascontiguousarray(s, dtype=np.float64)

    cdef Py_ssize_t B = v0a.shape[0]
    cdef Py_ssize_t n = za.shape[0]
    cdef Py_ssize_t m = e.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] out = np.empty((B, n + 1))

    cdef bint has_noise = noise is not None
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] xi
    if has_noise:
        xi = np.ascontiguousarray(noise, dtype=np.float64)
    else:
        xi = np.empty((1, 1))

    cdef double h = 1.0 / substeps
    cdef double sqh = sqrt(h)
    cdef double v, f, sig
    cdef Py_ssize_t b, k, sub
    cdef const long long* ep = <const long long*> e.data
    cdef const double* cp = <const double*> c.data
    with nogil:
        for b in range(B):
            v = v0a[b]
            out[b, 0] = v
            for k in range(n):
                for sub in range(substeps):
                    f = _drift(ep, cp, m, v, za[k], vpa[k], ca[k], sa[k], v_scale)
                    if has_noise:
                        sig = sigma_slope * v + sigma_intercept
                        if sig < 0.0:
                            sig = 0.0
                        v = v + h * f + sig * sqh * xi[b, k * substeps + sub]
                    else:
                        v = v + h * f
                    v = _clamp(v, clamp_lo, clamp_hi)
                out[b, k + 1] = v
    return np.asarray(out)
