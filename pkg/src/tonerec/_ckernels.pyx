# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled loop kernels: spectral channel contraction, max-pool scan/scatter,
CTC lattice, edit-distance table."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, INFINITY

cnp.import_array()

ctypedef fused real_t:
    float
    double

DEF FBLOCK = 128


cdef void _cmac(real_t[:, :, :] a, real_t[:, :, :] b, real_t[:, :, ::1] out,
                bint conj_b) noexcept nogil:
    # complex arrays viewed as interleaved (re, im) reals; last axis is 2*F and
    # unit-stride (guaranteed by _real_view), leading axes may be strided
    cdef Py_ssize_t N = a.shape[0], R = a.shape[1], M = b.shape[0]
    cdef Py_ssize_t F = a.shape[2] // 2
    cdef Py_ssize_t f0, fl, n, m, r, f
    cdef real_t acc_re[FBLOCK]
    cdef real_t acc_im[FBLOCK]
    cdef real_t *pa
    cdef real_t *pb
    cdef real_t sgn = -1.0 if conj_b else 1.0
    cdef real_t ar, ai, br, bi
    for f0 in range(0, F, FBLOCK):
        fl = FBLOCK if f0 + FBLOCK <= F else F - f0
        for n in range(N):
            for m in range(M):
                for f in range(fl):
                    acc_re[f] = 0
                    acc_im[f] = 0
                for r in range(R):
                    pa = &a[n, r, 2 * f0]
                    pb = &b[m, r, 2 * f0]
                    for f in range(fl):
                        ar = pa[2 * f]
                        ai = pa[2 * f + 1]
                        br = pb[2 * f]
                        bi = sgn * pb[2 * f + 1]
                        acc_re[f] += ar * br - ai * bi
                        acc_im[f] += ar * bi + ai * br
                pa = &out[n, m, 2 * f0]
                for f in range(fl):
                    pa[2 * f] = acc_re[f]
                    pa[2 * f + 1] = acc_im[f]


def _real_view(a):
    if a.strides[a.ndim - 1] != a.itemsize:
        a = np.ascontiguousarray(a)
    return a.view(a.real.dtype)


def cmac(a, b, bint conj_b=False):
    """``out[n, m, f] = sum_r a[n, r, f] * b[m, r, f]``, ``b`` optionally conjugated."""
    N, R, F = a.shape
    if b.shape[1] != R or b.shape[2] != F or b.dtype != a.dtype:
        raise ValueError("cmac operands disagree in shape or dtype")
    out = np.empty((N, b.shape[0], F), dtype=a.dtype)
    ra, rb, ro = _real_view(a), _real_view(b), out.view(out.real.dtype)
    if ro.dtype == np.float32:
        _cmac[float](ra, rb, ro, conj_b)
    elif ro.dtype == np.float64:
        _cmac[double](ra, rb, ro, conj_b)
    else:
        raise TypeError(f"unsupported dtype {a.dtype}")
    return out


def maxpool_forward(real_t[:, :, ::1] x, int size, int stride):
    cdef Py_ssize_t C = x.shape[0], H = x.shape[1], W = x.shape[2]
    cdef Py_ssize_t Ho = (H - size) // stride + 1
    cdef Py_ssize_t Wo = (W - size) // stride + 1
    dtype = np.float32 if real_t is float else np.float64
    out = np.empty((C, Ho, Wo), dtype=dtype)
    idx = np.empty((C, Ho, Wo), dtype=np.int64)
    cdef real_t[:, :, ::1] o = out
    cdef cnp.int64_t[:, :, ::1] a = idx
    cdef Py_ssize_t c, i, j, di, dj, r0, c0, best_i
    cdef real_t best, v
    for c in range(C):
        for i in range(Ho):
            r0 = i * stride
            for j in range(Wo):
                c0 = j * stride
                best = x[c, r0, c0]
                best_i = r0 * W + c0
                for di in range(size):
                    for dj in range(size):
                        v = x[c, r0 + di, c0 + dj]
                        if v > best:
                            best = v
                            best_i = (r0 + di) * W + c0 + dj
                o[c, i, j] = best
                a[c, i, j] = best_i
    return out, idx


def maxpool_backward(real_t[:, :, ::1] grad_out, cnp.int64_t[:, :, ::1] argmax,
                     Py_ssize_t H, Py_ssize_t W):
    cdef Py_ssize_t C = grad_out.shape[0], Ho = grad_out.shape[1], Wo = grad_out.shape[2]
    dtype = np.float32 if real_t is float else np.float64
    grad_in = np.zeros((C, H * W), dtype=dtype)
    cdef real_t[:, ::1] g = grad_in
    cdef Py_ssize_t c, i, j
    for c in range(C):
        for i in range(Ho):
            for j in range(Wo):
                g[c, argmax[c, i, j]] += grad_out[c, i, j]
    return grad_in.reshape(C, H, W)


cdef inline double _lse2(double a, double b) nogil:
    cdef double m
    if a == -INFINITY:
        return b
    if b == -INFINITY:
        return a
    m = a if a > b else b
    return m + log(exp(a - m) + exp(b - m))


def ctc_alpha_beta(double[:, ::1] logp, cnp.int64_t[::1] ext, Py_ssize_t blank=0):
    cdef Py_ssize_t T = logp.shape[0], S = ext.shape[0]
    alpha_arr = np.full((T, S), -np.inf)
    beta_arr = np.full((T, S), -np.inf)
    cdef double[:, ::1] alpha = alpha_arr
    cdef double[:, ::1] beta = beta_arr
    cdef Py_ssize_t t, s
    cdef double acc
    alpha[0, 0] = logp[0, ext[0]]
    if S > 1:
        alpha[0, 1] = logp[0, ext[1]]
    for t in range(1, T):
        for s in range(S):
            acc = alpha[t - 1, s]
            if s >= 1:
                acc = _lse2(acc, alpha[t - 1, s - 1])
            if s >= 2 and ext[s] != blank and ext[s] != ext[s - 2]:
                acc = _lse2(acc, alpha[t - 1, s - 2])
            if acc != -INFINITY:
                alpha[t, s] = acc + logp[t, ext[s]]
    beta[T - 1, S - 1] = 0.0
    if S > 1:
        beta[T - 1, S - 2] = 0.0
    for t in range(T - 2, -1, -1):
        for s in range(S):
            acc = beta[t + 1, s] + logp[t + 1, ext[s]]
            if s + 1 < S:
                acc = _lse2(acc, beta[t + 1, s + 1] + logp[t + 1, ext[s + 1]])
            if s + 2 < S and ext[s + 2] != blank and ext[s + 2] != ext[s]:
                acc = _lse2(acc, beta[t + 1, s + 2] + logp[t + 1, ext[s + 2]])
            beta[t, s] = acc
    return alpha_arr, beta_arr


def edit_table(cnp.int64_t[::1] hyp, cnp.int64_t[::1] ref):
    cdef Py_ssize_t n = ref.shape[0], m = hyp.shape[0]
    table = np.empty((n + 1, m + 1), dtype=np.int64)
    cdef cnp.int64_t[:, ::1] d = table
    cdef Py_ssize_t i, j
    cdef cnp.int64_t best, v
    for i in range(n + 1):
        d[i, 0] = i
    for j in range(m + 1):
        d[0, j] = j
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            best = d[i - 1, j - 1] + (ref[i - 1] != hyp[j - 1])
            v = d[i - 1, j] + 1
            if v < best:
                best = v
            v = d[i, j - 1] + 1
            if v < best:
                best = v
            d[i, j] = best
    return table
