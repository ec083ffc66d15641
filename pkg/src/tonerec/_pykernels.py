"""Numpy implementations of the loop kernels (fallback for ``_ckernels``)."""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def cmac(a, b, conj_b=False):
    """``out[n, m, f] = sum_r a[n, r, f] * b[m, r, f]``, ``b`` optionally conjugated."""
    if conj_b:
        b = b.conj()
    return np.einsum("nrf,mrf->nmf", a, b, optimize=True)


def maxpool_forward(x, size, stride):
    C, H, W = x.shape
    win = sliding_window_view(x, (size, size), axis=(1, 2))[:, ::stride, ::stride]
    Ho, Wo = win.shape[1], win.shape[2]
    flat = win.reshape(C, Ho, Wo, size * size)
    k = flat.argmax(axis=-1)  # first maximum in row-major window order
    out = np.take_along_axis(flat, k[..., None], axis=-1)[..., 0]
    di, dj = np.divmod(k, size)
    rows = np.arange(Ho)[:, None] * stride + di
    cols = np.arange(Wo)[None, :] * stride + dj
    return np.ascontiguousarray(out), (rows * W + cols).astype(np.int64)


def maxpool_backward(grad_out, argmax, H, W):
    C = grad_out.shape[0]
    offsets = (np.arange(C, dtype=np.int64) * (H * W))[:, None, None]
    flat = np.bincount((argmax + offsets).ravel(),
                       weights=grad_out.ravel().astype(np.float64),
                       minlength=C * H * W)
    return flat.astype(grad_out.dtype).reshape(C, H, W)


def ctc_alpha_beta(logp, ext, blank=0):
    T, S = logp.shape[0], ext.shape[0]
    emit = logp[:, ext]  # (T, S)
    skip = np.zeros(S, dtype=bool)
    skip[2:] = (ext[2:] != blank) & (ext[2:] != ext[:-2])
    alpha = np.full((T, S), -np.inf)
    beta = np.full((T, S), -np.inf)
    alpha[0, 0] = emit[0, 0]
    if S > 1:
        alpha[0, 1] = emit[0, 1]
    with np.errstate(invalid="ignore"):
        for t in range(1, T):
            prev = alpha[t - 1]
            cand = np.full((3, S), -np.inf)
            cand[0] = prev
            cand[1, 1:] = prev[:-1]
            cand[2, 2:] = np.where(skip[2:], prev[:-2], -np.inf)
            alpha[t] = _logsumexp0(cand) + emit[t]
        beta[T - 1, S - 1] = 0.0
        if S > 1:
            beta[T - 1, S - 2] = 0.0
        skip_fwd = np.zeros(S, dtype=bool)
        skip_fwd[:-2] = skip[2:]
        for t in range(T - 2, -1, -1):
            nxt = beta[t + 1] + emit[t + 1]
            cand = np.full((3, S), -np.inf)
            cand[0] = nxt
            cand[1, :-1] = nxt[1:]
            cand[2, :-2] = np.where(skip_fwd[:-2], nxt[2:], -np.inf)
            beta[t] = _logsumexp0(cand)
    return alpha, beta


def _logsumexp0(a):
    m = a.max(axis=0)
    safe = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        return safe + np.log(np.exp(a - safe).sum(axis=0))


def edit_table(hyp, ref):
    n, m = len(ref), len(hyp)
    d = np.empty((n + 1, m + 1), dtype=np.int64)
    d[:, 0] = np.arange(n + 1)
    d[0, :] = np.arange(m + 1)
    for i in range(1, n + 1):
        r = ref[i - 1]
        for j in range(1, m + 1):
            d[i, j] = min(d[i - 1, j - 1] + (r != hyp[j - 1]),
                          d[i - 1, j] + 1, d[i, j - 1] + 1)
    return d
