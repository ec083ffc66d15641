"""Forward/backward passes for conv2d, max-pool, ReLU, dropout and affine layers.

Convolutions run in the frequency domain over a whole batch at once: every
utterance is zero-padded to the batch's widest input, one FFT grid serves
forward, input-gradient and kernel-gradient contractions, and each output is
cropped back to its own valid region. The crop makes the result identical to
independent per-utterance valid convolution (up to FFT rounding).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from .. import kernels


# ---------------------------------------------------------------- convolution

@dataclass
class ConvCache:
    xf: np.ndarray          # (B, Ci, Nh, Nw//2+1) spectra of padded inputs
    kf: np.ndarray          # (Co, Ci, Nh, Nw//2+1) spectra of flipped kernels
    grid: tuple             # (Nh, Nw)
    in_shapes: list         # per-utterance (Ci, H, W)
    kernel_hw: tuple


def _flat(spec):
    """Merge the two frequency axes: ``(A, B, Nh, Nf)`` -> ``(A, B, Nh*Nf)``."""
    return spec.reshape(spec.shape[0], spec.shape[1], -1)


def _kernel_spectrum(weight, grid):
    """2-D real FFT of the flipped kernels zero-padded to ``grid``."""
    flipped = weight[:, :, ::-1, ::-1]
    cols = sfft.rfft(flipped, n=grid[1], axis=-1)       # only kh nonzero rows
    return sfft.fft(cols, n=grid[0], axis=-2)


def conv_output_size(n: int, k: int) -> int:
    return n - k + 1


def _check_inputs(xs, weight):
    _, ci, kh, kw = weight.shape
    H = xs[0].shape[1]
    for x in xs:
        if x.ndim != 3 or x.shape[0] != ci:
            raise ValueError(f"expected input with {ci} channels, got shape {x.shape}")
        if x.shape[1] != H:
            raise ValueError("all inputs in a batch must share the height axis")
        if x.shape[1] < kh or x.shape[2] < kw:
            raise ValueError("input too small")
    return H


def conv2d_forward_batch(xs, weight, bias):
    """Valid, stride-1 cross-correlation of each ``(Ci, H, W_b)`` input.

    Returns the list of ``(Co, H-kh+1, W_b-kw+1)`` outputs and a cache for
    :func:`conv2d_backward_batch`.
    """
    co, ci, kh, kw = weight.shape
    H = _check_inputs(xs, weight)
    widths = [x.shape[2] for x in xs]
    grid = (sfft.next_fast_len(H, real=True), sfft.next_fast_len(max(widths), real=True))
    dtype = weight.dtype
    padded = np.zeros((len(xs), ci) + grid, dtype=dtype)
    for b, x in enumerate(xs):
        padded[b, :, :H, : x.shape[2]] = x
    xf = sfft.rfft2(padded)
    kf = _kernel_spectrum(weight, grid)
    yf = kernels.cmac(_flat(xf), _flat(kf)).reshape((len(xs), co) + xf.shape[2:])
    y = sfft.irfft2(yf, s=grid)
    outs = [
        (y[b, :, kh - 1: H, kw - 1: w] + bias[:, None, None]).astype(dtype, copy=False)
        for b, w in enumerate(widths)
    ]
    cache = ConvCache(xf=xf, kf=kf, grid=grid, in_shapes=[x.shape for x in xs],
                      kernel_hw=(kh, kw))
    return outs, cache


def conv2d_backward_batch(cache: ConvCache, grads, need_input_grad=True):
    """Gradients w.r.t. inputs (list, or None), kernels and biases."""
    kh, kw = cache.kernel_hw
    ci, H = cache.in_shapes[0][0], cache.in_shapes[0][1]
    co = grads[0].shape[0]
    dtype = grads[0].dtype
    g = np.zeros((len(grads), co) + cache.grid, dtype=dtype)
    for b, gy in enumerate(grads):
        g[b, :, kh - 1: H, kw - 1: kw - 1 + gy.shape[2]] = gy
    gf = sfft.rfft2(g)
    gf_t = _flat(gf).transpose(1, 0, 2)
    gkf = kernels.cmac(gf_t, _flat(cache.xf).transpose(1, 0, 2), conj_b=True)
    gkf = gkf.reshape((co, ci) + gf.shape[2:])
    # only the kh x kw corner of the inverse is needed
    rows = sfft.ifft(gkf, axis=-2)[:, :, :kh, :]
    gk = sfft.irfft(rows, n=cache.grid[1], axis=-1)[:, :, :, :kw][:, :, ::-1, ::-1]
    gw = np.ascontiguousarray(gk, dtype=dtype)
    gb = np.sum([gy.sum(axis=(1, 2)) for gy in grads], axis=0).astype(dtype)
    gxs = None
    if need_input_grad:
        gxf = kernels.cmac(_flat(gf), _flat(cache.kf).transpose(1, 0, 2), conj_b=True)
        gxf = gxf.reshape((len(grads), ci) + gf.shape[2:])
        gx = sfft.irfft2(gxf, s=cache.grid)
        gxs = [gx[b, :, :H, : s[2]].astype(dtype) for b, s in enumerate(cache.in_shapes)]
    return gxs, gw, gb


def conv2d_forward(x, weight, bias):
    """Single-input convenience wrapper around :func:`conv2d_forward_batch`."""
    return conv2d_forward_batch([x], weight, bias)[0][0]


# -------------------------------------------------------------------- pooling

def pool_output_size(n: int, size: int, stride: int) -> int:
    return (n - size) // stride + 1


def maxpool_forward(x, size=4, stride=2):
    """Max-pool a ``(C, H, W)`` map; returns output and flat argmax indices.

    Ties resolve to the first maximum in row-major window order.
    """
    if x.shape[1] < size or x.shape[2] < size:
        raise ValueError("input smaller than pooling window")
    return kernels.maxpool_forward(x, size, stride)


def maxpool_backward(grad_out, argmax, in_shape):
    _, H, W = in_shape
    return kernels.maxpool_backward(grad_out, argmax, H, W)


# ------------------------------------------------------- pointwise and affine

def relu(x):
    return np.maximum(x, 0)


def relu_backward(grad, x):
    return grad * (x > 0)


def dropout(x, rate, train, rng):
    """Inverted dropout. Returns ``(output, mask)``; mask is None when inactive."""
    if not 0 <= rate < 1:
        raise ValueError("dropout rate must be in [0, 1)")
    if not train or rate == 0:
        return x, None
    keep = rng.random(x.shape) >= rate
    mask = keep.astype(x.dtype) / x.dtype.type(1.0 - rate)
    return x * mask, mask


def dropout_backward(grad, mask):
    return grad if mask is None else grad * mask


def affine_forward(x, weight, bias):
    return x @ weight + bias


def affine_backward(grad, x, weight):
    return grad @ weight.T, x.T @ grad, grad.sum(axis=0)


def stack_features(conv_out):
    """``(C, H, T)`` -> ``(T, C*H)``; channel c occupies columns ``c*H:(c+1)*H``."""
    C, H, T = conv_out.shape
    return np.ascontiguousarray(conv_out.transpose(2, 0, 1).reshape(T, C * H))


def unstack_features(stacked, C, H):
    T = stacked.shape[0]
    return np.ascontiguousarray(stacked.reshape(T, C, H).transpose(1, 2, 0))
