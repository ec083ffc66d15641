"""Gated recurrent unit and its bidirectional wrapper, with hand-written BPTT.

Gate order in the packed weight matrices is ``[update z | reset r | candidate]``:

    z_t = sigmoid(x_t Wx_z + h_{t-1} Wh_z + b_z)
    r_t = sigmoid(x_t Wx_r + h_{t-1} Wh_r + b_r)
    c_t = tanh(x_t Wx_c + (r_t * h_{t-1}) Wh_c + b_c)
    h_t = (1 - z_t) * h_{t-1} + z_t * c_t
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


@dataclass
class GruCell:
    wx: np.ndarray   # (D, 3H)
    wh: np.ndarray   # (H, 3H)
    b: np.ndarray    # (3H,)

    @property
    def hidden_size(self) -> int:
        return self.wh.shape[0]

    @property
    def input_size(self) -> int:
        return self.wx.shape[0]

    @classmethod
    def zeros(cls, input_size, hidden_size, dtype=np.float64):
        return cls(np.zeros((input_size, 3 * hidden_size), dtype),
                   np.zeros((hidden_size, 3 * hidden_size), dtype),
                   np.zeros(3 * hidden_size, dtype))


def gru_forward(cell: GruCell, inputs, h0=None):
    """Run the recurrence over ``inputs`` of shape ``(T, D)``; returns ``(T, H)`` and a cache."""
    inputs = np.asarray(inputs)
    if inputs.ndim != 2 or inputs.shape[1] != cell.input_size:
        raise ValueError(f"expected inputs of shape (T, {cell.input_size}), got {inputs.shape}")
    H = cell.hidden_size
    T = inputs.shape[0]
    h = np.zeros(H, cell.wh.dtype) if h0 is None else np.asarray(h0, cell.wh.dtype)
    if h.shape != (H,):
        raise ValueError(f"h0 must have shape ({H},)")
    pre = inputs @ cell.wx + cell.b
    wh_zr, wh_c = cell.wh[:, : 2 * H], cell.wh[:, 2 * H:]
    out = np.empty((T, H), cell.wh.dtype)
    prev = np.empty((T, H), cell.wh.dtype)
    z_all = np.empty((T, H), cell.wh.dtype)
    r_all = np.empty((T, H), cell.wh.dtype)
    c_all = np.empty((T, H), cell.wh.dtype)
    for t in range(T):
        prev[t] = h
        zr = sigmoid(pre[t, : 2 * H] + h @ wh_zr)
        z, r = zr[:H], zr[H:]
        c = np.tanh(pre[t, 2 * H:] + (r * h) @ wh_c)
        h = (1.0 - z) * h + z * c
        out[t], z_all[t], r_all[t], c_all[t] = h, z, r, c
    cache = (inputs, prev, z_all, r_all, c_all)
    return out, cache


def gru_backward(cell: GruCell, cache, grad_out):
    """BPTT. Returns ``(d_inputs, d_h0, GruCell of parameter gradients)``."""
    inputs, prev, z_all, r_all, c_all = cache
    H = cell.hidden_size
    T = inputs.shape[0]
    wh_zr_t = cell.wh[:, : 2 * H].T
    wh_c_t = cell.wh[:, 2 * H:].T
    d_pre = np.empty((T, 3 * H), cell.wh.dtype)
    rh = r_all * prev
    dh_next = np.zeros(H, cell.wh.dtype)
    for t in range(T - 1, -1, -1):
        dh = grad_out[t] + dh_next
        z, r, c, hp = z_all[t], r_all[t], c_all[t], prev[t]
        dc = dh * z * (1.0 - c * c)
        drh = dc @ wh_c_t
        dz = dh * (c - hp) * z * (1.0 - z)
        dr = drh * hp * r * (1.0 - r)
        d_pre[t, :H], d_pre[t, H: 2 * H], d_pre[t, 2 * H:] = dz, dr, dc
        dh_next = dh * (1.0 - z) + drh * r + d_pre[t, : 2 * H] @ wh_zr_t
    dwh = np.empty_like(cell.wh)
    dwh[:, : 2 * H] = prev.T @ d_pre[:, : 2 * H]
    dwh[:, 2 * H:] = rh.T @ d_pre[:, 2 * H:]
    grads = GruCell(wx=inputs.T @ d_pre, wh=dwh, b=d_pre.sum(axis=0))
    return d_pre @ cell.wx.T, dh_next, grads


def bigru_forward(fwd: GruCell, bwd: GruCell, inputs):
    """Concatenate a left-to-right and a right-to-left pass: ``(T, 2H)``."""
    out_f, cache_f = gru_forward(fwd, inputs)
    out_b, cache_b = gru_forward(bwd, inputs[::-1])
    return np.concatenate([out_f, out_b[::-1]], axis=1), (cache_f, cache_b)


def bigru_backward(fwd: GruCell, bwd: GruCell, cache, grad_out):
    cache_f, cache_b = cache
    H = fwd.hidden_size
    dx_f, _, g_f = gru_backward(fwd, cache_f, grad_out[:, :H])
    dx_b, _, g_b = gru_backward(bwd, cache_b, grad_out[::-1, H:])
    return dx_f + dx_b[::-1], g_f, g_b
