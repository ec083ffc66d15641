"""The tone recognizer network: conv/pool/ReLU x3 -> dropout -> stack -> BiGRU -> affine."""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from . import layers
from .gru import GruCell, bigru_backward, bigru_forward

TOO_SHORT = "utterance too short for receptive field"


@dataclass
class ModelConfig:
    input_bins: int = 256
    conv_layers: int = 3
    conv_channels: int = 16
    kernel_size: int = 11
    pool_size: int = 4
    pool_stride: int = 2
    hidden_size: int = 128
    dropout: float = 0.5
    num_outputs: int = 6
    dtype: str = "float32"

    def __post_init__(self):
        if self.num_outputs < 2:
            raise ValueError("num_outputs must include the blank and at least one label")
        if not 0 <= self.dropout < 1:
            raise ValueError("dropout must be in [0, 1)")
        if min(self.conv_layers, self.conv_channels, self.kernel_size,
               self.pool_size, self.pool_stride, self.hidden_size) < 1:
            raise ValueError("layer sizes must be positive")
        np.dtype(self.dtype)
        if self.feature_bins < 1:
            raise ValueError("input_bins too small for the conv stack")

    def _stage(self, n: int) -> int:
        n = layers.conv_output_size(n, self.kernel_size)
        if n < self.pool_size:
            return 0
        return layers.pool_output_size(n, self.pool_size, self.pool_stride)

    def _chain(self, n: int) -> int:
        for _ in range(self.conv_layers):
            n = self._stage(n)
            if n < 1:
                return 0
        return n

    @property
    def feature_bins(self) -> int:
        """Quefrency extent of the last conv/pool stage."""
        return self._chain(self.input_bins)

    @property
    def rnn_input_size(self) -> int:
        return self.conv_channels * self.feature_bins

    def output_steps(self, frames: int) -> int:
        """Number of logit rows for an input of ``frames`` frames (0 if too short)."""
        return self._chain(frames)

    def min_frames(self) -> int:
        n = 1
        while self.output_steps(n) < 1:
            n += 1
        return n

    def layer_rows(self):
        """Human-readable layer list in network order."""
        k, c = self.kernel_size, self.conv_channels
        rows = []
        for _ in range(self.conv_layers):
            rows += [("conv2d", f"{k}x{k}, {c} lifters, stride 1"),
                     ("pool", f"{self.pool_size}x{self.pool_size}, max, stride {self.pool_stride}"),
                     ("activation", "ReLU")]
        rows += [("dropout", f"{self.dropout:.0%}"),
                 ("recurrent", f"BiGRU, {self.hidden_size} hidden units"),
                 ("affine", f"{self.num_outputs} outputs")]
        return rows


def parameter_names(cfg: ModelConfig):
    names = []
    for i in range(1, cfg.conv_layers + 1):
        names += [f"conv{i}.weight", f"conv{i}.bias"]
    for d in ("gru_fwd", "gru_bwd"):
        names += [f"{d}.wx", f"{d}.wh", f"{d}.b"]
    names += ["affine.weight", "affine.bias"]
    return names


def parameter_shapes(cfg: ModelConfig):
    shapes = OrderedDict()
    k, c, h = cfg.kernel_size, cfg.conv_channels, cfg.hidden_size
    for i in range(1, cfg.conv_layers + 1):
        shapes[f"conv{i}.weight"] = (c, 1 if i == 1 else c, k, k)
        shapes[f"conv{i}.bias"] = (c,)
    for d in ("gru_fwd", "gru_bwd"):
        shapes[f"{d}.wx"] = (cfg.rnn_input_size, 3 * h)
        shapes[f"{d}.wh"] = (h, 3 * h)
        shapes[f"{d}.b"] = (3 * h,)
    shapes["affine.weight"] = (2 * h, cfg.num_outputs)
    shapes["affine.bias"] = (cfg.num_outputs,)
    return shapes


@dataclass
class ForwardCache:
    conv: list = field(default_factory=list)    # per layer: (ConvCache, pre-pool shapes, argmaxes, pooled)
    stacked_shape: list = field(default_factory=list)
    dropout_masks: list = field(default_factory=list)
    rnn_inputs: list = field(default_factory=list)
    gru: list = field(default_factory=list)
    rnn_outputs: list = field(default_factory=list)


class ToneRecognizer:
    """Parameters plus batched forward and backward passes.

    ``params`` is an ordered mapping from name to array; the order is the
    one used by checkpoints.
    """

    def __init__(self, cfg: ModelConfig | None = None, params=None, seed: int = 0):
        self.cfg = cfg or ModelConfig()
        if params is None:
            params = self.init_params(self.cfg, seed)
        self.params = OrderedDict((n, np.asarray(params[n], dtype=self.cfg.dtype))
                                  for n in parameter_names(self.cfg))
        for name, shape in parameter_shapes(self.cfg).items():
            if self.params[name].shape != shape:
                raise ValueError(f"parameter {name} has shape {self.params[name].shape}, "
                                 f"expected {shape}")

    @staticmethod
    def init_params(cfg: ModelConfig, seed: int = 0):
        # uniform +-sqrt(1/fan_in) weights, zero biases
        rng = np.random.default_rng(seed)
        params = OrderedDict()
        for name, shape in parameter_shapes(cfg).items():
            if name.endswith("bias") or name.endswith(".b"):
                params[name] = np.zeros(shape, dtype=cfg.dtype)
                continue
            fan_in = int(np.prod(shape[1:])) if name.startswith("conv") else shape[0]
            bound = np.sqrt(1.0 / fan_in)
            params[name] = rng.uniform(-bound, bound, size=shape).astype(cfg.dtype)
        return params

    def cell(self, direction: str) -> GruCell:
        p = self.params
        return GruCell(p[f"{direction}.wx"], p[f"{direction}.wh"], p[f"{direction}.b"])

    def num_parameters(self) -> int:
        return sum(p.size for p in self.params.values())

    # ------------------------------------------------------------ forward

    def _check_input(self, x):
        x = np.asarray(x)
        if x.ndim != 2 or x.shape[0] != self.cfg.input_bins:
            raise ValueError(f"expected features of shape ({self.cfg.input_bins}, frames), "
                             f"got {x.shape}")
        if self.cfg.output_steps(x.shape[1]) < 1:
            raise ValueError(TOO_SHORT)
        return x.astype(self.cfg.dtype, copy=False)

    def forward(self, batch, train=False, rng=None):
        """Logits for each ``(bins, frames)`` feature map in ``batch``.

        Returns ``(list of (T', num_outputs) arrays, ForwardCache)``.
        """
        cfg = self.cfg
        if train and cfg.dropout > 0 and rng is None:
            raise ValueError("train mode with dropout needs an rng")
        acts = [self._check_input(x)[None] for x in batch]
        cache = ForwardCache()
        for i in range(1, cfg.conv_layers + 1):
            ys, ccache = layers.conv2d_forward_batch(
                acts, self.params[f"conv{i}.weight"], self.params[f"conv{i}.bias"])
            pooled, argmaxes = [], []
            for y in ys:
                p, a = layers.maxpool_forward(y, cfg.pool_size, cfg.pool_stride)
                pooled.append(p)
                argmaxes.append(a)
            cache.conv.append((ccache, [y.shape for y in ys], argmaxes, pooled))
            acts = [layers.relu(p) for p in pooled]
        fwd, bwd = self.cell("gru_fwd"), self.cell("gru_bwd")
        logits = []
        for a in acts:
            cache.stacked_shape.append(a.shape)
            feats = layers.stack_features(a)
            feats, mask = layers.dropout(feats, cfg.dropout, train, rng)
            cache.dropout_masks.append(mask)
            cache.rnn_inputs.append(feats)
            hs, gcache = bigru_forward(fwd, bwd, feats)
            cache.gru.append(gcache)
            cache.rnn_outputs.append(hs)
            logits.append(layers.affine_forward(hs, self.params["affine.weight"],
                                                self.params["affine.bias"]))
        return logits, cache

    def logits(self, features):
        """Eval-mode logits for a single ``(bins, frames)`` feature map."""
        return self.forward([features])[0][0]

    # ----------------------------------------------------------- backward

    def backward(self, cache: ForwardCache, logit_grads):
        """Parameter gradients (ordered like ``params``) summed over the batch."""
        cfg = self.cfg
        grads = OrderedDict((n, np.zeros_like(p)) for n, p in self.params.items())
        fwd, bwd = self.cell("gru_fwd"), self.cell("gru_bwd")
        acts_grad = []
        for b, g in enumerate(logit_grads):
            g = np.asarray(g, dtype=cfg.dtype)
            dh, dw, db = layers.affine_backward(g, cache.rnn_outputs[b],
                                                self.params["affine.weight"])
            grads["affine.weight"] += dw
            grads["affine.bias"] += db
            dx, g_f, g_b = bigru_backward(fwd, bwd, cache.gru[b], dh)
            for d, gc in (("gru_fwd", g_f), ("gru_bwd", g_b)):
                grads[f"{d}.wx"] += gc.wx
                grads[f"{d}.wh"] += gc.wh
                grads[f"{d}.b"] += gc.b
            dx = layers.dropout_backward(dx, cache.dropout_masks[b])
            C, H, _ = cache.stacked_shape[b]
            acts_grad.append(layers.unstack_features(dx, C, H))
        for i in range(cfg.conv_layers, 0, -1):
            ccache, pre_shapes, argmaxes, pooled = cache.conv[i - 1]
            conv_grads = []
            for g, shape, a, p in zip(acts_grad, pre_shapes, argmaxes, pooled):
                g = layers.relu_backward(g, p)
                conv_grads.append(layers.maxpool_backward(g, a, shape))
            gxs, gw, gb = layers.conv2d_backward_batch(ccache, conv_grads,
                                                       need_input_grad=i > 1)
            grads[f"conv{i}.weight"] += gw
            grads[f"conv{i}.bias"] += gb
            acts_grad = gxs
        return grads
