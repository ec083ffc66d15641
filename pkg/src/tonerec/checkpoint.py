"""Checkpoint files.

Layout::

    TONOCKPT 1\\n
    <name> <ndim> <d1> ... <dn>\\n   followed by prod(d) little-endian float32 values
    ...                            (one block per tensor, in model parameter order)
    END\\n
"""

from __future__ import annotations

from collections import OrderedDict

import numpy as np

MAGIC = b"TONOCKPT 1\n"


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, params) -> None:
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        for name, value in params.items():
            value = np.asarray(value)
            if any(c.isspace() for c in name):
                raise CheckpointError(f"tensor name {name!r} contains whitespace")
            dims = " ".join(str(d) for d in value.shape)
            fh.write(f"{name} {value.ndim} {dims}\n".encode("ascii"))
            fh.write(np.ascontiguousarray(value, dtype="<f4").tobytes())
        fh.write(b"END\n")


def load_checkpoint(path) -> OrderedDict:
    with open(path, "rb") as fh:
        raw = fh.read()
    if not raw.startswith(MAGIC):
        raise CheckpointError(f"{path}: not a TONOCKPT 1 checkpoint")
    pos = len(MAGIC)
    params = OrderedDict()
    while True:
        end = raw.find(b"\n", pos)
        if end < 0:
            raise CheckpointError(f"{path}: truncated header")
        line = raw[pos:end].decode("ascii")
        pos = end + 1
        if line == "END":
            break
        fields = line.split()
        try:
            name, ndim = fields[0], int(fields[1])
            shape = tuple(int(d) for d in fields[2:])
        except (IndexError, ValueError):
            raise CheckpointError(f"{path}: bad tensor header {line!r}") from None
        if len(shape) != ndim:
            raise CheckpointError(f"{path}: tensor {name} declares {ndim} dims, got {len(shape)}")
        count = int(np.prod(shape)) if shape else 1
        nbytes = 4 * count
        if pos + nbytes > len(raw):
            raise CheckpointError(f"{path}: truncated data for {name}")
        params[name] = np.frombuffer(raw[pos:pos + nbytes], dtype="<f4").reshape(shape).copy()
        pos += nbytes
    return params


def infer_model_config(params, base=None):
    """Derive layer sizes from tensor shapes; non-shape fields come from ``base``."""
    from .nn.model import ModelConfig

    base = base or ModelConfig()
    conv = sorted(n for n in params if n.startswith("conv") and n.endswith(".weight"))
    if not conv or "gru_fwd.wh" not in params or "affine.weight" not in params:
        raise CheckpointError("checkpoint lacks conv, GRU or affine tensors")
    first = params["conv1.weight"].shape
    fields = dict(vars(base))
    fields.update(conv_layers=len(conv), conv_channels=first[0], kernel_size=first[2],
                  hidden_size=params["gru_fwd.wh"].shape[0],
                  num_outputs=params["affine.weight"].shape[1])
    cfg = ModelConfig(**fields)
    if cfg.rnn_input_size != params["gru_fwd.wx"].shape[0]:
        raise CheckpointError(
            f"checkpoint expects {params['gru_fwd.wx'].shape[0]} recurrent inputs but "
            f"input_bins={cfg.input_bins} gives {cfg.rnn_input_size}")
    return cfg
