from .gru import GruCell, bigru_backward, bigru_forward, gru_backward, gru_forward
from .layers import (
    conv2d_backward_batch,
    conv2d_forward,
    conv2d_forward_batch,
    dropout,
    maxpool_backward,
    maxpool_forward,
    relu,
    stack_features,
)
from .model import TOO_SHORT, ModelConfig, ToneRecognizer, parameter_names, parameter_shapes

__all__ = [
    "GruCell", "ModelConfig", "TOO_SHORT", "ToneRecognizer", "bigru_backward",
    "bigru_forward", "conv2d_backward_batch", "conv2d_forward", "conv2d_forward_batch",
    "dropout", "gru_backward", "gru_forward", "maxpool_backward", "maxpool_forward",
    "parameter_names", "parameter_shapes", "relu", "stack_features",
]
