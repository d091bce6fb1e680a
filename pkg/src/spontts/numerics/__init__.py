"""Dense tensors, layers, reverse-mode gradients and Adam."""

from . import ops
from .gradcheck import gradient_check, relative_error
from .layers import (
    ConditionalLayerNorm,
    Conv1d,
    FFTBlock,
    LayerNorm,
    Linear,
    MultiHeadAttention,
    ParamStore,
    transformer_ffn_block,
)
from .ops import ConfigError, conv1d_same, layer_norm_affine, matmul, softmax
from .optim import Adam, AdamState, adam_step
from .tensor import (
    DEFAULT_DTYPE,
    DimensionError,
    Parameter,
    StateError,
    Tensor,
    as_tensor,
    backward,
    no_grad,
)

__all__ = [
    "Adam", "AdamState", "ConditionalLayerNorm", "ConfigError", "Conv1d", "DEFAULT_DTYPE",
    "DimensionError", "FFTBlock", "LayerNorm", "Linear", "MultiHeadAttention", "ParamStore",
    "Parameter", "StateError", "Tensor", "adam_step", "as_tensor", "backward", "conv1d_same",
    "gradient_check", "layer_norm_affine", "matmul", "no_grad", "ops", "relative_error",
    "softmax", "transformer_ffn_block",
]
