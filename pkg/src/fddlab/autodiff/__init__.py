"""Minimal reverse-mode differentiation engine with double-backprop support."""

from .adam import Adam
from .checkpoint import CheckpointError, load_tensors, save_tensors
from .nn import (
    ACTIVATIONS,
    BatchNormState,
    LstmWeights,
    affine,
    batchnorm,
    conv1d,
    glorot_uniform,
    init_lstm,
    lstm_seq,
    lstm_seq_composed,
    lstm_step,
    maxpool1d,
)
from .tensor import (
    ShapeError,
    Tensor,
    add,
    backward,
    broadcast_to,
    concat,
    div,
    exp,
    getitem,
    grad_mode,
    leaky_relu,
    log,
    matmul,
    mul,
    neg,
    no_grad,
    power,
    relu,
    reshape,
    sigmoid,
    sqrt,
    sub,
    tanh,
    tmean,
    transpose,
    tsum,
    unfold1d,
    fold1d,
)

__all__ = [
    "Adam",
    "ACTIVATIONS",
    "BatchNormState",
    "CheckpointError",
    "LstmWeights",
    "ShapeError",
    "Tensor",
    "add",
    "affine",
    "backward",
    "batchnorm",
    "broadcast_to",
    "concat",
    "conv1d",
    "div",
    "exp",
    "fold1d",
    "getitem",
    "glorot_uniform",
    "grad_mode",
    "init_lstm",
    "leaky_relu",
    "load_tensors",
    "log",
    "lstm_seq",
    "lstm_seq_composed",
    "lstm_step",
    "matmul",
    "maxpool1d",
    "mul",
    "neg",
    "no_grad",
    "power",
    "relu",
    "reshape",
    "save_tensors",
    "sigmoid",
    "sqrt",
    "sub",
    "tanh",
    "tmean",
    "transpose",
    "tsum",
    "unfold1d",
]
