"""Autonet - 3D tensor ops with exact gradients, losses, optimizer and checkpoints"""
from .ops import (
    ConvSpec,
    LossValue,
    conv3_forward,
    conv3_backward,
    maxpool3,
    maxpool3_backward,
    upsample_trilinear,
    upsample_trilinear_backward,
    concat_channels,
    split_channels,
    relu,
    relu_backward,
    softmax_ce,
    soft_dice_loss,
    sgd_step,
)
from .gradcheck import grad_check
from .checkpoint import Checkpoint, save_checkpoint, load_checkpoint, load_state_into
from .runtime import seed_everything

__all__ = [
    "ConvSpec",
    "LossValue",
    "conv3_forward",
    "conv3_backward",
    "maxpool3",
    "maxpool3_backward",
    "upsample_trilinear",
    "upsample_trilinear_backward",
    "concat_channels",
    "split_channels",
    "relu",
    "relu_backward",
    "softmax_ce",
    "soft_dice_loss",
    "sgd_step",
    "grad_check",
    "Checkpoint",
    "save_checkpoint",
    "load_checkpoint",
    "load_state_into",
    "seed_everything",
]
