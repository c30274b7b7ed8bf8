"""Convolutional encoder/decoder with hand-written gradients and Adam."""

from .checkpoint import CheckpointError, read_checkpoint, write_checkpoint
from .loss import LossGraph, forward_loss, loss, loss_grads
from .networks import (
    AdamState,
    ArchSpec,
    ConvLayer,
    NetworkParams,
    decoder_backward,
    decoder_forward,
    encoder_backward,
    encoder_forward,
    init_params,
)
from .optim import adam_step, scheduled_lr

__all__ = [
    "AdamState",
    "ArchSpec",
    "CheckpointError",
    "ConvLayer",
    "LossGraph",
    "NetworkParams",
    "adam_step",
    "decoder_backward",
    "decoder_forward",
    "encoder_backward",
    "encoder_forward",
    "forward_loss",
    "init_params",
    "loss",
    "loss_grads",
    "read_checkpoint",
    "scheduled_lr",
    "write_checkpoint",
]
