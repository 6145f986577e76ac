"""Autograd bindings - each op's explicit backward registered with torch.autograd"""
from typing import Sequence

import torch
from torch.autograd import Function

from . import ops
from .ops import ConvSpec


class Conv3dFunction(Function):
    @staticmethod
    def forward(ctx, input, weights, bias, spec: ConvSpec):
        ctx.spec = spec
        ctx.has_bias = bias is not None
        ctx.save_for_backward(input, weights)
        return ops.conv3_forward(input, weights, spec, bias)

    @staticmethod
    def backward(ctx, grad_out):
        input, weights = ctx.saved_tensors
        grad_input, grad_weights = ops.conv3_backward(grad_out, input, weights, ctx.spec)
        grad_bias = None
        if ctx.has_bias:
            reduce_axes = (0, 2, 3, 4) if grad_out.dim() == 5 else (1, 2, 3)
            grad_bias = grad_out.sum(dim=reduce_axes)
        return grad_input, grad_weights, grad_bias, None


class MaxPool3Function(Function):
    @staticmethod
    def forward(ctx, input, window: int, stride: int):
        out, indices = ops.maxpool3(input, window, stride)
        ctx.save_for_backward(indices)
        ctx.input_shape = tuple(input.shape)
        ctx.window, ctx.stride = window, stride
        ctx.mark_non_differentiable(indices)
        return out, indices

    @staticmethod
    def backward(ctx, grad_out, _grad_indices):
        (indices,) = ctx.saved_tensors
        grad = ops.maxpool3_backward(grad_out, indices, ctx.input_shape, ctx.window, ctx.stride)
        return grad, None, None


class UpsampleFunction(Function):
    @staticmethod
    def forward(ctx, input, size):
        ctx.input_shape = tuple(input.shape)
        return ops.upsample_trilinear(input, size)

    @staticmethod
    def backward(ctx, grad_out):
        return ops.upsample_trilinear_backward(grad_out, ctx.input_shape), None


class ConcatFunction(Function):
    @staticmethod
    def forward(ctx, *inputs):
        axis = inputs[0].dim() - 4
        ctx.sizes = [t.shape[axis] for t in inputs]
        return ops.concat_channels(inputs)

    @staticmethod
    def backward(ctx, grad_out):
        return tuple(ops.split_channels(grad_out, ctx.sizes))


class ReluFunction(Function):
    @staticmethod
    def forward(ctx, input):
        ctx.save_for_backward(input)
        return ops.relu(input)

    @staticmethod
    def backward(ctx, grad_out):
        (input,) = ctx.saved_tensors
        return ops.relu_backward(grad_out, input)


class SoftmaxCrossEntropyFunction(Function):
    @staticmethod
    def forward(ctx, logits, labels):
        loss = ops.softmax_ce(logits, labels)
        ctx.save_for_backward(loss.gradient)
        return logits.new_tensor(loss.value)

    @staticmethod
    def backward(ctx, grad_out):
        (gradient,) = ctx.saved_tensors
        return grad_out * gradient, None


class SoftDiceFunction(Function):
    @staticmethod
    def forward(ctx, probs, target, smooth: float):
        loss = ops.soft_dice_loss(probs, target, smooth)
        ctx.save_for_backward(loss.gradient)
        return probs.new_tensor(loss.value)

    @staticmethod
    def backward(ctx, grad_out):
        (gradient,) = ctx.saved_tensors
        return grad_out * gradient, None, None


def conv3d(input: torch.Tensor, weights: torch.Tensor, bias, spec: ConvSpec) -> torch.Tensor:
    return Conv3dFunction.apply(input, weights, bias, spec)


def maxpool3d(input: torch.Tensor, window: int = 2, stride: int = 2) -> torch.Tensor:
    out, _ = MaxPool3Function.apply(input, window, stride)
    return out


def upsample(input: torch.Tensor, size: Sequence[int]) -> torch.Tensor:
    return UpsampleFunction.apply(input, tuple(size))


def concat(inputs: Sequence[torch.Tensor]) -> torch.Tensor:
    return ConcatFunction.apply(*inputs)


def relu(input: torch.Tensor) -> torch.Tensor:
    return ReluFunction.apply(input)


def cross_entropy(logits: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
    return SoftmaxCrossEntropyFunction.apply(logits, labels)


def soft_dice(probs: torch.Tensor, target: torch.Tensor, smooth: float = 1e-5) -> torch.Tensor:
    return SoftDiceFunction.apply(probs, target, smooth)
