"""Tensor operations with exact backward passes

Tensors are ``torch.Tensor`` in (N, C, X, Y, Z) layout; unbatched (C, X, Y, Z)
inputs are accepted wherever a batch axis is optional. Every forward op here has
a matching ``*_backward`` that computes the adjoint explicitly.
"""
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import torch
import torch.nn.functional as F
from torch.nn import grad as nn_grad

from .errors import LabelOutOfRange, ShapeMismatch

logger = logging.getLogger(__name__)

Triple = Tuple[int, int, int]


def _triple(value: Union[int, Sequence[int]]) -> Triple:
    if isinstance(value, int):
        return (value, value, value)
    value = tuple(int(v) for v in value)
    if len(value) != 3:
        raise ShapeMismatch(f"expected 3 values, got {value}")
    return value


@dataclass(frozen=True)
class ConvSpec:
    """Geometry of a 3D (optionally dilated) convolution"""

    in_channels: int
    out_channels: int
    kernel: Triple = (3, 3, 3)
    stride: Triple = (1, 1, 1)
    dilation: Triple = (1, 1, 1)
    padding: Triple = (0, 0, 0)

    def __post_init__(self):
        for name in ("kernel", "stride", "dilation", "padding"):
            object.__setattr__(self, name, _triple(getattr(self, name)))
        if min(self.in_channels, self.out_channels) < 1:
            raise ShapeMismatch("channel counts must be >= 1")
        if min(self.kernel + self.stride + self.dilation) < 1 or min(self.padding) < 0:
            raise ShapeMismatch(f"invalid conv geometry {self}")

    @classmethod
    def same(cls, in_channels: int, out_channels: int, kernel: int = 3, dilation: int = 1) -> "ConvSpec":
        """Stride-1 spec whose padding keeps spatial extents unchanged (odd kernels)"""
        return cls(in_channels, out_channels, kernel, 1, dilation, dilation * (kernel - 1) // 2)

    @property
    def effective_kernel(self) -> Triple:
        return tuple((k - 1) * d + 1 for k, d in zip(self.kernel, self.dilation))

    @property
    def weight_shape(self) -> Tuple[int, ...]:
        return (self.out_channels, self.in_channels) + self.kernel

    @property
    def parameter_count(self) -> int:
        kx, ky, kz = self.kernel
        return self.out_channels * self.in_channels * kx * ky * kz + self.out_channels

    def output_extent(self, extent: Sequence[int]) -> Triple:
        return tuple(
            (n + 2 * p - e) // s + 1
            for n, p, e, s in zip(extent, self.padding, self.effective_kernel, self.stride)
        )


@dataclass
class LossValue:
    """Scalar loss plus its gradient with respect to the loss input"""

    value: float
    gradient: torch.Tensor


def _batched(tensor: torch.Tensor) -> Tuple[torch.Tensor, bool]:
    if tensor.dim() == 4:
        return tensor.unsqueeze(0), True
    if tensor.dim() == 5:
        return tensor, False
    raise ShapeMismatch(f"expected a (C,X,Y,Z) or (N,C,X,Y,Z) tensor, got shape {tuple(tensor.shape)}")


def _unbatch(tensor: torch.Tensor, squeeze: bool) -> torch.Tensor:
    return tensor.squeeze(0) if squeeze else tensor


def _check_conv(input: torch.Tensor, weights: torch.Tensor, spec: ConvSpec) -> None:
    if tuple(weights.shape) != spec.weight_shape:
        raise ShapeMismatch(f"weights {tuple(weights.shape)} do not match spec {spec.weight_shape}")
    if input.shape[1] != spec.in_channels:
        raise ShapeMismatch(f"input has {input.shape[1]} channels, spec expects {spec.in_channels}")
    if input.dtype != weights.dtype:
        raise ShapeMismatch(f"input dtype {input.dtype} differs from weights dtype {weights.dtype}")
    for n, p, e in zip(input.shape[2:], spec.padding, spec.effective_kernel):
        if e > n + 2 * p:
            raise ShapeMismatch(f"effective kernel {spec.effective_kernel} exceeds padded input {tuple(input.shape[2:])}")


def conv3_forward(input: torch.Tensor, weights: torch.Tensor, spec: ConvSpec,
                  bias: Optional[torch.Tensor] = None) -> torch.Tensor:
    """Cross-correlation with stride, dilation and zero padding"""
    batched, squeeze = _batched(input)
    _check_conv(batched, weights, spec)
    out = F.conv3d(batched, weights, bias, stride=spec.stride, padding=spec.padding, dilation=spec.dilation)
    return _unbatch(out, squeeze)


def conv3_backward(grad_out: torch.Tensor, input: torch.Tensor, weights: torch.Tensor,
                   spec: ConvSpec) -> Tuple[torch.Tensor, torch.Tensor]:
    """Adjoint of conv3_forward: (grad_input, grad_weights)"""
    batched, squeeze = _batched(input)
    grad_batched, _ = _batched(grad_out)
    _check_conv(batched, weights, spec)
    expected = (batched.shape[0], spec.out_channels) + spec.output_extent(batched.shape[2:])
    if tuple(grad_batched.shape) != expected:
        raise ShapeMismatch(f"grad_out {tuple(grad_batched.shape)} does not match forward output {expected}")
    grad_input = nn_grad.conv3d_input(
        batched.shape, weights, grad_batched, stride=spec.stride, padding=spec.padding, dilation=spec.dilation
    )
    grad_weights = nn_grad.conv3d_weight(
        batched, weights.shape, grad_batched, stride=spec.stride, padding=spec.padding, dilation=spec.dilation
    )
    return _unbatch(grad_input, squeeze), grad_weights


def _replicate_pad_odd(batched: torch.Tensor, stride: int) -> torch.Tensor:
    pads = []
    for n in reversed(batched.shape[2:]):
        pads.extend([0, (-n) % stride])
    if any(pads):
        return F.pad(batched, pads, mode="replicate")
    return batched


def maxpool3(input: torch.Tensor, window: int = 2, stride: int = 2) -> Tuple[torch.Tensor, torch.Tensor]:
    """
    Max pooling; odd extents are first padded by replicating the last element

    Returns:
        (pooled tensor, argmax indices into the padded spatial grid)
    """
    batched, squeeze = _batched(input)
    padded = _replicate_pad_odd(batched, stride)
    out, indices = F.max_pool3d(padded, window, stride, return_indices=True)
    return _unbatch(out, squeeze), _unbatch(indices, squeeze)


def maxpool3_backward(grad_out: torch.Tensor, indices: torch.Tensor, input_shape: Sequence[int],
                      window: int = 2, stride: int = 2) -> torch.Tensor:
    """
    Route each window's gradient to its argmax; replicated padding folds back onto the last element

    Overlapping windows (window > stride) may share an argmax, so contributions are summed.
    """
    grad_batched, squeeze = _batched(grad_out)
    indices, _ = _batched(indices)
    shape = tuple(input_shape) if len(input_shape) == 5 else (1,) + tuple(input_shape)
    padded_extent = [n + (-n) % stride for n in shape[2:]]
    n, c = grad_batched.shape[:2]
    grad = grad_batched.new_zeros((n, c, padded_extent[0] * padded_extent[1] * padded_extent[2]))
    grad.scatter_add_(2, indices.reshape(n, c, -1), grad_batched.reshape(n, c, -1))
    grad = grad.view(n, c, *padded_extent)
    for axis, n in enumerate(shape[2:], start=2):
        if grad.shape[axis] > n:
            tail = grad.narrow(axis, n, grad.shape[axis] - n).sum(dim=axis, keepdim=True)
            grad = grad.narrow(axis, 0, n).clone()
            grad.narrow(axis, n - 1, 1).add_(tail)
    return _unbatch(grad, squeeze)


def upsample_trilinear(input: torch.Tensor, size: Sequence[int]) -> torch.Tensor:
    """Align-corners trilinear resize of the spatial axes to ``size``"""
    if len(size) != 3 or min(size) < 1:
        raise ShapeMismatch(f"target extents must be three values >= 1, got {size}")
    batched, squeeze = _batched(input)
    out = F.interpolate(batched, size=tuple(int(s) for s in size), mode="trilinear", align_corners=True)
    return _unbatch(out, squeeze)


def upsample_trilinear_backward(grad_out: torch.Tensor, input_shape: Sequence[int]) -> torch.Tensor:
    """Adjoint of upsample_trilinear (the op is linear, so it is evaluated at zero)"""
    size = tuple(grad_out.shape[-3:])
    with torch.enable_grad():
        origin = torch.zeros(tuple(input_shape), dtype=grad_out.dtype, device=grad_out.device, requires_grad=True)
        out = upsample_trilinear(origin, size)
        (grad,) = torch.autograd.grad(out, origin, grad_out)
    return grad


def concat_channels(inputs: Sequence[torch.Tensor]) -> torch.Tensor:
    """Stack along the channel axis, order preserved"""
    if not inputs:
        raise ShapeMismatch("concat_channels needs at least one tensor")
    dims = {t.dim() for t in inputs}
    if len(dims) != 1 or dims.pop() not in (4, 5):
        raise ShapeMismatch("concat_channels inputs must all be 4D or all 5D")
    axis = inputs[0].dim() - 4
    reference = inputs[0].shape
    for t in inputs[1:]:
        if t.shape[:axis] != reference[:axis] or t.shape[axis + 1:] != reference[axis + 1:]:
            raise ShapeMismatch(f"cannot concatenate {tuple(t.shape)} with {tuple(reference)}")
    return torch.cat(list(inputs), dim=axis)


def split_channels(grad: torch.Tensor, sizes: Sequence[int]) -> List[torch.Tensor]:
    """Backward of concat_channels: per-part gradient slices"""
    axis = grad.dim() - 4
    if sum(sizes) != grad.shape[axis]:
        raise ShapeMismatch(f"channel sizes {list(sizes)} do not sum to {grad.shape[axis]}")
    return [part.contiguous() for part in torch.split(grad, list(sizes), dim=axis)]


def relu(input: torch.Tensor) -> torch.Tensor:
    return torch.clamp_min(input, 0)


def relu_backward(grad_out: torch.Tensor, input: torch.Tensor) -> torch.Tensor:
    return grad_out * (input > 0).to(grad_out.dtype)


def softmax_ce(logits: torch.Tensor, labels: torch.Tensor) -> LossValue:
    """
    Mean softmax cross-entropy over all positions

    Args:
        logits: (N, K, ...) or (K,) class scores, K >= 2
        labels: Integer class per position, shape (N, ...) or ()

    Returns:
        LossValue with gradient (softmax - onehot) / positions
    """
    squeeze = logits.dim() == 1
    if squeeze:
        logits, labels = logits.unsqueeze(0), labels.reshape(1)
    classes = logits.shape[1]
    if classes < 2:
        raise ShapeMismatch(f"softmax_ce needs at least 2 classes, got {classes}")
    if tuple(labels.shape) != (logits.shape[0],) + tuple(logits.shape[2:]):
        raise ShapeMismatch(f"labels {tuple(labels.shape)} do not match logits {tuple(logits.shape)}")
    labels = labels.long()
    if labels.numel() and (int(labels.min()) < 0 or int(labels.max()) >= classes):
        raise LabelOutOfRange(f"labels must be in [0, {classes}), got range "
                              f"[{int(labels.min())}, {int(labels.max())}]")

    log_probs = torch.log_softmax(logits.detach(), dim=1)
    count = labels.numel()
    picked = log_probs.gather(1, labels.unsqueeze(1))
    value = float(-picked.sum() / count)
    onehot = torch.zeros_like(log_probs).scatter_(1, labels.unsqueeze(1), 1.0)
    gradient = (log_probs.exp() - onehot) / count
    return LossValue(value, gradient.squeeze(0) if squeeze else gradient)


def soft_dice_loss(probs: torch.Tensor, target: torch.Tensor, smooth: float = 1e-5) -> LossValue:
    """
    1 - (2 sum(p*y) + eps) / (sum(p) + sum(y) + eps), with its analytic gradient

    When both sums and ``smooth`` are zero the ratio is undefined; the loss is
    then reported as 0 with a zero gradient.
    """
    if probs.shape != target.shape:
        raise ShapeMismatch(f"probs {tuple(probs.shape)} and target {tuple(target.shape)} differ")
    p = probs.detach()
    y = target.detach().to(p.dtype)
    intersection = (p * y).sum()
    denominator = p.sum() + y.sum() + smooth
    if float(denominator) == 0.0:
        return LossValue(0.0, torch.zeros_like(p))
    numerator = 2.0 * intersection + smooth
    value = 1.0 - numerator / denominator
    gradient = -(2.0 * y * denominator - numerator) / denominator ** 2
    return LossValue(float(value), gradient)


def sgd_step(params: Sequence[torch.Tensor], grads: Sequence[torch.Tensor], velocities: Sequence[torch.Tensor],
             lr: float = 1e-2, momentum: float = 0.9) -> Tuple[List[torch.Tensor], List[torch.Tensor]]:
    """
    Momentum SGD: v <- m*v + g, p <- p - lr*v

    Returns:
        (new params, new velocities); inputs are left untouched
    """
    new_params, new_velocities = [], []
    for p, g, v in zip(params, grads, velocities):
        if p.shape != g.shape or p.shape != v.shape:
            raise ShapeMismatch(f"param {tuple(p.shape)}, grad {tuple(g.shape)} and velocity {tuple(v.shape)} differ")
        v_next = momentum * v + g
        new_velocities.append(v_next)
        new_params.append(p - lr * v_next)
    return new_params, new_velocities
