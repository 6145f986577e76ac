"""nn.Module wrappers around the explicit-backward ops"""
import math
from typing import List, Sequence

import torch
from torch import nn

from . import functions
from .ops import ConvSpec


class AtrousConv3d(nn.Module):
    """3D convolution (dilated when ``spec.dilation`` > 1) backed by Conv3dFunction"""

    def __init__(self, spec: ConvSpec, bias: bool = True, zero_init: bool = False):
        super().__init__()
        self.spec = spec
        self.weight = nn.Parameter(torch.empty(spec.weight_shape))
        self.bias = nn.Parameter(torch.empty(spec.out_channels)) if bias else None
        self.reset_parameters(zero_init)

    def reset_parameters(self, zero_init: bool = False):
        if zero_init:
            nn.init.zeros_(self.weight)
        else:
            nn.init.kaiming_normal_(self.weight, nonlinearity="relu")
        if self.bias is not None:
            nn.init.zeros_(self.bias)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return functions.conv3d(x, self.weight, self.bias, self.spec)

    def extra_repr(self) -> str:
        s = self.spec
        return f"{s.in_channels}, {s.out_channels}, kernel={s.kernel}, dilation={s.dilation}, padding={s.padding}"


class ConvBlock3d(nn.Module):
    """Stack of same-padded convs, each followed by optional GroupNorm and ReLU"""

    def __init__(self, in_channels: int, out_channels: int, convs: int = 2, kernel: int = 3,
                 dilation: int = 1, group_norm: bool = False):
        super().__init__()
        self.convs = nn.ModuleList()
        self.norms = nn.ModuleList() if group_norm else None
        channels = in_channels
        for _ in range(convs):
            self.convs.append(AtrousConv3d(ConvSpec.same(channels, out_channels, kernel, dilation)))
            if group_norm:
                self.norms.append(nn.GroupNorm(_groups(out_channels), out_channels))
            channels = out_channels

    @property
    def specs(self) -> List[ConvSpec]:
        return [conv.spec for conv in self.convs]

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        for index, conv in enumerate(self.convs):
            x = conv(x)
            if self.norms is not None:
                x = self.norms[index](x)
            x = functions.relu(x)
        return x


def _groups(channels: int, preferred: int = 8) -> int:
    return math.gcd(channels, preferred) or 1


class MaxPool3d(nn.Module):
    def __init__(self, window: int = 2, stride: int = 2):
        super().__init__()
        self.window, self.stride = window, stride

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return functions.maxpool3d(x, self.window, self.stride)


def upsample_to(x: torch.Tensor, size: Sequence[int]) -> torch.Tensor:
    """Trilinear resize of ``x`` to ``size``; identity when already there"""
    if tuple(x.shape[-3:]) == tuple(size):
        return x
    return functions.upsample(x, size)


def concat(parts: Sequence[torch.Tensor]) -> torch.Tensor:
    return functions.concat(parts)
