"""Segmentation network - multi-resolution stages concatenated at full resolution"""
import logging
from typing import List, Tuple

import numpy as np
import torch
from torch import nn

from autonet.checkpoint import Checkpoint, load_state_into
from autonet.layers import AtrousConv3d, ConvBlock3d, MaxPool3d, concat, upsample_to
from autonet.errors import ShapeMismatch
from autonet.ops import ConvSpec
from .config import CLASS_LABELS, SegNetConfig

logger = logging.getLogger(__name__)


class SegNet(nn.Module):
    """
    Full-resolution and half-resolution vanilla conv stages, then parallel
    dilated conv paths at quarter resolution. Every stage output is upsampled
    back to the input resolution and concatenated before a 1x1x1 class head.
    """

    def __init__(self, cfg: SegNetConfig):
        super().__init__()
        self.cfg = cfg
        c = cfg.channels
        n = cfg.convs_per_stage
        self.full = ConvBlock3d(cfg.in_channels, c[0], n, group_norm=cfg.group_norm)
        self.pool = MaxPool3d(2, 2)
        self.half = ConvBlock3d(c[0], c[1], n, group_norm=cfg.group_norm)
        self.atrous = nn.ModuleList(
            ConvBlock3d(c[1], out, n, kernel=cfg.atrous_kernel, dilation=d, group_norm=cfg.group_norm)
            for out, d in zip(c[2:], cfg.dilations)
        )
        self.head = AtrousConv3d(ConvSpec(cfg.feature_channels, cfg.classes, 1))

    def conv_specs(self) -> List[ConvSpec]:
        specs = self.full.specs + self._modules["half"].specs
        for path in self.atrous:
            specs.extend(path.specs)
        return specs + [self.head.spec]

    def features(self, x: torch.Tensor) -> torch.Tensor:
        """Pre-head concatenated feature map, (N, sum(channels), X, Y, Z)"""
        size = tuple(x.shape[-3:])
        full = self.full(x)
        half = self._modules["half"](self.pool(full))
        quarter = self.pool(half)
        parts = [full, upsample_to(half, size)]
        parts.extend(upsample_to(path(quarter), size) for path in self.atrous)
        return concat(parts)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.head(self.features(x))


def build_segnet(cfg: SegNetConfig) -> SegNet:
    net = SegNet(cfg)
    count = sum(p.numel() for p in net.parameters())
    logger.info(f"Built segnet channels={cfg.channels} dilations={cfg.dilations} ({count} parameters)")
    return net


def feature_shape(cfg: SegNetConfig, input_shape: Tuple[int, ...]) -> Tuple[int, ...]:
    """Pre-head feature extents for an (N, C, X, Y, Z) input, worked out without running the network"""
    n, channels = input_shape[0], input_shape[1]
    if channels != cfg.in_channels:
        raise ShapeMismatch(f"input has {channels} channels, network expects {cfg.in_channels}")
    full = tuple(input_shape[2:])
    half = tuple((e + 1) // 2 for e in full)
    quarter = tuple((e + 1) // 2 for e in half)

    def run(extent, specs):
        for spec in specs:
            extent = spec.output_extent(extent)
        return extent

    stages = [(full, _block_specs(cfg.in_channels, cfg.channels[0], cfg)),
              (half, _block_specs(cfg.channels[0], cfg.channels[1], cfg))]
    stages.extend((quarter, _block_specs(cfg.channels[1], out, cfg, d, cfg.atrous_kernel))
                  for out, d in zip(cfg.channels[2:], cfg.dilations))
    for extent, specs in stages:
        if run(extent, specs) != extent:
            raise ShapeMismatch(f"stage convs do not preserve extent {extent}")
    return (n, cfg.feature_channels) + full


def _block_specs(in_channels: int, out_channels: int, cfg: SegNetConfig, dilation: int = 1,
                 kernel: int = 3) -> List[ConvSpec]:
    specs = [ConvSpec.same(in_channels, out_channels, kernel, dilation)]
    specs.extend(ConvSpec.same(out_channels, out_channels, kernel, dilation) for _ in range(cfg.convs_per_stage - 1))
    return specs


def declared_parameter_count(cfg: SegNetConfig) -> int:
    """Closed-form parameter count over the declared conv layers (plus GroupNorm affine terms)"""
    c = cfg.channels
    blocks = [_block_specs(cfg.in_channels, c[0], cfg), _block_specs(c[0], c[1], cfg)]
    blocks.extend(_block_specs(c[1], out, cfg, d, cfg.atrous_kernel) for out, d in zip(c[2:], cfg.dilations))
    total = sum(spec.parameter_count for specs in blocks for spec in specs)
    total += ConvSpec(cfg.feature_channels, cfg.classes, 1).parameter_count
    if cfg.group_norm:
        total += sum(2 * ch * cfg.convs_per_stage for ch in c)
    return total


def segnet_from_checkpoint(checkpoint: Checkpoint) -> SegNet:
    net = SegNet(SegNetConfig.from_meta(checkpoint.meta))
    return load_state_into(net, checkpoint)


def region_probs(probs: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """
    Nested region probabilities from class probabilities

    Args:
        probs: Softmax output with classes (bg, label 1, label 2, label 4) on axis -4

    Returns:
        (wt, tc, et) with wt = p1 + p2 + p4, tc = p1 + p4, et = p4
    """
    p1 = probs.select(-4, 1)
    p2 = probs.select(-4, 2)
    p4 = probs.select(-4, 3)
    tc = p1 + p4
    return tc + p2, tc, p4


def nested_labels(probs: torch.Tensor, threshold: float = 0.5) -> np.ndarray:
    """
    Labels whose regions are nested by construction: each region is thresholded
    and the more specific region overrides (et over tc over wt)

    Inside tc a voxel is label 1 unless et fires; inside wt but outside tc it is label 2.
    """
    wt, tc, et = (r.detach().cpu().numpy() for r in region_probs(probs))
    wt_mask = wt > threshold
    tc_mask = wt_mask & (tc > threshold)
    et_mask = tc_mask & (et > threshold)
    labels = np.zeros(wt.shape, dtype=np.uint8)
    labels[wt_mask] = CLASS_LABELS[2]
    labels[tc_mask] = CLASS_LABELS[1]
    labels[et_mask] = CLASS_LABELS[3]
    return labels
