"""Finite-difference gradient checking"""
import logging
from typing import Callable, Optional, Sequence

import numpy as np
import torch

from .errors import PrecisionError

logger = logging.getLogger(__name__)

# gradients smaller than this in magnitude are compared absolutely
RELATIVE_FLOOR = 1e-3


def grad_check(fn: Callable[..., torch.Tensor], inputs: Sequence[torch.Tensor], h: float = 1e-6,
               backward: Optional[Callable[..., Sequence[Optional[torch.Tensor]]]] = None,
               samples: int = 32, seed: int = 0, check: Optional[Sequence[bool]] = None,
               floor: float = RELATIVE_FLOOR) -> float:
    """
    Compare analytic gradients with central differences

    The op output is reduced to a scalar by a fixed random projection R, so the
    analytic side is ``backward(R, *inputs)`` (or autograd when ``backward`` is None).

    Args:
        fn: Forward op taking ``inputs``
        inputs: float64 tensors
        h: Perturbation
        backward: Explicit vector-Jacobian product; returns one gradient per input
        samples: Coordinates sampled per input (all when the input is smaller)
        seed: Seed for the projection and coordinate sampling
        check: Per-input flags; unchecked inputs are treated as constants
        floor: Smallest denominator of the relative error; gradients below it are
            compared on an absolute scale. Lower it for ops whose gradients are tiny

    Returns:
        Max of |analytic - numeric| / max(|analytic|, |numeric|, floor) over sampled coordinates
    """
    inputs = [t.detach().clone() for t in inputs]
    if check is None:
        check = [t.is_floating_point() for t in inputs]
    for t, flag in zip(inputs, check):
        if flag and t.dtype != torch.float64:
            raise PrecisionError(f"grad_check needs float64 inputs, got {t.dtype}")

    generator = torch.Generator().manual_seed(seed)
    reference = fn(*inputs)
    projection = torch.randn(reference.shape, generator=generator, dtype=torch.float64)

    def objective(args) -> float:
        return float((fn(*args).to(torch.float64) * projection).sum())

    if backward is not None:
        analytic = list(backward(projection.to(reference.dtype), *inputs))
    else:
        leaves = [t.clone().requires_grad_(flag) for t, flag in zip(inputs, check)]
        out = (fn(*leaves).to(torch.float64) * projection).sum()
        wanted = [leaf for leaf, flag in zip(leaves, check) if flag]
        grads = iter(torch.autograd.grad(out, wanted, allow_unused=True))
        analytic = [next(grads) if flag else None for flag in check]

    rng = np.random.default_rng(seed)
    worst = 0.0
    for index, (tensor, flag) in enumerate(zip(inputs, check)):
        if not flag or analytic[index] is None:
            continue
        grad = analytic[index].reshape(-1)
        count = tensor.numel()
        coords = np.arange(count) if count <= samples else rng.choice(count, samples, replace=False)
        for coord in coords:
            coord = int(coord)
            flat = tensor.view(-1)
            original = float(flat[coord])
            flat[coord] = original + h
            plus = objective(inputs)
            flat[coord] = original - h
            minus = objective(inputs)
            flat[coord] = original
            numeric = (plus - minus) / (2.0 * h)
            exact = float(grad[coord])
            error = abs(exact - numeric) / max(abs(exact), abs(numeric), floor)
            worst = max(worst, error)
    logger.debug(f"grad_check max relative error {worst:.3e}")
    return worst
