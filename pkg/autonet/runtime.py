"""Seeding and deterministic execution"""
import logging
import os
import random

import numpy as np
import torch

logger = logging.getLogger(__name__)


def seed_everything(seed: int, deterministic: bool = True, threads: int = 1) -> torch.Generator:
    """
    Seed python, numpy and torch; in deterministic mode pin torch to
    deterministic kernels and a fixed intra-op thread count

    Returns:
        A torch.Generator seeded with ``seed`` for the caller's own sampling
    """
    random.seed(seed)
    np.random.seed(seed % (2 ** 32))
    torch.manual_seed(seed)
    if deterministic:
        os.environ.setdefault("CUBLAS_WORKSPACE_CONFIG", ":4096:8")
        torch.use_deterministic_algorithms(True, warn_only=True)
        torch.set_num_threads(max(1, threads))
    logger.debug(f"Seeded runtime with {seed} (deterministic={deterministic})")
    return torch.Generator().manual_seed(seed)
