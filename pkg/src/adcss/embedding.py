"""Dual-path transformer feature embedding."""

from dataclasses import dataclass

import torch
import torch.nn as nn

from .errors import InvalidConfigError
from .frontend import ChunkTensor, chunk, overlap_add
from .layers import TransformerBlock, along


@dataclass
class DualPathConfig:
    depth_dual: int = 2
    num_heads: int = 4
    ff_dim: int | None = None  # defaults to 4 * D
    K: int = 96


class DualPathBlock(nn.Module):
    """Intra-chunk block over K, then inter-chunk block over S."""

    def __init__(self, dim: int, num_heads: int, ff_dim: int):
        super().__init__()
        self.intra = TransformerBlock(dim, num_heads, ff_dim)
        self.inter = TransformerBlock(dim, num_heads, ff_dim)

    def forward(self, x):
        # x: (..., K, S, D)
        x = along(x, -3, self.intra)
        return along(x, -2, self.inter)


class EmbeddingNet(nn.Module):
    def __init__(self, F: int, D: int, cfg: DualPathConfig):
        super().__init__()
        if cfg.depth_dual < 1:
            raise InvalidConfigError("depth_dual must be >= 1")
        if D % cfg.num_heads:
            raise InvalidConfigError(f"D={D} is not divisible by {cfg.num_heads} heads")
        self.cfg = cfg
        self.project = nn.Linear(F, D)
        ff_dim = cfg.ff_dim or 4 * D
        self.blocks = nn.ModuleList(
            DualPathBlock(D, cfg.num_heads, ff_dim) for _ in range(cfg.depth_dual)
        )

    def forward(self, fm: torch.Tensor) -> tuple[ChunkTensor, torch.Tensor]:
        """Return (D_out chunks (..., K, S, D), flat embeddings d (..., T, D))."""
        ct = chunk(self.project(fm), self.cfg.K)
        x = ct.values
        for block in self.blocks:
            x = block(x)
        d_out = ct.replace(x)
        return d_out, overlap_add(d_out)
