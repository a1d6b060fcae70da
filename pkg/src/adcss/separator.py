"""Triple-path separator: intra-chunk, inter-chunk and inter-speaker blocks."""

import torch
import torch.nn as nn

from .errors import InvalidConfigError
from .frontend import ChunkTensor, Decoder, overlap_add
from .layers import TransformerBlock, TransformerLSTMBlock, along


class TriplePathModule(nn.Module):
    """Operates on (B, J, K, S, D).

    The inter-speaker block uses attention and a position-wise feed-forward
    with no positional encoding: a recurrence over J would make the output
    depend on speaker order.
    """

    def __init__(self, dim: int, num_heads: int, ff_dim: int | None = None):
        super().__init__()
        self.intra = TransformerLSTMBlock(dim, num_heads)
        self.inter = TransformerLSTMBlock(dim, num_heads)
        self.speaker = TransformerBlock(dim, num_heads, ff_dim or 4 * dim, positional=False)

    def forward(self, x):
        x = along(x, -3, self.intra)
        x = along(x, -2, self.inter)
        return along(x, -4, self.speaker)


class Separator(nn.Module):
    def __init__(self, F: int, D: int, num_heads: int, n_triple: int, L: int):
        super().__init__()
        if n_triple < 1:
            raise InvalidConfigError("N_triple must be >= 1")
        self.modules_ = nn.ModuleList(TriplePathModule(D, num_heads) for _ in range(n_triple))
        self.output = nn.Linear(D, F)
        self.decoder = Decoder(L, F)

    def forward(self, t_in: ChunkTensor) -> torch.Tensor:
        """(B, J, K, S, D) chunk tensor -> (B, J, T*) waveforms."""
        x = t_in.values
        for module in self.modules_:
            x = module(x)
        frames = self.output(overlap_add(t_in.replace(x)))  # (B, J, T, F)
        B, J, T, F = frames.shape
        wav = self.decoder(frames.reshape(B * J, T, F))
        return wav.reshape(B, J, -1)
