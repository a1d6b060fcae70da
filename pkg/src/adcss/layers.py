"""Attention and recurrent building blocks shared by the embedding and separator nets."""

import math

import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import InvalidConfigError


def sinusoidal_encoding(length: int, dim: int, dtype=torch.float32, device=None) -> torch.Tensor:
    pos = torch.arange(length, dtype=torch.float64, device=device).unsqueeze(1)
    idx = torch.arange(0, dim, 2, dtype=torch.float64, device=device)
    freq = torch.exp(-math.log(10000.0) * idx / dim)
    pe = torch.zeros(length, dim, dtype=torch.float64, device=device)
    pe[:, 0::2] = torch.sin(pos * freq)
    pe[:, 1::2] = torch.cos(pos * freq[: dim // 2])
    return pe.to(dtype)


class MultiHeadAttention(nn.Module):
    def __init__(self, dim: int, num_heads: int):
        super().__init__()
        if num_heads < 1 or dim % num_heads:
            raise InvalidConfigError(f"feature dim {dim} is not divisible by {num_heads} heads")
        self.dim = dim
        self.num_heads = num_heads
        self.q_proj = nn.Linear(dim, dim)
        self.k_proj = nn.Linear(dim, dim)
        self.v_proj = nn.Linear(dim, dim)
        self.out_proj = nn.Linear(dim, dim)

    def forward(self, query, key=None, value=None):
        # (N, Lq, D), (N, Lk, D), (N, Lk, D) -> (N, Lq, D)
        key = query if key is None else key
        value = key if value is None else value
        N, Lq, D = query.shape
        Lk = key.shape[1]
        h = self.num_heads
        q = self.q_proj(query).view(N, Lq, h, D // h).transpose(1, 2)
        k = self.k_proj(key).view(N, Lk, h, D // h).transpose(1, 2)
        v = self.v_proj(value).view(N, Lk, h, D // h).transpose(1, 2)
        ctx = F.scaled_dot_product_attention(q, k, v)
        return self.out_proj(ctx.transpose(1, 2).reshape(N, Lq, D))


class TransformerBlock(nn.Module):
    """Pre-LN self-attention + feed-forward, both with residual connections.

    When ``positional`` is set, sinusoidal positions are added to the query
    and key inputs only, so zeroed value/output weights leave the block an
    exact identity.
    """

    def __init__(self, dim: int, num_heads: int, ff_dim: int, positional: bool = True):
        super().__init__()
        self.positional = positional
        self.norm_attn = nn.LayerNorm(dim)
        self.attn = MultiHeadAttention(dim, num_heads)
        self.norm_ff = nn.LayerNorm(dim)
        self.ff = nn.Sequential(nn.Linear(dim, ff_dim), nn.ReLU(), nn.Linear(ff_dim, dim))

    def forward(self, x):
        # x: (N, L, D)
        h = self.norm_attn(x)
        if self.positional:
            qk = h + sinusoidal_encoding(x.shape[1], x.shape[2], x.dtype, x.device)
            x = x + self.attn(qk, qk, h)
        else:
            x = x + self.attn(h)
        return x + self.ff(self.norm_ff(x))


class TransformerLSTMBlock(nn.Module):
    """Pre-LN self-attention, then a BLSTM with a 2D->D affine, each residual."""

    def __init__(self, dim: int, num_heads: int):
        super().__init__()
        self.norm_attn = nn.LayerNorm(dim)
        self.attn = MultiHeadAttention(dim, num_heads)
        self.norm_rnn = nn.LayerNorm(dim)
        self.rnn = nn.LSTM(dim, dim, batch_first=True, bidirectional=True)
        self.proj = nn.Linear(2 * dim, dim)

    def forward(self, x):
        x = x + self.attn(self.norm_attn(x))
        out, _ = self.rnn(self.norm_rnn(x))
        return x + self.proj(out)


def along(x: torch.Tensor, axis: int, block: nn.Module) -> torch.Tensor:
    """Apply a sequence block along ``axis`` of x, batching over every other axis."""
    x = x.movedim(axis, -2)
    shape = x.shape
    y = block(x.reshape(-1, shape[-2], shape[-1])).reshape(shape)
    return y.movedim(-2, axis)
