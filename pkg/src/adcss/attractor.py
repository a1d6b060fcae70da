"""Attractor generation, speaker counting, diarization and FiLM fusion."""

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn

from .errors import InvalidConfigError, InvalidInputError
from .layers import MultiHeadAttention


@dataclass
class AttractorSet:
    vectors: torch.Tensor  # (..., J+1, D)
    existence: torch.Tensor  # (..., J+1)

    @property
    def J(self) -> int:
        return self.vectors.shape[-2] - 1


class ExistenceHead(nn.Module):
    def __init__(self, dim: int):
        super().__init__()
        self.linear = nn.Linear(dim, 1)

    def forward(self, attractors):
        return torch.sigmoid(self.linear(attractors).squeeze(-1))


def pool_frames(d: torch.Tensor, size: int) -> torch.Tensor:
    """Mean over consecutive windows of ``size`` frames; a short last window is averaged as is."""
    if size == 1:
        return d
    B, T, D = d.shape
    full = T // size
    parts = []
    if full:
        parts.append(d[:, : full * size].reshape(B, full, size, D).mean(dim=2))
    if T % size:
        parts.append(d[:, full * size:].mean(dim=1, keepdim=True))
    return torch.cat(parts, dim=1)


class RnnAttractor(nn.Module):
    """BLSTM encoder summarises d into (h, c); an LSTM decoder fed with zero
    vectors emits one attractor per step.

    With ``pool`` > 1 the encoder reads d averaged over consecutive windows of
    ``pool`` frames, which shortens the recurrence the summary has to span.
    """

    def __init__(self, dim: int, pool: int = 1):
        super().__init__()
        if pool < 1:
            raise InvalidConfigError(f"attractor pooling must be >= 1, got {pool}")
        self.dim = dim
        self.pool = pool
        self.encoder = nn.LSTM(dim, dim, batch_first=True, bidirectional=True)
        self.to_hidden = nn.Linear(2 * dim, dim)
        self.to_cell = nn.Linear(2 * dim, dim)
        self.decoder = nn.LSTM(dim, dim, batch_first=True)
        self.existence = ExistenceHead(dim)

    def summarize(self, d):
        # d: (B, T, D) -> h, c: (B, D)
        d = pool_frames(d, self.pool)
        _, (h_n, c_n) = self.encoder(d)
        # h_n: (2, B, D), forward then backward direction
        h = self.to_hidden(torch.cat([h_n[0], h_n[1]], dim=-1))
        c = self.to_cell(torch.cat([c_n[0], c_n[1]], dim=-1))
        return h, c

    def forward(self, d: torch.Tensor, J: int) -> AttractorSet:
        if J < 1:
            raise InvalidConfigError(f"number of attractors J must be >= 1, got {J}")
        squeeze = d.dim() == 2
        if squeeze:
            d = d.unsqueeze(0)
        if d.shape[1] == 0:
            raise InvalidInputError("empty embedding sequence")
        h, c = self.summarize(d)
        zeros = d.new_zeros(d.shape[0], J + 1, self.dim)
        a, _ = self.decoder(zeros, (h.unsqueeze(0), c.unsqueeze(0)))
        q = self.existence(a)
        if squeeze:
            a, q = a.squeeze(0), q.squeeze(0)
        return AttractorSet(a, q)


class TransformerAttractor(nn.Module):
    """Learned queries cross-attending to d (ablation variant).

    Query j is shared across mixtures; ``max_attractors`` bounds J + 1.
    """

    def __init__(self, dim: int, num_heads: int, max_attractors: int, ff_dim: int | None = None):
        super().__init__()
        self.dim = dim
        self.max_attractors = max_attractors
        self.queries = nn.Parameter(torch.randn(max_attractors, dim) * dim ** -0.5)
        self.norm_self = nn.LayerNorm(dim)
        self.self_attn = MultiHeadAttention(dim, num_heads)
        self.norm_q = nn.LayerNorm(dim)
        self.norm_kv = nn.LayerNorm(dim)
        self.cross_attn = MultiHeadAttention(dim, num_heads)
        self.norm_ff = nn.LayerNorm(dim)
        ff_dim = ff_dim or 4 * dim
        self.ff = nn.Sequential(nn.Linear(dim, ff_dim), nn.ReLU(), nn.Linear(ff_dim, dim))
        self.existence = ExistenceHead(dim)

    def forward(self, d: torch.Tensor, J: int) -> AttractorSet:
        if J < 1:
            raise InvalidConfigError(f"number of attractors J must be >= 1, got {J}")
        if J + 1 > self.max_attractors:
            raise InvalidConfigError(f"J+1={J + 1} exceeds the {self.max_attractors} learned queries")
        squeeze = d.dim() == 2
        if squeeze:
            d = d.unsqueeze(0)
        x = self.queries[: J + 1].unsqueeze(0).expand(d.shape[0], -1, -1)
        x = x + self.self_attn(self.norm_self(x))
        x = x + self.cross_attn(self.norm_q(x), self.norm_kv(d))
        a = x + self.ff(self.norm_ff(x))
        q = self.existence(a)
        if squeeze:
            a, q = a.squeeze(0), q.squeeze(0)
        return AttractorSet(a, q)


def count_speakers(existence, tau_exist: float = 0.5, J_max: int | None = None) -> int:
    """Length of the leading run of attractors whose existence prob >= tau_exist."""
    q = [float(v) for v in existence]
    if J_max is None:
        J_max = len(q) - 1
    if len(q) != J_max + 1:
        raise InvalidInputError(f"expected {J_max + 1} existence probabilities, got {len(q)}")
    if not 0.0 < tau_exist < 1.0:
        raise InvalidConfigError(f"tau_exist must lie in (0, 1), got {tau_exist}")
    count = 0
    for p in q[:J_max]:
        if p < tau_exist:
            break
        count += 1
    return count


class DiarizationHead(nn.Module):
    """sigmoid(w * <a_j, d_t> + b) with one scalar (w, b) shared by all speakers."""

    def __init__(self, dim: int):
        super().__init__()
        # unit scale: inner products are already small at initialisation
        self.weight = nn.Parameter(torch.tensor(1.0))
        self.bias = nn.Parameter(torch.tensor(0.0))

    def forward(self, attractors, d):
        # attractors: (..., J, D), d: (..., T, D) -> (..., J, T)
        raw = attractors @ d.transpose(-1, -2)
        return torch.sigmoid(self.weight * raw + self.bias)


def binarize(probs, tau_diar: float = 0.5):
    if not 0.0 < tau_diar < 1.0:
        raise InvalidConfigError(f"tau_diar must lie in (0, 1), got {tau_diar}")
    if torch.is_tensor(probs):
        return (probs >= tau_diar).to(torch.int64)
    return (np.asarray(probs) >= tau_diar).astype(np.int64)


class FiLM(nn.Module):
    """T_in[j] = gamma(a_j) * D_out + beta(a_j), broadcast over K and S."""

    def __init__(self, dim: int):
        super().__init__()
        self.gamma = nn.Linear(dim, dim)
        self.beta = nn.Linear(dim, dim)
        nn.init.ones_(self.gamma.bias)

    def forward(self, d_out, attractors):
        # d_out: (B, K, S, D), attractors: (B, J, D) -> (B, J, K, S, D)
        gamma = self.gamma(attractors)[..., None, None, :]
        beta = self.beta(attractors)[..., None, None, :]
        return gamma * d_out.unsqueeze(-4) + beta
