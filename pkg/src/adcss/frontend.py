"""Learned conv encoder/decoder and the chunk / overlap-add pair.

Shapes follow the convention (..., T, D) for frame sequences and
(..., K, S, D) for chunked tensors, where K is the chunk length and S the
number of chunks taken with hop K/2.
"""

import math
from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import InvalidConfigError, InvalidInputError


def num_frames(n_samples: int, L: int) -> int:
    return (n_samples - L) // (L // 2) + 1


def num_samples(n_frames: int, L: int) -> int:
    return (n_frames - 1) * (L // 2) + L


def aligned_length(n_samples: int, L: int) -> int:
    """Smallest length >= n_samples that encode/decode maps back to itself."""
    if n_samples <= L:
        return L
    hop = L // 2
    return L + math.ceil((n_samples - L) / hop) * hop


class Encoder(nn.Module):
    """1-D conv with kernel L, stride L/2, F filters, followed by ReLU."""

    def __init__(self, L: int = 16, F: int = 256):
        super().__init__()
        if L < 2 or L % 2:
            raise InvalidConfigError(f"kernel size L must be even and >= 2, got {L}")
        self.L = L
        self.F = F
        self.conv = nn.Conv1d(1, F, kernel_size=L, stride=L // 2)

    def forward(self, wav: torch.Tensor) -> torch.Tensor:
        # wav: (B, T*) -> (B, T, F)
        if wav.shape[-1] < self.L:
            raise InvalidInputError(f"input of {wav.shape[-1]} samples is shorter than kernel {self.L}")
        squeeze = wav.dim() == 1
        if squeeze:
            wav = wav.unsqueeze(0)
        fm = F.relu(self.conv(wav.unsqueeze(1))).transpose(1, 2)
        return fm.squeeze(0) if squeeze else fm


class Decoder(nn.Module):
    """Transposed conv mirroring :class:`Encoder`; no output nonlinearity."""

    def __init__(self, L: int = 16, F: int = 256):
        super().__init__()
        self.L = L
        self.F = F
        self.deconv = nn.ConvTranspose1d(F, 1, kernel_size=L, stride=L // 2)

    def forward(self, fm: torch.Tensor) -> torch.Tensor:
        # fm: (B, T, F) -> (B, T*)
        if fm.shape[-1] != self.F:
            raise InvalidInputError(f"feature dim {fm.shape[-1]} does not match decoder F={self.F}")
        squeeze = fm.dim() == 2
        if squeeze:
            fm = fm.unsqueeze(0)
        wav = self.deconv(fm.transpose(1, 2)).squeeze(1)
        return wav.squeeze(0) if squeeze else wav


def encode(wav: torch.Tensor, encoder: Encoder) -> torch.Tensor:
    return encoder(wav)


def decode(fm: torch.Tensor, decoder: Decoder) -> torch.Tensor:
    return decoder(fm)


@dataclass
class ChunkTensor:
    values: torch.Tensor  # (..., K, S, D)
    pad_len: int
    length: int  # T before padding

    @property
    def chunk_len(self) -> int:
        return self.values.shape[-3]

    @property
    def num_chunks(self) -> int:
        return self.values.shape[-2]

    def replace(self, values: torch.Tensor) -> "ChunkTensor":
        return ChunkTensor(values, self.pad_len, self.length)


def chunk_count(T: int, K: int) -> int:
    return math.ceil(max(T - K, 0) / (K // 2)) + 1


def chunk(seq: torch.Tensor, K: int) -> ChunkTensor:
    """Split (..., T, D) into overlapping chunks (..., K, S, D) with hop K/2."""
    if K < 2 or K % 2:
        raise InvalidConfigError(f"chunk length K must be even and >= 2, got {K}")
    T = seq.shape[-2]
    if T < 1:
        raise InvalidInputError("cannot chunk an empty sequence")
    hop = K // 2
    S = chunk_count(T, K)
    pad_len = (S - 1) * hop + K - T
    padded = F.pad(seq, (0, 0, 0, pad_len))
    # unfold over time: (..., S, D, K)
    chunks = padded.unfold(-2, K, hop)
    return ChunkTensor(chunks.movedim(-1, -3), pad_len, T)


def overlap_add(ct: ChunkTensor) -> torch.Tensor:
    """Inverse of :func:`chunk`: average overlapping frames, trim padding."""
    x = ct.values
    K, S = x.shape[-3], x.shape[-2]
    hop = K // 2
    lead = x.shape[:-3]
    D = x.shape[-1]
    # (..., S, K, D) with halves laid out consecutively
    xs = x.movedim(-3, -2)
    first = xs[..., :hop, :].reshape(*lead, S * hop, D)
    second = xs[..., hop:, :].reshape(*lead, S * hop, D)
    total = (S + 1) * hop
    out = F.pad(first, (0, 0, 0, hop)) + F.pad(second, (0, 0, hop, 0))
    count = torch.ones(total, dtype=x.dtype, device=x.device)
    count[hop:S * hop] = 2.0
    out = out / count.unsqueeze(-1)
    return out[..., : ct.length, :]
