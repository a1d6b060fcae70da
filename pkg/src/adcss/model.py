"""Full model: encoder -> dual-path embedding -> attractors -> FiLM -> triple-path separator."""

import logging
from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from .attractor import (DiarizationHead, FiLM, RnnAttractor, TransformerAttractor, binarize,
                        count_speakers)
from .config import ModelConfig
from .embedding import DualPathConfig, EmbeddingNet
from .errors import InvalidInputError
from .frontend import Encoder, aligned_length, num_frames
from .objectives import TRAIN_SDR_FLOOR, exist_loss, joint_loss, pit_diar_loss, pit_si_sdr_loss
from .separator import Separator

log = logging.getLogger(__name__)


@dataclass
class TrainOutput:
    estimates: torch.Tensor  # (C, T*)
    activity: torch.Tensor | None  # (C, T) probabilities
    existence: torch.Tensor | None  # (C + 1,)


@dataclass
class Inference:
    count: int
    estimates: torch.Tensor  # (C_hat, T*)
    activity: torch.Tensor  # (C_hat, T) binary
    probs: torch.Tensor  # (C_hat, T)
    existence: torch.Tensor | None
    warning: str | None = None


class ADCSS(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        cfg.validate()
        self.cfg = cfg
        D = cfg.D
        self.encoder = Encoder(cfg.L, cfg.F)
        self.embedding = EmbeddingNet(cfg.F, D, DualPathConfig(cfg.depth_dual, cfg.num_heads, cfg.ff_dim, cfg.K))
        if cfg.attractor_style == "rnn":
            self.attractor = RnnAttractor(D, cfg.attractor_pool)
        elif cfg.attractor_style == "transformer":
            self.attractor = TransformerAttractor(D, cfg.num_heads, cfg.J_max + 1, cfg.ff_dim)
        else:
            self.attractor = None
            # distinct learned offsets break the symmetry between identical copies
            self.slots = nn.Parameter(torch.randn(cfg.fixed_speakers, D) * 0.1)
        self.diarization = DiarizationHead(D) if self.attractor is not None and cfg.diar_branch else None
        self.film = FiLM(D) if self.attractor is not None else None
        self.separator = Separator(cfg.F, D, cfg.num_heads, cfg.n_triple, cfg.L)

    @property
    def uses_attractors(self) -> bool:
        return self.attractor is not None

    def _embed(self, wav):
        n = wav.shape[-1]
        padded = F.pad(wav, (0, aligned_length(n, self.cfg.L) - n))
        d_out, d = self.embedding(self.encoder(padded))
        return n, d_out, d

    def _separate(self, d_out, attractors, n):
        # attractors: (B, J, D) or None (fixed-J mode)
        if attractors is None:
            t_in = d_out.values.unsqueeze(1) + self.slots[None, :, None, None, :]
        else:
            t_in = self.film(d_out.values, attractors)
        return self.separator(d_out.replace(t_in))[..., :n]

    def forward_train(self, wav: torch.Tensor, C: int) -> TrainOutput:
        """wav: (T*,). Attractors are generated with J = C (the true count)."""
        if C < 1:
            raise InvalidInputError(f"true speaker count must be >= 1, got {C}")
        n, d_out, d = self._embed(wav.unsqueeze(0))
        if not self.uses_attractors:
            if C != self.cfg.fixed_speakers:
                raise InvalidInputError(f"fixed-J model expects {self.cfg.fixed_speakers} speakers, got {C}")
            return TrainOutput(self._separate(d_out, None, n)[0], None, None)
        attr = self.attractor(d, C)
        first = attr.vectors[:, :C]
        probs = self.diarization(first, d)[0] if self.diarization is not None else None
        est = self._separate(d_out, first, n)[0]
        return TrainOutput(est, probs, attr.existence[0])

    def loss(self, out: TrainOutput, refs: torch.Tensor, labels: torch.Tensor | None):
        """Joint loss and its parts for one mixture; refs (C, T*), labels (C, T)."""
        weights = self.cfg.weights()
        sep, perm = pit_si_sdr_loss(out.estimates, refs, TRAIN_SDR_FLOOR)
        diar = exist = None
        if weights.lambda_d > 0:
            mapping = perm.mapping if self.cfg.tie_permutations else None
            diar, _ = pit_diar_loss(out.activity, labels, mapping)
        if weights.lambda_e > 0:
            exist = exist_loss(out.existence, refs.shape[0])
        total = joint_loss(sep, diar, exist, weights)
        parts = {"sep": float(sep.detach()), "diar": None if diar is None else float(diar.detach()),
                 "exist": None if exist is None else float(exist.detach())}
        return total, parts

    @torch.no_grad()
    def infer(self, wav: torch.Tensor) -> Inference:
        """Count speakers from J_max + 1 attractors, then diarize and separate
        with the first C_hat of them."""
        cfg = self.cfg
        n, d_out, d = self._embed(wav.unsqueeze(0))
        T = d.shape[1]
        if not self.uses_attractors:
            est = self._separate(d_out, None, n)[0]
            J = est.shape[0]
            probs = wav.new_ones(J, T)
            return Inference(J, est, binarize(probs, cfg.tau_diar), probs, None)
        attr = self.attractor(d, cfg.J_max)
        existence = attr.existence[0]
        count = count_speakers(existence, cfg.tau_exist, cfg.J_max)
        if count == 0:
            msg = "no speaker detected: all existence probabilities below threshold"
            log.warning(msg)
            empty = wav.new_zeros(0, n)
            return Inference(0, empty, wav.new_zeros(0, T, dtype=torch.int64), wav.new_zeros(0, T),
                             existence, msg)
        first = attr.vectors[:, :count]
        if self.diarization is not None:
            probs = self.diarization(first, d)[0]
        else:
            probs = wav.new_ones(count, T)
        est = self._separate(d_out, first, n)[0]
        return Inference(count, est, binarize(probs, cfg.tau_diar), probs, existence)


def build_model(cfg: ModelConfig, seed: int | None = None) -> ADCSS:
    if seed is not None:
        torch.manual_seed(seed)
    return ADCSS(cfg)


def frame_count(n_samples: int, L: int) -> int:
    """Number of encoder frames the model produces for an n-sample input."""
    return num_frames(aligned_length(n_samples, L), L)
