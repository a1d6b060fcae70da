"""SI-SDR with PIT, PIT diarization BCE, existence BCE and the joint loss."""

import itertools
from dataclasses import dataclass

import torch

from .errors import InvalidConfigError, InvalidInputError

SDR_FLOOR = -30.0
SDR_CEIL = 30.0
# training floor: an untrained separator sits far below -30 dB, where the
# metric clamp would leave it without gradient
TRAIN_SDR_FLOOR = -80.0
BCE_EPS = 1e-7


@dataclass(frozen=True)
class LossWeights:
    lambda_s: float = 0.8
    lambda_d: float = 0.1
    lambda_e: float = 0.1

    def __post_init__(self):
        ws = (self.lambda_s, self.lambda_d, self.lambda_e)
        if any(w < 0 for w in ws) or not any(ws):
            raise InvalidConfigError(f"loss weights must be nonnegative and not all zero: {ws}")


@dataclass(frozen=True)
class PermutationAssignment:
    """mapping[c] is the estimate index assigned to reference c."""

    mapping: tuple[int, ...]
    cost: float


def si_sdr(est: torch.Tensor, ref: torch.Tensor, floor: float = SDR_FLOOR,
           ceil: float = SDR_CEIL) -> torch.Tensor:
    """Scale-invariant SDR in dB over the last axis, clamped to [floor, ceil].

    Silent references (and silent estimates) land on the floor.
    """
    if est.shape[-1] != ref.shape[-1]:
        raise InvalidInputError(f"length mismatch: {est.shape[-1]} vs {ref.shape[-1]}")
    est = est - est.mean(dim=-1, keepdim=True)
    ref = ref - ref.mean(dim=-1, keepdim=True)
    ref_energy = (ref * ref).sum(-1, keepdim=True)
    alpha = (est * ref).sum(-1, keepdim=True) / torch.where(ref_energy > 0, ref_energy, torch.ones_like(ref_energy))
    target = alpha * ref
    noise = target - est
    num = (target * target).sum(-1)
    den = (noise * noise).sum(-1)
    tiny = torch.finfo(est.dtype).tiny
    ratio = 10 * torch.log10(num.clamp_min(tiny)) - 10 * torch.log10(den.clamp_min(tiny))
    ratio = torch.where(num > 0, ratio, torch.full_like(ratio, floor))
    ratio = torch.where((den > 0) | (num == 0), ratio, torch.full_like(ratio, ceil))
    return ratio.clamp(floor, ceil)


def is_degenerate(ref: torch.Tensor) -> torch.Tensor:
    centred = ref - ref.mean(dim=-1, keepdim=True)
    return (centred * centred).sum(-1) == 0


def best_permutation(cost: torch.Tensor) -> PermutationAssignment:
    """Exhaustive search for the assignment minimising sum_c cost[mapping[c], c]."""
    C = cost.shape[0]
    values = cost.detach().double().cpu()
    best = None
    for perm in itertools.permutations(range(C)):
        total = float(sum(values[perm[c], c] for c in range(C)))
        if best is None or total < best.cost:
            best = PermutationAssignment(tuple(perm), total)
    return best


def _gather(cost, mapping):
    idx = torch.arange(len(mapping))
    return cost[torch.tensor(mapping), idx].sum()


def si_sdr_matrix(ests, refs, floor: float = SDR_FLOOR):
    """Pairwise SI-SDR: out[i, j] = si_sdr(ests[i], refs[j])."""
    return si_sdr(ests.unsqueeze(1), refs.unsqueeze(0), floor)


def pit_si_sdr_loss(ests: torch.Tensor, refs: torch.Tensor, floor: float = SDR_FLOOR):
    """ests, refs: (C, N). Returns (-mean SI-SDR under the best permutation, assignment).

    The model's training loss passes ``floor=TRAIN_SDR_FLOOR``.
    """
    if ests.shape != refs.shape or ests.dim() != 2:
        raise InvalidInputError(f"estimate/reference shape mismatch: {tuple(ests.shape)} vs {tuple(refs.shape)}")
    cost = -si_sdr_matrix(ests, refs, floor)
    perm = best_permutation(cost)
    return _gather(cost, perm.mapping) / ests.shape[0], perm


def bce(target, prob):
    prob = prob.clamp(BCE_EPS, 1 - BCE_EPS)
    return -(target * torch.log(prob) + (1 - target) * torch.log(1 - prob))


def diar_cost_matrix(probs, labels):
    """out[i, j] = sum_t BCE(labels[j, t], probs[i, t])."""
    return bce(labels.unsqueeze(0), probs.unsqueeze(1)).sum(-1)


def pit_diar_loss(probs: torch.Tensor, labels: torch.Tensor, mapping=None):
    """probs, labels: (J, T). Mean per speaker-frame BCE under the best
    permutation, or under ``mapping`` when one is imposed."""
    if probs.shape != labels.shape or probs.dim() != 2:
        raise InvalidInputError(f"activity shape mismatch: {tuple(probs.shape)} vs {tuple(labels.shape)}")
    labels = labels.to(probs.dtype)
    cost = diar_cost_matrix(probs, labels)
    if mapping is None:
        perm = best_permutation(cost)
    else:
        perm = PermutationAssignment(tuple(mapping), float(_gather(cost.detach(), mapping)))
    return _gather(cost, perm.mapping) / probs.numel(), perm


def exist_loss(existence: torch.Tensor, C: int) -> torch.Tensor:
    if existence.shape[-1] != C + 1:
        raise InvalidInputError(f"expected {C + 1} existence probabilities, got {existence.shape[-1]}")
    target = torch.ones_like(existence)
    target[..., -1] = 0
    return bce(target, existence).mean()


def joint_loss(sep, diar, exist, weights: LossWeights = LossWeights()):
    """Weighted sum; a part may be None only if its weight is zero."""
    total = 0.0
    for part, w in ((sep, weights.lambda_s), (diar, weights.lambda_d), (exist, weights.lambda_e)):
        if w == 0:
            continue
        if part is None:
            raise InvalidInputError("a loss part with nonzero weight is missing")
        total = total + w * part
    return total
