"""Evaluation metrics: delta SI-SDR with silent-channel padding, frame DER, SCA."""

import json
from dataclasses import asdict, dataclass, field

import numpy as np
import torch
from scipy.optimize import linear_sum_assignment

from .errors import InvalidInputError
from .objectives import best_permutation, is_degenerate, si_sdr, si_sdr_matrix


def _as_matrix(signals, length=None):
    signals = [np.asarray(s, dtype=np.float64) for s in signals]
    if length is None:
        length = len(signals[0]) if signals else 0
    if any(len(s) != length for s in signals):
        raise InvalidInputError("all waveforms must share one length")
    if not signals:
        return np.zeros((0, length))
    return np.stack(signals)


def si_sdr_db(est, ref) -> float:
    return float(si_sdr(torch.as_tensor(np.asarray(est, dtype=np.float64)),
                        torch.as_tensor(np.asarray(ref, dtype=np.float64))))


@dataclass
class SeparationScore:
    delta: float
    mapping: tuple[int, ...]  # mapping[c] = estimate index for (padded) reference c
    per_channel: list[float]  # SI-SDR of the matched estimate, per reference
    improvements: list[float]
    padded_refs: int
    padded_ests: int
    degenerate: int


def delta_si_sdr(ests, refs, mixture) -> SeparationScore:
    """Best-permutation mean SI-SDR improvement over the mixture.

    The shorter of (ests, refs) is padded with silent channels. Pairs with a
    silent reference count as zero improvement and are excluded from the mean.
    """
    mixture = np.asarray(mixture, dtype=np.float64)
    n = len(mixture)
    E = _as_matrix(ests, n)
    R = _as_matrix(refs, n)
    if len(R) == 0:
        raise InvalidInputError("at least one reference is required")
    size = max(len(E), len(R))
    pad_e, pad_r = size - len(E), size - len(R)
    E = np.concatenate([E, np.zeros((pad_e, n))])
    R = np.concatenate([R, np.zeros((pad_r, n))])
    Et, Rt = torch.from_numpy(E), torch.from_numpy(R)
    degenerate = is_degenerate(Rt).numpy()
    base = si_sdr(torch.from_numpy(mixture).expand(size, n), Rt).numpy()
    scores = si_sdr_matrix(Et, Rt).numpy()
    gain = scores - base[None, :]
    gain[:, degenerate] = 0.0
    perm = best_permutation(torch.from_numpy(-gain))
    improvements = [float(gain[perm.mapping[c], c]) for c in range(size)]
    valid = [improvements[c] for c in range(size) if not degenerate[c]]
    return SeparationScore(
        delta=float(np.mean(valid)) if valid else 0.0,
        mapping=perm.mapping,
        per_channel=[float(scores[perm.mapping[c], c]) for c in range(size)],
        improvements=improvements,
        padded_refs=pad_r,
        padded_ests=pad_e,
        degenerate=int(degenerate.sum()),
    )


@dataclass
class DerCounts:
    missed: int
    false_alarm: int
    confusion: int
    speech: int
    mapping: tuple[int, ...] = ()  # mapping[c] = hypothesis row for reference row c

    @property
    def errors(self) -> int:
        return self.missed + self.false_alarm + self.confusion

    @property
    def der(self) -> float:
        if self.speech == 0:
            return 0.0 if self.errors == 0 else float("inf")
        return self.errors / self.speech


def _pad_rows(x, n):
    return np.concatenate([x, np.zeros((n - len(x), x.shape[1]), dtype=x.dtype)])


def der_counts(ref, hyp) -> DerCounts:
    """Frame-level scoring with an optimal one-to-one speaker mapping, no collar."""
    ref = np.asarray(ref, dtype=np.int64)
    hyp = np.asarray(hyp, dtype=np.int64)
    if ref.ndim != 2 or hyp.ndim != 2:
        raise InvalidInputError("activity matrices must be 2-D (speakers x frames)")
    if ref.shape[1] != hyp.shape[1]:
        raise InvalidInputError(f"frame count mismatch: {ref.shape[1]} vs {hyp.shape[1]}")
    n = max(len(ref), len(hyp), 1)
    ref, hyp = _pad_rows(ref, n), _pad_rows(hyp, n)
    # overlap[i, j]: frames where hyp row i and ref row j are both active
    overlap = hyp @ ref.T
    rows, cols = linear_sum_assignment(-overlap)
    mapping = [0] * n
    for i, j in zip(rows, cols):
        mapping[j] = int(i)
    correct = int(overlap[rows, cols].sum())
    n_ref = ref.sum(0)
    n_hyp = hyp.sum(0)
    return DerCounts(
        missed=int(np.maximum(n_ref - n_hyp, 0).sum()),
        false_alarm=int(np.maximum(n_hyp - n_ref, 0).sum()),
        confusion=int(np.minimum(n_ref, n_hyp).sum()) - correct,
        speech=int(n_ref.sum()),
        mapping=tuple(mapping),
    )


def der(ref, hyp) -> float:
    return der_counts(ref, hyp).der


def sca(counts) -> float:
    counts = list(counts)
    if not counts:
        raise InvalidInputError("speaker counting accuracy needs at least one mixture")
    return sum(int(est == true) for est, true in counts) / len(counts)


def rasterize_activity(intervals, n_samples: int, L: int, sample_rate: int) -> np.ndarray:
    """Binary (C, T) activity on the encoder frame grid; a frame is active when
    its centre sample falls inside an utterance interval."""
    hop = L // 2
    T = max((n_samples - L) // hop + 1, 0)
    centres = (np.arange(T) * hop + L / 2) / sample_rate
    out = np.zeros((len(intervals), T), dtype=np.int64)
    for c, spans in enumerate(intervals):
        for start, end in spans:
            out[c] |= ((centres >= start) & (centres < end)).astype(np.int64)
    return out


@dataclass
class MixtureRecord:
    id: str
    C: int
    C_hat: int
    permutation: list[int]
    si_sdr: list[float]
    delta_si_sdr: float
    padded_channels: int
    degenerate_pairs: int
    der_missed: int | None = None
    der_false_alarm: int | None = None
    der_confusion: int | None = None
    der_speech: int | None = None
    error: str | None = None


@dataclass
class EvalReport:
    delta_si_sdr: float
    der: float | None
    sca: float
    records: list[MixtureRecord] = field(default_factory=list)

    def summary(self) -> dict:
        ok = [r for r in self.records if r.error is None]
        return {
            "type": "summary",
            "mixtures": len(self.records),
            "failed": len(self.records) - len(ok),
            "delta_si_sdr": self.delta_si_sdr,
            "der": self.der,
            "sca": self.sca,
            "padded_channels": sum(r.padded_channels for r in ok),
            "degenerate_pairs": sum(r.degenerate_pairs for r in ok),
        }

    def write(self, path) -> None:
        with open(path, "w") as fh:
            for rec in self.records:
                fh.write(json.dumps({"type": "mixture", **asdict(rec)}) + "\n")
            fh.write(json.dumps(self.summary()) + "\n")


def aggregate(records: list[MixtureRecord]) -> EvalReport:
    ok = [r for r in records if r.error is None]
    if not ok:
        raise InvalidInputError("no mixture was scored successfully")
    delta = float(np.mean([r.delta_si_sdr for r in ok]))
    scored = [r for r in ok if r.der_speech is not None]
    der_value = None
    if scored:
        speech = sum(r.der_speech for r in scored)
        errs = sum(r.der_missed + r.der_false_alarm + r.der_confusion for r in scored)
        der_value = errs / speech if speech else 0.0
    return EvalReport(delta, der_value, sca((r.C_hat, r.C) for r in ok), list(records))

