"""Per-mixture inference and scoring over a manifest."""

import logging
from typing import Callable

import numpy as np
import torch

from .forge.dataset import Manifest, load_manifest
from .frontend import aligned_length
from .metrics import MixtureRecord, aggregate, delta_si_sdr, der_counts, rasterize_activity
from .model import ADCSS

log = logging.getLogger(__name__)

# estimator(mixture, record) -> (estimates (C_hat, n) array, binary activity (C_hat, T) or None)
Estimator = Callable[[np.ndarray, dict], tuple[np.ndarray, np.ndarray | None]]


def model_estimator(model: ADCSS) -> Estimator:
    model.eval()

    def run(mixture, record):
        dev = next(model.parameters()).device
        out = model.infer(torch.from_numpy(np.asarray(mixture, dtype=np.float32)).to(dev))
        activity = out.activity.cpu().numpy() if model.diarization is not None else None
        return out.estimates.cpu().numpy(), activity

    return run


def score_mixture(record: dict, mixture, refs, estimates, activity, L: int, sample_rate: int) -> MixtureRecord:
    n = len(mixture)
    score = delta_si_sdr(list(estimates), list(refs), mixture)
    rec = MixtureRecord(
        id=record["id"], C=len(refs), C_hat=len(estimates), permutation=list(score.mapping),
        si_sdr=score.per_channel, delta_si_sdr=score.delta,
        padded_channels=score.padded_refs + score.padded_ests, degenerate_pairs=score.degenerate,
    )
    if activity is not None:
        ref_act = rasterize_activity(record["intervals"], aligned_length(n, L), L, sample_rate)
        hyp = np.asarray(activity)
        if len(estimates) == 0:
            hyp = np.zeros((0, ref_act.shape[1]), dtype=np.int64)
        counts = der_counts(ref_act, hyp)
        rec.der_missed, rec.der_false_alarm = counts.missed, counts.false_alarm
        rec.der_confusion, rec.der_speech = counts.confusion, counts.speech
    return rec


def evaluate(manifest: Manifest | str, estimator: Estimator, L: int, sample_rate: int = 16000,
             limit: int | None = None):
    """Score every mixture; failures are recorded and evaluation continues."""
    if not isinstance(manifest, Manifest):
        manifest = load_manifest(manifest)
    records = []
    for rec in manifest.records[:limit]:
        try:
            mixture, refs, _ = manifest.load_audio(rec)
            estimates, activity = estimator(mixture, rec)
            records.append(score_mixture(rec, mixture, refs, estimates, activity, L, sample_rate))
        except Exception as exc:  # noqa: BLE001 - one bad mixture must not stop the run
            log.error("mixture %s failed: %s", rec.get("id"), exc)
            records.append(MixtureRecord(rec.get("id", "?"), len(rec.get("sources", [])), 0, [], [], 0.0,
                                         0, 0, error=f"{type(exc).__name__}: {exc}"))
    return aggregate(records)


def evaluate_model(model: ADCSS, manifest, limit: int | None = None):
    return evaluate(manifest, model_estimator(model), model.cfg.L, model.cfg.sample_rate, limit)
