"""Multi-utterance speaker tracks, level mixing, reverberation and noise."""

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.signal import fftconvolve

from ..audio import SAMPLE_RATE
from ..errors import InvalidConfigError, InvalidInputError
from .room import RoomSpec, synth_rir

# active-speech RMS of the 0 dB anchor speaker
REFERENCE_RMS = 0.05


@dataclass
class SpeakerTrack:
    waveform: np.ndarray  # float32
    intervals: list[tuple[float, float]]  # seconds
    speaker_id: str
    utterances: list[str] = field(default_factory=list)


@dataclass
class MixtureSample:
    mixture: np.ndarray
    tracks: list[SpeakerTrack]
    noise: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def num_speakers(self) -> int:
        return len(self.tracks)


def sum_sources(arrays) -> np.ndarray:
    """Left-to-right float32 sum; the stored mixture is defined by this order."""
    arrays = list(arrays)
    acc = np.zeros_like(arrays[0], dtype=np.float32)
    for a in arrays:
        acc = acc + a.astype(np.float32)
    return acc


def sample_track(corpus, speaker: str, rng: np.random.Generator, utterance_range=(1, 5),
                 silence_range=(0.0, 3.0), sample_rate: int = SAMPLE_RATE) -> SpeakerTrack:
    """Concatenate 1-5 utterances of one speaker, each preceded by a uniform silence."""
    utts = corpus.utterances(speaker)
    if not utts:
        raise InvalidConfigError(f"speaker {speaker} has no utterances")
    lo, hi = utterance_range
    n_utt = int(rng.integers(lo, hi + 1))
    picks = rng.choice(len(utts), size=n_utt, replace=n_utt > len(utts))
    pieces, intervals, names = [], [], []
    cursor = 0
    for idx in picks:
        gap = int(round(rng.uniform(*silence_range) * sample_rate))
        audio = np.asarray(corpus.load(utts[idx]), dtype=np.float32)
        pieces.append(np.zeros(gap, dtype=np.float32))
        pieces.append(audio)
        start = cursor + gap
        cursor = start + len(audio)
        intervals.append((start / sample_rate, cursor / sample_rate))
        names.append(utts[idx])
    return SpeakerTrack(np.concatenate(pieces), intervals, speaker, names)


def active_power(track: SpeakerTrack, sample_rate: int = SAMPLE_RATE) -> float:
    """Mean power over the samples inside the utterance intervals."""
    mask = np.zeros(len(track.waveform), dtype=bool)
    for start, end in track.intervals:
        mask[int(round(start * sample_rate)):int(round(end * sample_rate))] = True
    if not mask.any():
        return 0.0
    x = track.waveform[mask].astype(np.float64)
    return float(np.mean(x * x))


def pad_to(x: np.ndarray, n: int) -> np.ndarray:
    return np.concatenate([x, np.zeros(n - len(x), dtype=x.dtype)]) if len(x) < n else x


def mix_anechoic(tracks: list[SpeakerTrack], rng: np.random.Generator, level_window_db: float = 5.0,
                 sample_rate: int = SAMPLE_RATE) -> MixtureSample:
    """Zero-pad to a common length, set levels and sum.

    Each track is normalised to a common active-speech level; the first
    speaker is the 0 dB anchor and the others get uniform gains in
    [-window, 0] dB, so every pairwise level difference lies in [0, window].
    """
    if not tracks:
        raise InvalidInputError("at least one speaker track is required")
    n = max(len(t.waveform) for t in tracks)
    gains_db = [0.0] + [float(rng.uniform(-level_window_db, 0.0)) for _ in tracks[1:]]
    out = []
    for track, g in zip(tracks, gains_db):
        p = active_power(track, sample_rate)
        scale = REFERENCE_RMS / np.sqrt(p) if p > 0 else 1.0
        scale *= 10 ** (g / 20)
        wav = pad_to((track.waveform.astype(np.float64) * scale).astype(np.float32), n)
        out.append(replace(track, waveform=wav))
    mixture = sum_sources(t.waveform for t in out)
    return MixtureSample(mixture, out, None, {"relative_gains_db": gains_db})


def apply_reverb(tracks: list[SpeakerTrack], room: RoomSpec, rng: np.random.Generator,
                 sample_rate: int = SAMPLE_RATE) -> list[SpeakerTrack]:
    """Convolve each track with its RIR, keeping the common (max) length.

    Intervals shift by the direct-path delay.
    """
    n = max(len(t.waveform) for t in tracks)
    out = []
    for i, track in enumerate(tracks):
        h = synth_rir(room, i, rng, sample_rate)
        delay = int(np.argmax(np.abs(h) > 0))
        wet = fftconvolve(pad_to(track.waveform, n).astype(np.float64), h)[:n]
        shift = delay / sample_rate
        intervals = [(min(s + shift, n / sample_rate), min(e + shift, n / sample_rate))
                     for s, e in track.intervals]
        out.append(replace(track, waveform=wet.astype(np.float32), intervals=intervals))
    return out


def speaker_level_db(tracks: list[SpeakerTrack]) -> float:
    """Signal level for SNR: mean over speakers of each speaker's power in dB."""
    levels = []
    for t in tracks:
        x = t.waveform.astype(np.float64)
        levels.append(10 * np.log10(np.mean(x * x) + 1e-20))
    return float(np.mean(levels))


def add_noise(mix: MixtureSample, noise_src, rng: np.random.Generator, snr_range=(0.0, 10.0),
              snr_db: float | None = None) -> MixtureSample:
    """Scale a noise segment to a uniform random SNR and add it to the mixture."""
    n = len(mix.mixture)
    if snr_db is None:
        snr_db = float(rng.uniform(*snr_range))
    if hasattr(noise_src, "segment"):
        segment, source = noise_src.segment(n, rng)
    else:
        segment, source = np.asarray(noise_src, dtype=np.float32), "array"
    if len(segment) < n:
        raise InvalidInputError(f"noise has {len(segment)} samples, mixture needs {n}")
    segment = segment[:n].astype(np.float64)
    power = float(np.mean(segment * segment))
    meta = dict(mix.meta, noise_source=source)
    if power == 0:
        meta.update(snr_db=None, snr_undefined=True)
        return replace(mix, noise=np.zeros(n, dtype=np.float32), meta=meta)
    target = speaker_level_db(mix.tracks) - snr_db
    noise = (segment * np.sqrt(10 ** (target / 10) / power)).astype(np.float32)
    mixture = sum_sources([*(t.waveform for t in mix.tracks), noise])
    meta.update(snr_db=snr_db, snr_undefined=False)
    return replace(mix, mixture=mixture, noise=noise, meta=meta)


def overlap_ratio(intervals_per_speaker, n_samples: int, sample_rate: int = SAMPLE_RATE) -> float:
    """Fraction of the mixture duration where two or more speakers are active."""
    if n_samples == 0:
        return 0.0
    count = np.zeros(n_samples, dtype=np.int32)
    for spans in intervals_per_speaker:
        for s, e in spans:
            count[int(round(s * sample_rate)):int(round(e * sample_rate))] += 1
    return float(np.mean(count >= 2))
