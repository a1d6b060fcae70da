"""Utterance and noise providers.

Two backends each: a directory of WAV files (for real corpora) and a
synthetic toy source that needs no downloads. Every provider can be
restricted to a split so that train/valid/test never share speakers or
noise recordings.
"""

import zlib
from functools import lru_cache
from pathlib import Path

import numpy as np

from ..audio import SAMPLE_RATE, read_wav
from ..errors import InvalidConfigError, InvalidInputError

SPLITS = ("train", "valid", "test")


def _stable_hash(text: str) -> int:
    return zlib.crc32(text.encode())


def _bucket_split(key: int) -> str:
    """80/10/10 assignment of an integer key to a split."""
    bucket = key % 10
    return "train" if bucket < 8 else ("valid" if bucket == 8 else "test")


class WavDirCorpus:
    """``root/<speaker_id>/**/*.wav``; speakers are assigned to splits by a
    stable hash of their id (80/10/10)."""

    def __init__(self, root, split: str | None = None, fractions=(0.8, 0.1, 0.1)):
        self.root = Path(root)
        if not self.root.is_dir():
            raise InvalidConfigError(f"corpus directory not found: {self.root}")
        self.fractions = fractions
        self.split_name = split
        speakers = sorted(p.name for p in self.root.iterdir() if p.is_dir())
        if split is not None:
            speakers = [s for s in speakers if self._split_of(s) == split]
        self._speakers = speakers
        self._utts = {}

    def _split_of(self, speaker: str) -> str:
        u = (_stable_hash(speaker) % 10000) / 10000
        if u < self.fractions[0]:
            return "train"
        return "valid" if u < self.fractions[0] + self.fractions[1] else "test"

    def split(self, name: str) -> "WavDirCorpus":
        return WavDirCorpus(self.root, name, self.fractions)

    def speakers(self) -> list[str]:
        return list(self._speakers)

    def utterances(self, speaker: str) -> list[str]:
        if speaker not in self._utts:
            self._utts[speaker] = sorted(str(p) for p in (self.root / speaker).rglob("*.wav"))
        return self._utts[speaker]

    def load(self, utt: str) -> np.ndarray:
        return read_wav(utt)


class ToyCorpus:
    """Synthetic speakers: band-limited noise with a speaker-specific centre
    frequency and syllable-rate amplitude modulation.

    Speaker k sits at ``f_lo + k * step`` Hz. Splits interleave speakers
    (k % 4 in {0, 2} train, 1 valid, 3 test) so every split spans the band.
    """

    def __init__(self, n_speakers: int = 24, utts_per_speaker: int = 20, min_dur: float = 0.5,
                 max_dur: float = 1.5, f_lo: float = 400.0, f_hi: float = 7300.0,
                 bandwidth: float = 250.0, seed: int = 0, split: str | None = None,
                 sample_rate: int = SAMPLE_RATE):
        if n_speakers < 1 or utts_per_speaker < 1:
            raise InvalidConfigError("toy corpus needs at least one speaker and one utterance")
        if not 0 < min_dur <= max_dur:
            raise InvalidConfigError(f"invalid toy utterance durations [{min_dur}, {max_dur}]")
        self.params = dict(n_speakers=n_speakers, utts_per_speaker=utts_per_speaker, min_dur=min_dur,
                           max_dur=max_dur, f_lo=f_lo, f_hi=f_hi, bandwidth=bandwidth, seed=seed,
                           sample_rate=sample_rate)
        self.sample_rate = sample_rate
        self.split_name = split
        ids = range(n_speakers)
        if split is not None:
            ids = [k for k in ids if self.split_of(k) == split]
        self._speakers = [f"toy{k:02d}" for k in ids]

    @staticmethod
    def split_of(k: int) -> str:
        return {0: "train", 2: "train", 1: "valid", 3: "test"}[k % 4]

    def split(self, name: str) -> "ToyCorpus":
        return ToyCorpus(**self.params, split=name)

    def speakers(self) -> list[str]:
        return list(self._speakers)

    def utterances(self, speaker: str) -> list[str]:
        return [f"{speaker}/{i:03d}" for i in range(self.params["utts_per_speaker"])]

    def centre_frequency(self, k: int) -> float:
        p = self.params
        if p["n_speakers"] == 1:
            return p["f_lo"]
        return p["f_lo"] + k * (p["f_hi"] - p["f_lo"]) / (p["n_speakers"] - 1)

    def load(self, utt: str) -> np.ndarray:
        return _toy_utterance(utt, tuple(sorted(self.params.items())))

    def _render(self, utt: str) -> np.ndarray:
        p = self.params
        speaker, index = utt.split("/")
        k = int(speaker[3:])
        rng = np.random.default_rng([p["seed"], k, int(index)])
        sr = self.sample_rate
        n = int(round(rng.uniform(p["min_dur"], p["max_dur"]) * sr))
        fc = self.centre_frequency(k)
        spec = np.fft.rfft(rng.standard_normal(n))
        freqs = np.fft.rfftfreq(n, 1 / sr)
        half = p["bandwidth"] / 2
        spec *= np.exp(-0.5 * ((freqs - fc) / half) ** 2)
        x = np.fft.irfft(spec, n)
        # speaker-specific modulation rate in [3, 7] Hz
        rate = 3.0 + 4.0 * ((k * 7) % max(p["n_speakers"], 1)) / max(p["n_speakers"], 1)
        t = np.arange(n) / sr
        x *= 0.65 + 0.35 * np.sin(2 * np.pi * rate * t + rng.uniform(0, 2 * np.pi))
        fade = min(int(0.01 * sr), n // 2)
        if fade:
            ramp = np.linspace(0.0, 1.0, fade)
            x[:fade] *= ramp
            x[-fade:] *= ramp[::-1]
        x /= np.sqrt(np.mean(x ** 2)) + 1e-12
        return (0.1 * x).astype(np.float32)


@lru_cache(maxsize=4096)
def _toy_utterance(utt: str, params: tuple) -> np.ndarray:
    corpus = ToyCorpus(**dict(params))
    out = corpus._render(utt)
    out.flags.writeable = False
    return out


class WavDirNoise:
    """Noise recordings from a directory of WAVs, split by file hash."""

    def __init__(self, root, split: str | None = None):
        self.root = Path(root)
        if not self.root.is_dir():
            raise InvalidConfigError(f"noise directory not found: {self.root}")
        files = sorted(str(p) for p in self.root.rglob("*.wav"))
        if split is not None:
            files = [f for f in files if _bucket_split(_stable_hash(Path(f).name)) == split]
        self.files = files

    def split(self, name: str) -> "WavDirNoise":
        return WavDirNoise(self.root, name)

    def segment(self, n: int, rng: np.random.Generator) -> tuple[np.ndarray, str]:
        if not self.files:
            raise InvalidConfigError(f"no noise files available under {self.root}")
        path = self.files[rng.integers(len(self.files))]
        data = read_wav(path)
        if len(data) < n:
            raise InvalidInputError(f"noise file {path} has {len(data)} samples, mixture needs {n}")
        start = int(rng.integers(len(data) - n + 1))
        return data[start:start + n], path


class ToyNoise:
    """Synthetic coloured noise 'recordings' with random spectral tilt."""

    def __init__(self, n_files: int = 40, seconds: float = 60.0, seed: int = 0, split: str | None = None,
                 sample_rate: int = SAMPLE_RATE):
        self.params = dict(n_files=n_files, seconds=seconds, seed=seed, sample_rate=sample_rate)
        ids = range(n_files)
        if split is not None:
            ids = [i for i in ids if _bucket_split(i) == split]
        self.ids = list(ids)

    def split(self, name: str) -> "ToyNoise":
        return ToyNoise(**self.params, split=name)

    def segment(self, n: int, rng: np.random.Generator) -> tuple[np.ndarray, str]:
        if not self.ids:
            raise InvalidConfigError("toy noise split is empty")
        i = self.ids[rng.integers(len(self.ids))]
        data = _toy_noise(i, tuple(sorted(self.params.items())))
        if len(data) < n:
            raise InvalidInputError(f"toy noise file {i} has {len(data)} samples, mixture needs {n}")
        start = int(rng.integers(len(data) - n + 1))
        return data[start:start + n], f"toynoise{i:03d}"


@lru_cache(maxsize=64)
def _toy_noise(i: int, params: tuple) -> np.ndarray:
    p = dict(params)
    rng = np.random.default_rng([p["seed"], 7919, i])
    n = int(p["seconds"] * p["sample_rate"])
    spec = np.fft.rfft(rng.standard_normal(n))
    freqs = np.fft.rfftfreq(n, 1 / p["sample_rate"])
    tilt = rng.uniform(-1.0, 0.0)  # between white and pink-ish slopes in power
    spec *= np.maximum(freqs, 50.0) ** (tilt / 2)
    x = np.fft.irfft(spec, n)
    x = (0.05 * x / np.sqrt(np.mean(x ** 2))).astype(np.float32)
    x.flags.writeable = False
    return x
