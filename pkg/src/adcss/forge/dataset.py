"""Dataset synthesis and the line-delimited manifest format.

A manifest is JSON lines: one header record (``"type": "header"``) followed
by one ``"type": "mixture"`` record per mixture. Paths are relative to the
manifest's directory.
"""

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..audio import SAMPLE_RATE, read_wav, write_wav
from ..errors import InvalidConfigError, InvalidInputError
from .corpus import SPLITS, ToyCorpus, ToyNoise, WavDirCorpus, WavDirNoise
from .mixing import MixtureSample, add_noise, apply_reverb, mix_anechoic, overlap_ratio, sample_track
from .room import sample_room

CONDITIONS = ("anechoic", "noisy", "reverb", "noisy_reverb")
MANIFEST_VERSION = 1


@dataclass
class SynthConfig:
    corpus: str = "toy"  # "toy" or a directory of per-speaker WAV folders
    noise: str = "toy"  # "toy" or a directory of noise WAVs
    condition: str = "anechoic"
    speaker_counts: tuple[int, ...] = (2,)
    n_train: int = 20000
    n_valid: int = 2000
    n_test: int = 2000
    synth_seed: int = 0
    min_utterances: int = 1
    max_utterances: int = 5
    min_silence: float = 0.0
    max_silence: float = 3.0
    level_window_db: float = 5.0
    snr_min: float = 0.0
    snr_max: float = 10.0
    toy_speakers: int = 24
    toy_utterances: int = 20
    toy_min_dur: float = 0.5
    toy_max_dur: float = 1.5
    toy_bandwidth: float = 250.0
    sample_rate: int = SAMPLE_RATE

    def validate(self):
        if self.condition not in CONDITIONS:
            raise InvalidConfigError(f"condition must be one of {CONDITIONS}, got {self.condition!r}")
        if not self.speaker_counts or min(self.speaker_counts) < 1:
            raise InvalidConfigError(f"invalid speaker counts {self.speaker_counts}")
        if not 1 <= self.min_utterances <= self.max_utterances:
            raise InvalidConfigError("utterance count range is empty")
        if not 0 <= self.min_silence <= self.max_silence:
            raise InvalidConfigError("silence range is invalid")

    def sizes(self) -> dict:
        return {"train": self.n_train, "valid": self.n_valid, "test": self.n_test}


def make_corpus(cfg: SynthConfig):
    if cfg.corpus == "toy":
        return ToyCorpus(cfg.toy_speakers, cfg.toy_utterances, cfg.toy_min_dur, cfg.toy_max_dur,
                         bandwidth=cfg.toy_bandwidth, seed=cfg.synth_seed, sample_rate=cfg.sample_rate)
    return WavDirCorpus(cfg.corpus)


def make_noise(cfg: SynthConfig):
    if cfg.noise == "toy":
        return ToyNoise(seed=cfg.synth_seed, sample_rate=cfg.sample_rate)
    return WavDirNoise(cfg.noise)


def mixture_rng(seed: int, split: str, index: int) -> np.random.Generator:
    return np.random.default_rng([seed, SPLITS.index(split), index])


def generate_mixture(corpus, noise, cfg: SynthConfig, rng: np.random.Generator,
                     n_speakers: int | None = None) -> MixtureSample:
    """Synthesise one mixture from split-restricted corpus and noise providers."""
    if n_speakers is None:
        n_speakers = int(rng.choice(cfg.speaker_counts))
    speakers = corpus.speakers()
    if len(speakers) < n_speakers:
        raise InvalidConfigError(f"split has {len(speakers)} speakers, mixture needs {n_speakers}")
    chosen = [speakers[i] for i in rng.choice(len(speakers), size=n_speakers, replace=False)]
    tracks = [sample_track(corpus, s, rng, (cfg.min_utterances, cfg.max_utterances),
                           (cfg.min_silence, cfg.max_silence), cfg.sample_rate) for s in chosen]
    meta = {"condition": cfg.condition, "snr_db": None, "rt60_s": None, "room_dims_m": None,
            "positions_m": None}
    if cfg.condition in ("reverb", "noisy_reverb"):
        room = sample_room(rng, n_speakers)
        tracks = apply_reverb(tracks, room, rng, cfg.sample_rate)
        meta.update(rt60_s=room.rt60_s, room_dims_m=list(room.dims),
                    positions_m={"mic": list(room.mic_pos_m), "speakers": [list(p) for p in room.speaker_pos_m]})
    mix = mix_anechoic(tracks, rng, cfg.level_window_db, cfg.sample_rate)
    mix.meta.update(meta)
    if cfg.condition in ("noisy", "noisy_reverb"):
        mix = add_noise(mix, noise, rng, (cfg.snr_min, cfg.snr_max))
    return mix


def build_split(cfg: SynthConfig, split: str, out_dir, count: int | None = None) -> Path:
    """Write WAVs and the manifest for one split; return the manifest path."""
    cfg.validate()
    out_dir = Path(out_dir)
    count = cfg.sizes()[split] if count is None else count
    corpus = make_corpus(cfg).split(split)
    noise = make_noise(cfg).split(split) if cfg.condition in ("noisy", "noisy_reverb") else None
    records, ratios = [], []
    for index in range(count):
        mix_id = f"{split}_{index:06d}"
        seed = [cfg.synth_seed, SPLITS.index(split), index]
        mix = generate_mixture(corpus, noise, cfg, mixture_rng(cfg.synth_seed, split, index))
        rel = Path(split) / mix_id
        try:
            write_wav(out_dir / rel / "mixture.wav", mix.mixture, cfg.sample_rate)
            sources = []
            for c, track in enumerate(mix.tracks):
                write_wav(out_dir / rel / f"s{c + 1}.wav", track.waveform, cfg.sample_rate)
                sources.append(str(rel / f"s{c + 1}.wav"))
            noise_path = None
            if mix.noise is not None:
                write_wav(out_dir / rel / "noise.wav", mix.noise, cfg.sample_rate)
                noise_path = str(rel / "noise.wav")
        except OSError as exc:
            raise OSError(f"failed writing audio for {mix_id} under {out_dir / rel}: {exc}") from exc
        intervals = [[[round(s, 6), round(e, 6)] for s, e in t.intervals] for t in mix.tracks]
        ratios.append(overlap_ratio([t.intervals for t in mix.tracks], len(mix.mixture), cfg.sample_rate))
        records.append({
            "type": "mixture",
            "id": mix_id,
            "mixture": str(rel / "mixture.wav"),
            "sources": sources,
            "noise": noise_path,
            "speakers": [t.speaker_id for t in mix.tracks],
            "intervals": intervals,
            "num_samples": len(mix.mixture),
            "condition": cfg.condition,
            "snr_db": mix.meta.get("snr_db"),
            "rt60_s": mix.meta.get("rt60_s"),
            "room_dims_m": mix.meta.get("room_dims_m"),
            "positions_m": mix.meta.get("positions_m"),
            "relative_gains_db": mix.meta.get("relative_gains_db"),
            "seed": seed,
        })
    header = {
        "type": "header",
        "version": MANIFEST_VERSION,
        "split": split,
        "condition": cfg.condition,
        "speaker_counts": list(cfg.speaker_counts),
        "count": count,
        "sample_rate": cfg.sample_rate,
        "synth_seed": cfg.synth_seed,
        "mean_overlap_ratio": float(np.mean(ratios)) if ratios else 0.0,
    }
    path = out_dir / f"{split}.jsonl"
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        fh.write(json.dumps(header) + "\n")
        for rec in records:
            fh.write(json.dumps(rec) + "\n")
    return path


def build_dataset(cfg: SynthConfig, out_dir) -> dict[str, Path]:
    return {split: build_split(cfg, split, out_dir) for split in SPLITS if cfg.sizes()[split] > 0}


@dataclass
class Manifest:
    path: Path
    header: dict
    records: list[dict]

    @property
    def root(self) -> Path:
        return self.path.parent

    def load_audio(self, rec: dict):
        """Return (mixture, sources list, noise or None) as float32 arrays."""
        try:
            mix = read_wav(self.root / rec["mixture"])
            sources = [read_wav(self.root / p) for p in rec["sources"]]
            noise = read_wav(self.root / rec["noise"]) if rec.get("noise") else None
        except (OSError, ValueError) as exc:
            raise InvalidInputError(f"mixture {rec.get('id')}: {exc}") from exc
        return mix, sources, noise


def load_manifest(path) -> Manifest:
    path = Path(path)
    header, records = {}, []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise InvalidInputError(f"{path}:{lineno}: {exc}") from exc
            if rec.get("type") == "header":
                header = rec
            else:
                records.append(rec)
    return Manifest(path, header, records)
