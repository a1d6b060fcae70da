"""Multi-speaker, multi-utterance mixture synthesis."""

from .corpus import ToyCorpus, ToyNoise, WavDirCorpus, WavDirNoise
from .dataset import (CONDITIONS, Manifest, SynthConfig, build_dataset, build_split,
                      generate_mixture, load_manifest)
from .mixing import (MixtureSample, SpeakerTrack, add_noise, apply_reverb, mix_anechoic,
                     overlap_ratio, sample_track, speaker_level_db, sum_sources)
from .room import RoomSpec, sample_room, synth_rir

__all__ = [
    "CONDITIONS", "Manifest", "MixtureSample", "RoomSpec", "SpeakerTrack", "SynthConfig",
    "ToyCorpus", "ToyNoise", "WavDirCorpus", "WavDirNoise", "add_noise", "apply_reverb",
    "build_dataset", "build_split", "generate_mixture", "load_manifest", "mix_anechoic",
    "overlap_ratio", "sample_room", "sample_track", "speaker_level_db", "sum_sources", "synth_rir",
]
