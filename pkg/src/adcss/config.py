"""Model/training configuration and the flat, versioned config file.

A config file is a flat YAML mapping with a ``config_version`` key; every
other key names a field of :class:`ModelConfig`, :class:`TrainConfig` or
:class:`~adcss.forge.SynthConfig`. Missing keys take the defaults below.
"""

from dataclasses import asdict, dataclass, fields
from pathlib import Path

import yaml

from .errors import InvalidConfigError
from .forge.dataset import SynthConfig
from .objectives import LossWeights

CONFIG_VERSION = 1
ATTRACTOR_STYLES = ("rnn", "transformer", "none")


@dataclass
class ModelConfig:
    L: int = 16
    F: int = 256
    D: int = 256
    K: int = 96
    num_heads: int = 4
    depth_dual: int = 2
    ff_dim: int | None = None
    n_triple: int = 6
    J_max: int = 4
    tau_exist: float = 0.5
    tau_diar: float = 0.5
    lambda_s: float = 0.8
    lambda_d: float = 0.1
    lambda_e: float = 0.1
    attractor_style: str = "rnn"
    attractor_pool: int = 1  # frames averaged per step of the rnn attractor encoder
    diar_branch: bool = True
    tie_permutations: bool = False
    fixed_speakers: int = 2  # J used when attractor_style == "none"
    sample_rate: int = 16000

    def validate(self):
        if self.L < 2 or self.L % 2:
            raise InvalidConfigError(f"L must be even and >= 2, got {self.L}")
        if self.K < 2 or self.K % 2:
            raise InvalidConfigError(f"K must be even and >= 2, got {self.K}")
        if self.D % self.num_heads:
            raise InvalidConfigError(f"D={self.D} not divisible by num_heads={self.num_heads}")
        if self.depth_dual < 1 or self.n_triple < 1 or self.J_max < 1:
            raise InvalidConfigError("depth_dual, n_triple and J_max must be >= 1")
        if self.attractor_pool < 1:
            raise InvalidConfigError(f"attractor_pool must be >= 1, got {self.attractor_pool}")
        if self.attractor_style not in ATTRACTOR_STYLES:
            raise InvalidConfigError(f"attractor_style must be one of {ATTRACTOR_STYLES}")
        for name in ("tau_exist", "tau_diar"):
            if not 0 < getattr(self, name) < 1:
                raise InvalidConfigError(f"{name} must lie in (0, 1)")
        self.weights()
        return self

    def weights(self) -> LossWeights:
        """Loss weights with inactive branches switched off."""
        counting = self.attractor_style != "none"
        diar = counting and self.diar_branch
        return LossWeights(self.lambda_s, self.lambda_d if diar else 0.0,
                           self.lambda_e if counting else 0.0)


@dataclass
class TrainConfig:
    seed: int = 0
    lr_phase1: float = 1e-3
    lr_phase2: float = 1e-5
    batch_size: int = 4
    max_epochs: int = 200
    patience: int = 10
    segment_seconds: float = 10.0
    grad_clip: float = 5.0
    steps_per_epoch: int | None = None  # None: one pass over the segments
    train_manifest: str | None = None
    valid_manifest: str | None = None
    phase2_train_manifest: str | None = None
    phase2_valid_manifest: str | None = None
    ckpt_dir: str = "checkpoints"
    init_checkpoint: str | None = None

    def manifests(self, phase: int) -> tuple[str, str]:
        if phase == 2:
            train = self.phase2_train_manifest or self.train_manifest
            valid = self.phase2_valid_manifest or self.valid_manifest
        else:
            train, valid = self.train_manifest, self.valid_manifest
        if not train or not valid:
            raise InvalidConfigError(f"phase {phase} needs train and valid manifests in the config")
        return train, valid

    def lr(self, phase: int) -> float:
        return self.lr_phase1 if phase == 1 else self.lr_phase2


_SECTIONS = (ModelConfig, TrainConfig, SynthConfig)


def _coerce(cls, key, value):
    if key == "speaker_counts":
        if isinstance(value, int):
            return (value,)
        return tuple(int(v) for v in value)
    return value


def split_config(flat: dict) -> tuple[ModelConfig, TrainConfig, SynthConfig]:
    flat = dict(flat)
    version = flat.pop("config_version", CONFIG_VERSION)
    if version != CONFIG_VERSION:
        raise InvalidConfigError(f"unsupported config_version {version}, expected {CONFIG_VERSION}")
    parts = []
    for cls in _SECTIONS:
        names = {f.name for f in fields(cls)}
        kwargs = {k: _coerce(cls, k, flat.pop(k)) for k in list(flat) if k in names}
        parts.append(cls(**kwargs))
    if flat:
        raise InvalidConfigError(f"unknown config keys: {sorted(flat)}")
    parts[0].validate()
    parts[2].validate()
    return tuple(parts)


def load_config(path) -> tuple[ModelConfig, TrainConfig, SynthConfig]:
    try:
        data = yaml.safe_load(Path(path).read_text()) or {}
    except (OSError, yaml.YAMLError) as exc:
        raise InvalidConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict) or any(isinstance(v, dict) for v in data.values()):
        raise InvalidConfigError(f"{path}: config must be a flat key-value mapping")
    return split_config(data)


def flatten(*parts) -> dict:
    flat = {"config_version": CONFIG_VERSION}
    for part in parts:
        for k, v in asdict(part).items():
            flat[k] = list(v) if isinstance(v, tuple) else v
    return flat


def save_config(path, *parts) -> None:
    Path(path).write_text(yaml.safe_dump(flatten(*parts), sort_keys=False))
