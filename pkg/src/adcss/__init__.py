"""Attractor-based joint speaker diarization, counting and separation."""

from .config import ModelConfig, TrainConfig, load_config, save_config
from .errors import InvalidConfigError, InvalidInputError, SamplingError
from .model import ADCSS, Inference, TrainOutput, build_model

__all__ = [
    "ADCSS", "Inference", "InvalidConfigError", "InvalidInputError", "ModelConfig", "SamplingError",
    "TrainConfig", "TrainOutput", "build_model", "load_config", "save_config",
]
__version__ = "0.1.0"
