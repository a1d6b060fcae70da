"""WAV input/output: 16 kHz mono, 16-bit PCM or 32-bit float."""

from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .errors import InvalidInputError

SAMPLE_RATE = 16000


def read_wav(path, expected_rate: int = SAMPLE_RATE) -> np.ndarray:
    """Read a mono WAV file and return float32 samples in [-1, 1]."""
    rate, data = wavfile.read(str(path))
    if rate != expected_rate:
        raise InvalidInputError(f"{path}: sample rate {rate} Hz, expected {expected_rate} Hz")
    if data.ndim != 1:
        raise InvalidInputError(f"{path}: expected mono audio, got shape {data.shape}")
    if data.dtype == np.int16:
        return (data.astype(np.float32) / 32768.0)
    if data.dtype == np.float32:
        return data
    if data.dtype == np.float64:
        return data.astype(np.float32)
    raise InvalidInputError(f"{path}: unsupported sample format {data.dtype}")


def write_wav(path, samples, rate: int = SAMPLE_RATE, pcm16: bool = False) -> None:
    samples = np.asarray(samples)
    if samples.ndim != 1:
        raise InvalidInputError(f"expected a 1-D waveform, got shape {samples.shape}")
    if not np.all(np.isfinite(samples)):
        raise InvalidInputError(f"{path}: waveform contains non-finite samples")
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    if pcm16:
        data = np.clip(np.round(samples * 32768.0), -32768, 32767).astype(np.int16)
    else:
        data = samples.astype(np.float32)
    wavfile.write(str(path), rate, data)
