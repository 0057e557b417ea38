"""WAV decoding and resampling.

Decoding uses the standard library `wave` module, so inputs must be PCM
WAV files (8/16/24/32-bit integer samples). Stereo and multi-channel
audio is averaged down to mono. Resampling to the model sample rate uses
polyphase filtering (`scipy.signal.resample_poly`).
"""

from __future__ import annotations

import math
import wave

import numpy as np
from scipy.signal import resample_poly

from .errors import AudioError

SAMPLE_RATE = 16_000


def load_wav(path):
    """Decode a PCM WAV file to (mono float64 in [-1, 1], sample_rate)."""
    try:
        with wave.open(str(path), "rb") as fh:
            channels = fh.getnchannels()
            width = fh.getsampwidth()
            rate = fh.getframerate()
            frames = fh.getnframes()
            raw = fh.readframes(frames)
    except (wave.Error, EOFError) as exc:
        raise AudioError(f"{path}: not a decodable PCM WAV file ({exc})") from exc
    if frames == 0:
        raise AudioError(f"{path}: file contains no audio frames")

    if width == 1:
        samples = np.frombuffer(raw, dtype=np.uint8).astype(np.float64)
        samples = (samples - 128.0) / 128.0
    elif width == 2:
        samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 2.0**15
    elif width == 3:
        as_bytes = np.frombuffer(raw, dtype=np.uint8).reshape(-1, 3)
        values = (
            as_bytes[:, 0].astype(np.int32)
            | (as_bytes[:, 1].astype(np.int32) << 8)
            | (as_bytes[:, 2].astype(np.int32) << 16)
        )
        values -= (values & 0x800000) << 1  # sign-extend 24-bit
        samples = values.astype(np.float64) / 2.0**23
    elif width == 4:
        samples = np.frombuffer(raw, dtype="<i4").astype(np.float64) / 2.0**31
    else:
        raise AudioError(f"{path}: unsupported sample width {width} bytes")

    if channels > 1:
        samples = samples.reshape(-1, channels).mean(axis=1)
    return samples, rate


def resample(samples: np.ndarray, rate: int, target_rate: int = SAMPLE_RATE) -> np.ndarray:
    """Polyphase-resample a mono signal to `target_rate`."""
    if rate <= 0:
        raise AudioError(f"invalid sample rate {rate}")
    if rate == target_rate:
        return np.asarray(samples, dtype=np.float64).copy()
    g = math.gcd(rate, target_rate)
    return resample_poly(np.asarray(samples, dtype=np.float64), target_rate // g, rate // g)


def load_wav_16k(path) -> np.ndarray:
    """Decode `path` and return mono float64 samples at 16 kHz."""
    samples, rate = load_wav(path)
    return resample(samples, rate)
