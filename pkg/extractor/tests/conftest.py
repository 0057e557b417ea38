"""Shared fixtures: tiny randomly-initialized encoders and WAV writers.

No test touches the network or pretrained weights; each family is
exercised through a miniature config with the real conv frontend
geometry, so frame-count behavior matches the full-size checkpoints.
"""

import struct
import wave

import numpy as np
import pytest
import torch

from voicesim_extract.models import ModelSpec, make_bundle

TINY_LAYERS = 2
TINY_DIM = 16


def _tiny_waveform_config(cls, feat_extract_norm="group"):
    return cls(
        hidden_size=TINY_DIM,
        num_hidden_layers=TINY_LAYERS,
        num_attention_heads=2,
        intermediate_size=32,
        conv_dim=(8, 8, 8, 8, 8, 8, 8),
        feat_extract_norm=feat_extract_norm,
        do_stable_layer_norm=feat_extract_norm == "layer",
    )


def tiny_waveform_bundle(family="wav2vec2", feat_extract_norm="group", seed=0):
    from transformers import (
        HubertConfig,
        HubertModel,
        Wav2Vec2Config,
        Wav2Vec2Model,
        WavLMConfig,
        WavLMModel,
    )

    config_cls, model_cls = {
        "wav2vec2": (Wav2Vec2Config, Wav2Vec2Model),
        "wavlm": (WavLMConfig, WavLMModel),
        "hubert": (HubertConfig, HubertModel),
    }[family]
    torch.manual_seed(seed)
    model = model_cls(_tiny_waveform_config(config_cls, feat_extract_norm))
    spec = ModelSpec(f"tiny-{family}", family, "(test-local)", TINY_LAYERS, TINY_DIM)
    return make_bundle(spec, model)


def tiny_whisper_bundle(chunk_seconds=10, max_source_positions=1500, seed=0):
    from transformers import WhisperConfig, WhisperModel

    torch.manual_seed(seed)
    model = WhisperModel(
        WhisperConfig(
            d_model=TINY_DIM,
            encoder_layers=TINY_LAYERS,
            encoder_attention_heads=2,
            encoder_ffn_dim=32,
            decoder_layers=1,
            decoder_attention_heads=2,
            decoder_ffn_dim=32,
            num_mel_bins=80,
            max_source_positions=max_source_positions,
        )
    )
    spec = ModelSpec("tiny-whisper", "whisper", "(test-local)", TINY_LAYERS, TINY_DIM)
    return make_bundle(spec, model, chunk_seconds)


def write_wav(path, samples, rate=16_000, channels=1, sampwidth=2):
    """Write float samples in [-1, 1] as a PCM WAV file."""
    samples = np.asarray(samples, dtype=np.float64)
    if channels > 1:
        assert samples.ndim == 2 and samples.shape[1] == channels
        flat = samples.reshape(-1)
    else:
        flat = samples
    if sampwidth == 1:
        raw = np.round(np.clip(flat, -1, 1) * 127 + 128).astype(np.uint8).tobytes()
    elif sampwidth == 2:
        raw = np.round(np.clip(flat, -1, 1) * 32767).astype("<i2").tobytes()
    elif sampwidth == 3:
        ints = np.round(np.clip(flat, -1, 1) * (2**23 - 1)).astype(np.int32)
        raw = b"".join(struct.pack("<i", v)[:3] for v in ints)
    elif sampwidth == 4:
        raw = np.round(np.clip(flat, -1, 1) * (2**31 - 1)).astype("<i4").tobytes()
    else:
        raise ValueError(sampwidth)
    with wave.open(str(path), "wb") as fh:
        fh.setnchannels(channels)
        fh.setsampwidth(sampwidth)
        fh.setframerate(rate)
        fh.writeframes(raw)
    return path


def write_tone(path, seconds, rate=16_000, freq=220.0, amp=0.3, channels=1):
    """Write a sine tone of the given duration; handy extraction input."""
    t = np.arange(int(round(seconds * rate))) / rate
    mono = amp * np.sin(2 * np.pi * freq * t)
    data = np.stack([mono] * channels, axis=1) if channels > 1 else mono
    return write_wav(path, data, rate=rate, channels=channels)


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture(scope="session")
def w2v_bundle():
    return tiny_waveform_bundle("wav2vec2")


@pytest.fixture(scope="session")
def whisper_bundle():
    return tiny_whisper_bundle()
