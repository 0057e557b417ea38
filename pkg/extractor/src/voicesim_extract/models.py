"""Supported encoder catalog and model loading.

Each catalog entry pins the encoder's published architecture constants:
the number of transformer blocks L and the embedding dimension D of the
emitted representations. Extraction refuses to write files whose shape
disagrees with the catalog, so a typo'd checkpoint cannot silently
produce unusable data.

Waveform-input encoders (WavLM / wav2vec 2.0 / HuBERT / MMS) consume the
raw 16 kHz signal. Whisper consumes log-mel features and runs its encoder
only; see `extract` for the chunking convention.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch

from .errors import ModelError

DEFAULT_CHUNK_SECONDS = 10


@dataclass(frozen=True)
class ModelSpec:
    """One supported encoder: catalog name, family, checkpoint, (L, D)."""

    name: str
    family: str  # "wavlm" | "wav2vec2" | "hubert" | "whisper"
    hf_id: str
    num_layers: int
    dim: int


MODEL_SPECS = {
    spec.name: spec
    for spec in (
        ModelSpec("wavlm-large", "wavlm", "microsoft/wavlm-large", 24, 1024),
        ModelSpec("wav2vec2-large", "wav2vec2", "facebook/wav2vec2-large", 24, 1024),
        ModelSpec("hubert-large", "hubert", "facebook/hubert-large-ll60k", 24, 1024),
        ModelSpec("hubert-xlarge", "hubert", "facebook/hubert-xlarge-ll60k", 48, 1280),
        ModelSpec("mms-300m", "wav2vec2", "facebook/mms-300m", 24, 1024),
        ModelSpec("mms-1b", "wav2vec2", "facebook/mms-1b", 48, 1280),
        ModelSpec("whisper-medium", "whisper", "openai/whisper-medium", 24, 1024),
        ModelSpec("whisper-large", "whisper", "openai/whisper-large-v2", 32, 1280),
    )
}

WAVEFORM_FAMILIES = ("wavlm", "wav2vec2", "hubert")


@dataclass
class ModelBundle:
    """A ready-to-run encoder plus everything extraction needs to drive it.

    For whisper, `model` is the encoder module (positions already sized to
    the chunk) and `feature_extractor` builds its log-mel input. For
    waveform families, `model` is the full encoder and `normalize` says
    whether the checkpoint expects zero-mean/unit-variance input (the
    convention tied to layer-normalized feature extractors).
    """

    spec: ModelSpec
    model: torch.nn.Module
    feature_extractor: object | None
    normalize: bool
    chunk_seconds: int


def _whisper_encoder_for_chunk(model, chunk_seconds: int):
    """Return the encoder with its positional table cut to `chunk_seconds`.

    The encoder rejects inputs shorter than its positional table, so
    running 10-second chunks on a checkpoint shipped for 30-second ones
    requires keeping only the leading positions. Position embeddings are
    absolute, so the prefix is exactly what those frames would have seen.
    """
    encoder = model.get_encoder() if hasattr(model, "get_encoder") else model.encoder
    frames = chunk_seconds * 50  # 20 ms per encoder frame
    table = encoder.embed_positions
    if table.num_embeddings < frames:
        raise ModelError(
            f"chunk of {chunk_seconds}s needs {frames} positions; checkpoint "
            f"has {table.num_embeddings}"
        )
    if table.num_embeddings > frames:
        sliced = torch.nn.Embedding(frames, table.embedding_dim)
        with torch.no_grad():
            sliced.weight.copy_(table.weight[:frames])
        encoder.embed_positions = sliced
        encoder.config.max_source_positions = frames
    return encoder


def make_bundle(spec: ModelSpec, model, chunk_seconds: int = DEFAULT_CHUNK_SECONDS) -> ModelBundle:
    """Wrap an instantiated model for extraction (shared by tests and CLI)."""
    from transformers import WhisperFeatureExtractor

    if spec.family == "whisper":
        encoder = _whisper_encoder_for_chunk(model, chunk_seconds)
        encoder.eval()
        feature_extractor = WhisperFeatureExtractor(
            feature_size=encoder.config.num_mel_bins,
            sampling_rate=16_000,
            hop_length=160,
            chunk_length=chunk_seconds,
            n_fft=400,
        )
        return ModelBundle(spec, encoder, feature_extractor, False, chunk_seconds)
    if spec.family not in WAVEFORM_FAMILIES:
        raise ModelError(f"unknown model family {spec.family!r}")
    model.eval()
    normalize = getattr(model.config, "feat_extract_norm", None) == "layer"
    return ModelBundle(spec, model, None, normalize, chunk_seconds)


def load_model(name: str, chunk_seconds: int = DEFAULT_CHUNK_SECONDS) -> ModelBundle:
    """Load a catalog model's pretrained weights and wrap them for extraction."""
    from transformers import HubertModel, Wav2Vec2Model, WavLMModel, WhisperModel

    spec = MODEL_SPECS.get(name)
    if spec is None:
        known = ", ".join(sorted(MODEL_SPECS))
        raise ModelError(f"unknown model {name!r}; supported: {known}")
    classes = {
        "wavlm": WavLMModel,
        "wav2vec2": Wav2Vec2Model,
        "hubert": HubertModel,
        "whisper": WhisperModel,
    }
    try:
        model = classes[spec.family].from_pretrained(spec.hf_id)
    except Exception as exc:
        raise ModelError(f"could not load {spec.hf_id}: {exc}") from exc
    return make_bundle(spec, model, chunk_seconds)
