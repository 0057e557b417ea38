"""Layer-wise hidden-state extraction.

Every encoder here emits one frame per 320 input samples (20 ms at
16 kHz), so a clip of N samples yields close to N // 320 frames. The
emitted tensor stacks the L transformer block outputs; the pre-encoder
feature embedding (the extra first entry of the hidden-state tuple) is
deliberately excluded, so axis 0 has exactly L entries.

Whisper is special-cased: its feature extractor pads every clip to a
fixed chunk, the encoder runs on the whole chunk, and the output is then
trimmed back to the frames covering the original clip, which keeps frame
counts comparable with the waveform-input families. Clips longer than
the chunk are refused rather than truncated.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .audio import SAMPLE_RATE, load_wav_16k
from .errors import AudioError, ExtractorError, ModelError
from .lrp_writer import write_lrp
from .models import DEFAULT_CHUNK_SECONDS, ModelBundle, load_model

SAMPLES_PER_FRAME = 320
MIN_SAMPLES = 400  # one receptive field; shorter clips produce no frames
FRAME_TOLERANCE = 2  # allowed |T - samples // 320| from conv edge behavior


def expected_frames(num_samples: int) -> int:
    return num_samples // SAMPLES_PER_FRAME


def _stack_block_outputs(hidden_states) -> np.ndarray:
    """Drop the pre-encoder entry and stack block outputs to (L, T, D)."""
    stacked = torch.stack([h[0] for h in hidden_states[1:]], dim=0)
    return stacked.to(torch.float32).cpu().numpy()


def _extract_waveform(bundle: ModelBundle, samples: np.ndarray, origin) -> np.ndarray:
    if bundle.normalize:
        centered = samples - samples.mean()
        samples = centered / np.sqrt(centered.var() + 1e-7)
    batch = torch.from_numpy(np.ascontiguousarray(samples)).to(torch.float32)[None, :]
    with torch.no_grad():
        out = bundle.model(batch, output_hidden_states=True)
    arr = _stack_block_outputs(out.hidden_states)
    drift = abs(arr.shape[1] - expected_frames(len(samples)))
    if drift > FRAME_TOLERANCE:
        raise ModelError(
            f"{origin}: {arr.shape[1]} frames for {len(samples)} samples is "
            f"{drift} off the documented rate (tolerance {FRAME_TOLERANCE})"
        )
    return arr


def _extract_whisper(bundle: ModelBundle, samples: np.ndarray, origin) -> np.ndarray:
    limit = bundle.chunk_seconds * SAMPLE_RATE
    if len(samples) > limit:
        raise AudioError(
            f"{origin}: {len(samples) / SAMPLE_RATE:.2f}s exceeds the "
            f"{bundle.chunk_seconds}s chunk; split the clip or raise the chunk length"
        )
    feats = bundle.feature_extractor(
        samples, sampling_rate=SAMPLE_RATE, return_tensors="pt"
    ).input_features
    with torch.no_grad():
        out = bundle.model(feats, output_hidden_states=True)
    arr = _stack_block_outputs(out.hidden_states)
    keep = min(expected_frames(len(samples)), arr.shape[1])
    return arr[:, :keep, :]


def extract_utterance(bundle: ModelBundle, wav_path) -> tuple[str, np.ndarray]:
    """Extract one clip to its (L, T, D) layer-wise representation.

    Returns the utterance id (the file stem) and the float32 array, after
    enforcing the catalog's (L, D), the frame-rate contract, and finiteness.
    """
    wav_path = Path(wav_path)
    samples = load_wav_16k(wav_path)
    if len(samples) < MIN_SAMPLES:
        raise AudioError(
            f"{wav_path}: {len(samples)} samples at 16 kHz is shorter than one "
            f"{MIN_SAMPLES}-sample analysis window"
        )
    if bundle.spec.family == "whisper":
        arr = _extract_whisper(bundle, samples, wav_path)
    else:
        arr = _extract_waveform(bundle, samples, wav_path)
    if arr.shape[0] != bundle.spec.num_layers or arr.shape[2] != bundle.spec.dim:
        raise ModelError(
            f"{wav_path}: model emitted (L, D) = ({arr.shape[0]}, {arr.shape[2]}), "
            f"catalog documents ({bundle.spec.num_layers}, {bundle.spec.dim})"
        )
    if not np.isfinite(arr).all():
        raise ModelError(f"{wav_path}: representation contains NaN or Inf")
    return wav_path.stem, arr


@dataclass
class ExtractJob:
    """A batch extraction: one model over every .wav in a directory."""

    model_name: str
    wav_dir: Path
    out_dir: Path
    chunk_seconds: int = DEFAULT_CHUNK_SECONDS


def run_job(job: ExtractJob, bundle: ModelBundle | None = None, log=None) -> list[Path]:
    """Extract every clip in `job.wav_dir` to LRP1 files in `job.out_dir`.

    Files are processed in sorted order and independently; a preloaded
    `bundle` may be supplied (otherwise the catalog model is loaded).
    Returns the written paths.
    """
    wav_dir = Path(job.wav_dir)
    wavs = sorted(wav_dir.glob("*.wav"))
    if not wavs:
        raise ExtractorError(f"no .wav files found in {wav_dir}")
    if bundle is None:
        bundle = load_model(job.model_name, job.chunk_seconds)
    out_dir = Path(job.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for wav in wavs:
        utterance_id, arr = extract_utterance(bundle, wav)
        out_path = out_dir / f"{utterance_id}.lrp"
        write_lrp(out_path, utterance_id, arr)
        written.append(out_path)
        if log is not None:
            log(f"{wav.name} -> {out_path.name}  (L={arr.shape[0]}, T={arr.shape[1]}, D={arr.shape[2]})")
    return written
