"""Layer-wise hidden-state extraction frontend for the similarity scorer."""

from .audio import SAMPLE_RATE, load_wav, load_wav_16k, resample
from .errors import AudioError, ExtractorError, ManifestError, ModelError
from .extract import (
    FRAME_TOLERANCE,
    MIN_SAMPLES,
    SAMPLES_PER_FRAME,
    ExtractJob,
    expected_frames,
    extract_utterance,
    run_job,
)
from .lrp_writer import LRP_MAGIC, LRP_VERSION, write_lrp
from .manifest import build_manifest
from .models import (
    DEFAULT_CHUNK_SECONDS,
    MODEL_SPECS,
    ModelBundle,
    ModelSpec,
    load_model,
    make_bundle,
)

__version__ = "0.1.0"

__all__ = [
    "AudioError",
    "DEFAULT_CHUNK_SECONDS",
    "ExtractJob",
    "ExtractorError",
    "FRAME_TOLERANCE",
    "LRP_MAGIC",
    "LRP_VERSION",
    "MIN_SAMPLES",
    "MODEL_SPECS",
    "ManifestError",
    "ModelBundle",
    "ModelError",
    "ModelSpec",
    "SAMPLES_PER_FRAME",
    "SAMPLE_RATE",
    "build_manifest",
    "expected_frames",
    "extract_utterance",
    "load_model",
    "load_wav",
    "load_wav_16k",
    "make_bundle",
    "resample",
    "run_job",
    "write_lrp",
]
