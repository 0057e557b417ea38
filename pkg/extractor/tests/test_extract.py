import numpy as np
import pytest
import torch

from conftest import (
    TINY_DIM,
    TINY_LAYERS,
    tiny_waveform_bundle,
    tiny_whisper_bundle,
    write_tone,
    write_wav,
)
from voicesim_extract.audio import load_wav_16k
from voicesim_extract.errors import AudioError, ExtractorError, ModelError
from voicesim_extract.extract import (
    ExtractJob,
    _stack_block_outputs,
    expected_frames,
    extract_utterance,
    run_job,
)
from voicesim_extract.models import ModelSpec, make_bundle


class TestWaveformExtraction:
    def test_shape_and_frame_rate(self, w2v_bundle, tmp_path):
        path = write_tone(tmp_path / "u1.wav", 3.2)
        utterance_id, arr = extract_utterance(w2v_bundle, path)
        assert utterance_id == "u1"
        assert arr.dtype == np.float32
        assert arr.shape[0] == TINY_LAYERS and arr.shape[2] == TINY_DIM
        assert abs(arr.shape[1] - 160) <= 2  # 51200 samples / 320

    @pytest.mark.parametrize("family", ["wavlm", "hubert"])
    def test_other_families(self, family, tmp_path):
        bundle = tiny_waveform_bundle(family)
        path = write_tone(tmp_path / "u.wav", 1.0)
        _, arr = extract_utterance(bundle, path)
        assert arr.shape[0] == TINY_LAYERS and arr.shape[2] == TINY_DIM
        assert abs(arr.shape[1] - expected_frames(16_000)) <= 2

    def test_silent_audio_is_finite(self, w2v_bundle, tmp_path):
        path = write_wav(tmp_path / "z.wav", np.zeros(8000))
        _, arr = extract_utterance(w2v_bundle, path)
        assert np.isfinite(arr).all()

    def test_stereo_input(self, w2v_bundle, tmp_path):
        path = write_tone(tmp_path / "st.wav", 0.5, channels=2)
        _, arr = extract_utterance(w2v_bundle, path)
        assert abs(arr.shape[1] - expected_frames(8000)) <= 2

    def test_resampled_input_matches_frame_rate(self, w2v_bundle, tmp_path):
        # 1 s at 44.1 kHz becomes 16000 samples, i.e. ~50 frames.
        path = write_tone(tmp_path / "hi.wav", 1.0, rate=44_100)
        _, arr = extract_utterance(w2v_bundle, path)
        assert abs(arr.shape[1] - 50) <= 2

    def test_deterministic(self, w2v_bundle, tmp_path):
        path = write_tone(tmp_path / "d.wav", 0.7)
        _, first = extract_utterance(w2v_bundle, path)
        _, second = extract_utterance(w2v_bundle, path)
        assert first.tobytes() == second.tobytes()

    def test_too_short_audio(self, w2v_bundle, tmp_path):
        path = write_wav(tmp_path / "tiny.wav", np.zeros(300))
        with pytest.raises(AudioError, match="shorter than"):
            extract_utterance(w2v_bundle, path)

    def test_catalog_shape_mismatch_refused(self, w2v_bundle, tmp_path):
        wrong = ModelSpec("tiny-wrong", "wav2vec2", "(test-local)", TINY_LAYERS + 1, TINY_DIM)
        bundle = make_bundle(wrong, w2v_bundle.model)
        path = write_tone(tmp_path / "w.wav", 0.5)
        with pytest.raises(ModelError, match="catalog documents"):
            extract_utterance(bundle, path)

    def test_normalization_follows_checkpoint_convention(self):
        assert tiny_waveform_bundle("wav2vec2", feat_extract_norm="group").normalize is False
        assert tiny_waveform_bundle("wav2vec2", feat_extract_norm="layer").normalize is True

    def test_normalized_extraction_is_gain_invariant(self, tmp_path):
        # Zero-mean/unit-variance input makes the representation ignore gain.
        bundle = tiny_waveform_bundle("wav2vec2", feat_extract_norm="layer")
        loud = write_tone(tmp_path / "loud.wav", 0.5, amp=0.8)
        quiet = write_tone(tmp_path / "quiet.wav", 0.5, amp=0.1)
        _, a = extract_utterance(bundle, loud)
        _, b = extract_utterance(bundle, quiet)
        np.testing.assert_allclose(a, b, rtol=1e-3, atol=1e-4)


class TestWhisperExtraction:
    def test_four_second_input_trimmed_to_four_seconds(self, whisper_bundle, tmp_path):
        path = write_tone(tmp_path / "four.wav", 4.0)
        _, arr = extract_utterance(whisper_bundle, path)
        assert arr.shape == (TINY_LAYERS, 200, TINY_DIM)  # 64000 samples / 320

    def test_trimmed_output_is_prefix_of_untrimmed(self, whisper_bundle, tmp_path):
        path = write_tone(tmp_path / "p.wav", 4.0)
        _, trimmed = extract_utterance(whisper_bundle, path)
        samples = load_wav_16k(path)
        feats = whisper_bundle.feature_extractor(
            samples, sampling_rate=16_000, return_tensors="pt"
        ).input_features
        with torch.no_grad():
            out = whisper_bundle.model(feats, output_hidden_states=True)
        full = _stack_block_outputs(out.hidden_states)
        assert full.shape[1] == 500
        assert np.array_equal(trimmed, full[:, :200, :])

    def test_full_chunk_input_keeps_every_frame(self, whisper_bundle, tmp_path):
        path = write_tone(tmp_path / "ten.wav", 10.0)
        _, arr = extract_utterance(whisper_bundle, path)
        assert arr.shape[1] == 500

    def test_over_length_input_refused(self, whisper_bundle, tmp_path):
        path = write_tone(tmp_path / "long.wav", 10.5)
        with pytest.raises(AudioError, match="chunk"):
            extract_utterance(whisper_bundle, path)

    def test_longer_chunk_override_accepts_it(self, tmp_path):
        bundle = tiny_whisper_bundle(chunk_seconds=12)
        path = write_tone(tmp_path / "long.wav", 10.5)
        _, arr = extract_utterance(bundle, path)
        assert arr.shape[1] == expected_frames(int(10.5 * 16_000))

    def test_chunk_longer_than_position_table_refused(self):
        with pytest.raises(ModelError, match="positions"):
            tiny_whisper_bundle(chunk_seconds=40, max_source_positions=1500)

    def test_deterministic(self, whisper_bundle, tmp_path):
        path = write_tone(tmp_path / "d.wav", 2.0)
        _, first = extract_utterance(whisper_bundle, path)
        _, second = extract_utterance(whisper_bundle, path)
        assert first.tobytes() == second.tobytes()


class TestRunJob:
    def test_directory_extraction(self, w2v_bundle, tmp_path):
        wav_dir = tmp_path / "wavs"
        wav_dir.mkdir()
        for name, seconds in (("b", 0.5), ("a", 0.7), ("c", 0.4)):
            write_tone(wav_dir / f"{name}.wav", seconds)
        out_dir = tmp_path / "out"
        job = ExtractJob("tiny-wav2vec2", wav_dir, out_dir)
        lines = []
        written = run_job(job, bundle=w2v_bundle, log=lines.append)
        assert [p.name for p in written] == ["a.lrp", "b.lrp", "c.lrp"]
        assert all(p.is_file() for p in written)
        assert len(lines) == 3 and "a.wav" in lines[0]

    def test_empty_directory(self, w2v_bundle, tmp_path):
        empty = tmp_path / "none"
        empty.mkdir()
        with pytest.raises(ExtractorError, match="no .wav files"):
            run_job(ExtractJob("tiny-wav2vec2", empty, tmp_path / "out"), bundle=w2v_bundle)
