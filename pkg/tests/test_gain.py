from __future__ import annotations

import numpy as np
import pytest

from asrforge.audio_io import AudioClip, level_stats, write_wav
from asrforge.corpus import ManifestEntry, SpeechStyle, Split, Variant
from asrforge.errors import AllSilent, MissingFile, SilentInput
from asrforge.gain import (
    GainSource,
    GainTarget,
    apply_gain_db,
    apply_gain_db_counted,
    corpus_mean_gain,
    normalize_clip,
)

from conftest import make_sine
from oracles import rms_dbfs


def _entry(path: str, split=Split.TRAIN) -> ManifestEntry:
    return ManifestEntry(path, "texto", 0.1, "CETUC", SpeechStyle.PREPARED, Variant.PT_BR, split)


def _write_tone(tmp_path, name: str, amplitude: float, n=1600):
    clip = AudioClip(np.full(n, amplitude), 16000)
    write_wav(clip, tmp_path / name)
    return clip


class TestApplyGain:
    def test_zero_gain_identity(self, sine_clip):
        out = apply_gain_db(sine_clip, 0.0)
        assert np.array_equal(out.samples, sine_clip.samples)

    def test_plus_20_db_is_times_ten(self):
        clip = AudioClip(np.full(256, 0.1), 16000)
        out = apply_gain_db(clip, 20.0)
        assert level_stats(out).rms_dbfs == pytest.approx(0.0, abs=1e-9)

    def test_fractional_gain_matches_rms_recomputation(self):
        # oracle: direct RMS recomputation on the output samples
        clip = make_sine(amplitude=0.1414213562373095)  # ~ -20 dBFS RMS
        out = apply_gain_db(clip, 6.0206)
        assert rms_dbfs(out.samples) == pytest.approx(
            rms_dbfs(clip.samples) + 6.0206, abs=1e-6
        )

    def test_clipping_counted(self):
        clip = AudioClip(np.full(100, 0.5), 16000)
        out, clipped = apply_gain_db_counted(clip, 12.0)
        assert clipped == 100
        assert np.max(np.abs(out.samples)) <= 1.0

    def test_gain_composition(self, sine_clip):
        once = apply_gain_db(apply_gain_db(sine_clip, 3.5), 2.25)
        direct = apply_gain_db(sine_clip, 5.75)
        assert rms_dbfs(once.samples) == pytest.approx(rms_dbfs(direct.samples), abs=1e-6)


class TestNormalizeClip:
    def test_already_at_target_unchanged(self, sine_clip):
        target = GainTarget(level_stats(sine_clip).rms_dbfs, GainSource.EXPLICIT)
        out = normalize_clip(sine_clip, target)
        np.testing.assert_allclose(out.samples, sine_clip.samples, rtol=1e-9)

    def test_hits_target(self):
        # oracle: level_stats on the output
        clip = make_sine(amplitude=0.0447)  # around -30 dBFS
        out = normalize_clip(clip, GainTarget(-15.0, GainSource.EXPLICIT))
        assert level_stats(out).rms_dbfs == pytest.approx(-15.0, abs=0.01)

    def test_silent_input_rejected(self):
        clip = AudioClip(np.zeros(64), 16000)
        with pytest.raises(SilentInput):
            normalize_clip(clip, GainTarget(-15.0, GainSource.EXPLICIT))

    def test_idempotent(self):
        clip = make_sine(amplitude=0.3)
        target = GainTarget(-18.0, GainSource.EXPLICIT)
        once = normalize_clip(clip, target)
        twice = normalize_clip(once, target)
        assert np.max(np.abs(twice.samples - once.samples)) <= 1e-6

    def test_preserves_length_and_rate(self, sine_clip):
        out = normalize_clip(sine_clip, GainTarget(-12.0, GainSource.EXPLICIT))
        assert len(out.samples) == len(sine_clip.samples)
        assert out.sample_rate_hz == sine_clip.sample_rate_hz

    def test_target_must_be_finite(self):
        with pytest.raises(ValueError):
            GainTarget(float("-inf"), GainSource.EXPLICIT)


class TestCorpusMeanGain:
    def test_two_clip_mean(self, tmp_path):
        # -20 and -10 dBFS up to PCM-16 quantization (~0.0002 dB)
        _write_tone(tmp_path, "a.wav", 0.1)
        _write_tone(tmp_path, "b.wav", 10 ** (-10 / 20))
        entries = [_entry("a.wav"), _entry("b.wav")]
        target = corpus_mean_gain(entries, Split.TRAIN, tmp_path)
        assert target.target_rms_dbfs == pytest.approx(-15.0, abs=0.01)
        assert target.source is GainSource.CORPUS_MEAN

    def test_silent_clip_excluded(self, tmp_path):
        _write_tone(tmp_path, "a.wav", 0.1)
        _write_tone(tmp_path, "s.wav", 0.0)
        entries = [_entry("a.wav"), _entry("s.wav")]
        target = corpus_mean_gain(entries, Split.TRAIN, tmp_path)
        assert target.target_rms_dbfs == pytest.approx(-20.0, abs=0.01)

    def test_all_silent_rejected(self, tmp_path):
        _write_tone(tmp_path, "s.wav", 0.0)
        with pytest.raises(AllSilent):
            corpus_mean_gain([_entry("s.wav")], Split.TRAIN, tmp_path)

    def test_missing_file_propagates_path(self, tmp_path):
        with pytest.raises(MissingFile) as err:
            corpus_mean_gain([_entry("ghost.wav")], Split.TRAIN, tmp_path)
        assert "ghost.wav" in str(err.value)

    def test_split_filter_applied(self, tmp_path):
        _write_tone(tmp_path, "a.wav", 0.1)
        _write_tone(tmp_path, "b.wav", 1.0)
        entries = [_entry("a.wav"), _entry("b.wav", split=Split.DEV)]
        target = corpus_mean_gain(entries, Split.TRAIN, tmp_path)
        assert target.target_rms_dbfs == pytest.approx(-20.0, abs=0.01)

    def test_mean_of_100_random_levels(self, tmp_path):
        # oracle: independent per-file measurement, then the arithmetic mean
        rng = np.random.default_rng(42)
        entries = []
        expected = []
        for i in range(100):
            amp = float(10 ** (rng.uniform(-30, -10) / 20))
            name = f"clip{i:03d}.wav"
            _write_tone(tmp_path, name, amp, n=400)
            entries.append(_entry(name))
            clip = AudioClip(np.full(400, np.round(amp * 32768) / 32768), 16000)
            expected.append(rms_dbfs(clip.samples))
        target = corpus_mean_gain(entries, Split.TRAIN, tmp_path)
        assert target.target_rms_dbfs == pytest.approx(np.mean(expected), abs=1e-9)

    def test_permutation_invariant(self, tmp_path):
        rng = np.random.default_rng(5)
        entries = []
        for i in range(8):
            name = f"p{i}.wav"
            _write_tone(tmp_path, name, float(rng.uniform(0.05, 0.5)))
            entries.append(_entry(name))
        forward = corpus_mean_gain(entries, Split.TRAIN, tmp_path)
        backward = corpus_mean_gain(entries[::-1], Split.TRAIN, tmp_path)
        assert forward.target_rms_dbfs == pytest.approx(
            backward.target_rms_dbfs, abs=1e-9
        )
